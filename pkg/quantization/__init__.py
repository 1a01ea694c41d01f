"""
Weight quantizers: k-means codebooks, uniform/VQ/PQ quantization, the codebook pool,
storage accounting and the layer types that carry quantized weights.
"""
