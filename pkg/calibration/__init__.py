"""
Two-phase calibration of compressed models: activation-aware codeword reassignment
in the forward pass, AdamW codebook updates from the DDPM loss in the backward pass.
"""
