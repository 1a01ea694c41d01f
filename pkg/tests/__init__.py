"""
Unit tests for the DPQ laboratory

This package contains one suite per library package:
- test_numerics.py: matrix helpers, binary16 rounding and the seeded generator
- test_kmeans.py: k-means++ seeding and Lloyd iterations
- test_quantizers.py: uniform, VQ and PQ quantizers and storage accounting
- test_codebook_pool.py: pool construction and projection
- test_diffusion.py: schedule, denoiser backprop, training and samplers
- test_calibration.py: quantized layers, reassignment, codebook gradients and calibration
- test_metrics.py: sliced Wasserstein, mode coverage, error traces and size reports
- test_checkpoint.py: DPQ1 encoding and corruption checks
- test_cli.py: configuration layering and the launcher

Usage:
    # Run the quick subset
    python tests/basic_test_runner.py

    # Run everything
    python tests/basic_test_runner.py --all

    # Run individual test files
    python -m unittest tests.test_quantizers
    python -m unittest tests.test_checkpoint
"""

__version__ = "1.0.0"
