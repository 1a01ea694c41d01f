"""
Dense linear algebra kernels, half-precision rounding and the seeded random generator.
"""
