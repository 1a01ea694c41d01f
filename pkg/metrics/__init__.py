"""
Evaluation of compressed denoisers: sample quality, block error traces and size accounting
"""
