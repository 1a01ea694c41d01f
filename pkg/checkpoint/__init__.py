"""
DPQ1 binary checkpoints
"""
