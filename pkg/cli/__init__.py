"""
Command line front end: train-toy, quantize, calibrate, sample, eval, report, trace
"""
