"""
Sparse Sense - adaptive sparse sensing with RZA-NLMF

Online recovery of sparse signals by a reweighted zero-attracting normalized least mean fourth
filter, compared against OMP and BPDN baselines and closed-form MSE bounds.
"""

__version__ = "0.1.0"
__author__ = "Sparse Sense Team"
__description__ = "Adaptive sparse sensing experiments with Monte Carlo MSE benchmarking"
