"""Entropy-regularized dynamic programming and Boltzmann policies."""
