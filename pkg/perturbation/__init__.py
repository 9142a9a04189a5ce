"""Constructive reward perturbations and policy-jump distances."""
