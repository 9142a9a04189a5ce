"""Reward tuples, per-state aggregation weights and the effective reward."""
