"""Finite MDP representation and exact Bellman machinery."""
