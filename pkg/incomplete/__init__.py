"""Suboptimality certificates for incomplete training rewards."""
