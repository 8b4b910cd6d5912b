"""Synthetic world, logs, and the ground-truth delivery simulator."""
