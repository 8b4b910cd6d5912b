"""Accuracy metrics, benchmark reports, and figures."""
