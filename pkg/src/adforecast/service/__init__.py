"""HTTP forecast service."""
