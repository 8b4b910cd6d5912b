"""Replay calibration: input encoding and mixture-of-experts networks."""
