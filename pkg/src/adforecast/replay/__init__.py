"""Campaign criteria and the auction-log replay engine."""
