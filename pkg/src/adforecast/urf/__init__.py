"""User response forecasting: featurization and factorization machines."""
