"""Estimate the probability that random program inputs satisfy a numeric
path condition: adaptive importance sampling seeded by interval constraint
solving, plus direct Monte Carlo and stratified-paving baselines."""

__version__ = "0.1.0"
