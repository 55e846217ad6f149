"""Dynamic Bayesian network inference of AV-user well-being, trust and
intention, with an expected-utility decision layer for the AV's
accommodative actions."""

__version__ = "0.1.0"
