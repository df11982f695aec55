"""Monte Carlo verification bench for vector-valued stochastic integrals
driven by orthogonal martingale-valued measures."""

__version__ = "0.1.0"
