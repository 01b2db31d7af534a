"""Heavy-tailed limits of ratio statistics of random sums.

Simulates N(t) Pareto-type claims, forms T = sum X^2 / (sum X)^2 and the sample
coefficient of variation and dispersion, and checks them against their
limiting laws.
"""

__version__ = "0.1.0"
