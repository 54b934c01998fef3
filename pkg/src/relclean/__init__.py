"""relclean: Bayesian cleaning of flat, dirty, denormalized tables.

Users write a short generative program over a latent relational database;
the engine infers the latent database by compiled-proposal sequential Monte
Carlo with rejuvenation and emits a repaired/imputed table with quantified
uncertainty.
"""

__version__ = "0.1.0"
