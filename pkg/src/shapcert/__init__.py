"""Verifiable LSH-bucket Shapley data valuation.

Scores training points against a buyer's validation cohort with a
bucket-collision Shapley closed form, and certifies the released scores
against dataset commitments with a sumcheck + polynomial-commitment proof
that any third party can check without seeing the data.
"""

from .field import P, EF, OpCounter

__all__ = ["P", "EF", "OpCounter"]
