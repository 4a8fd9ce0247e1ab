"""Anytime-valid and fixed-time inference for the average treatment effect in adaptive experiments."""
from .confseq import AsympCS, HedgedCS, PrPICS, asymp_interval, psi_E, rho_opt
from .core import Interval, Observation, OutcomeRange, TruncationSchedule, rescale, seeded_rng
from .estimator import EstimatorState, clt_interval, score
from .policy import aipw_policy, next_k, truncate

__version__ = "0.1.0"
