"""Rate-balance queueing: transform calculus, steady states of G/M/1, G/Mn/1 and
Mn/Gn/1 queues, brute-force oracles and a verifying discrete-event simulator."""

from .distributions import (Deterministic, DistributionSpec, Erlang, Exponential,
                            HyperExponential, Uniform)
from .errors import (ConfigError, DegenerateInputError, DomainError, EstimationError,
                     InstabilityError, InvalidDensityError, NormalizationError, NumericError,
                     PartitionError, RBPViolation, RBQError, RootBracketError, TailError)
from .gm1 import Gm1Model, Gm1Solution, solve_sigma, steady_state
from .gmn1 import Gmn1Model, Gmn1Solution, build_gmc, residuals_gmn1, shift_model, steady_state_gmn1
from .mngn1 import MnGn1Model, MnGn1Solution, residuals_mngn1, steady_state_mngn1
from .schedule import RateSchedule
from .sim import (Partition, SegmentTracker, SimConfig, SimStats, attach_rbp_tracker,
                  empirical_lst, simulate, tst_rate_report)
from .transforms import Transform, base, d_operator, inverse_d, lst_eval, mix, residual_mean

__version__ = "0.1.0"
