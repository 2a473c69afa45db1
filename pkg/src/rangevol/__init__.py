"""Range-based volatility estimation for drifted Brownian motion.

Submodules:

* ``abm_range``: distributions of the maximum, minimum and range
* ``estimators``: method-of-moments and comparison volatility estimators
* ``mc_oracle``: seeded path simulation and synthetic OHLC bars
* ``pricing``: Black-Scholes calls
* ``trading``: mispricing-band strategy and ledger
* ``io``, ``config``, ``cli``: files, settings and the command line
"""

from .abm_range import (
    AbmParams,
    SeriesControl,
    confined_density,
    expected_range,
    h_moment,
    half_range_density,
    half_range_mean,
    joint_density_max,
    joint_density_max_min,
    range_density,
    range_density_quadrature,
)
from .errors import (
    BudgetError,
    DomainError,
    InfeasibleMoments,
    InsufficientData,
    NoConvergence,
    ParameterError,
    RangeVolError,
    ValidationError,
)
from .estimators import MomentInputs, OhlcBar, VolEstimate, estimate, rolling_estimate, solve_intraday_vol
from .mc_oracle import PathExtremes, SimConfig, simulate_extremes, simulate_ohlc
from .pricing import PricingInputs, bs_call

__version__ = "0.1.0"
