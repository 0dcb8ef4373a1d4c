"""Orthogonal-polynomial moment machinery, Radon-Nikodym liquidity indicators
and a deterministic liquidity-trading backtester."""

__version__ = "0.1.0"

from .basis import (  # noqa: E402
    CHEBYSHEV,
    HERMITE_E,
    LAGUERRE,
    LEGENDRE,
    SHIFTED_LEGENDRE,
    Basis,
    BasisKind,
    Poly,
    differentiate,
    eval_poly,
    integrate,
    moments_from_sample,
    multiply,
    roots_confederate,
    shift_argument,
    synthetic_divide,
)
from .errors import (  # noqa: E402
    BasisMismatchError,
    DataError,
    DegenerateMatrixError,
    DegreeCollapseError,
    KronrodInfeasible,
    LiqflowError,
    TickOrderError,
    WarmUpError,
)
from .linalg import EigSystem, solve_gev  # noqa: E402
from .matrices import build_matrix, trace_average, trace_product_average, vector_covariance  # noqa: E402
from .streaming import MomentSnapshot, TickStreamState, ingest, p_aver  # noqa: E402
from .tickio import Tick, TickArrays, read_ticks, write_ticks  # noqa: E402
