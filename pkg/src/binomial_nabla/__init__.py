"""The interpolated difference operator nabla_n on {0,...,n}, Krawtchouk ladders and the binomial Poincare inequality."""

from .core import (
    Backend,
    BackendMismatch,
    BinomialParams,
    GridFunction,
    WeightVector,
    binomial_pmf,
    entropy_functional,
    inner_unweighted,
    inner_weighted,
    mean_variance,
    pmf_time_derivative,
)
from .krawtchouk import (
    IdentityViolation,
    KrawtchoukBasis,
    expand_in_basis,
    generate_basis,
    ladder_down,
    ladder_up,
    norm_constant,
)
from .operators import (
    DerivativeFamily,
    LinearOperatorMatrix,
    alpha_derivative,
    diag_D,
    diag_D_inverse,
    matrix_of,
    nabla_left,
    nabla_n,
    nabla_right,
    nabla_star,
    nabla_tilde,
)
from .spectral import (
    PoincareReport,
    SpectrumReport,
    counterexample_search,
    klaassen_rhs,
    log_sobolev_check,
    operator_spectrum,
    poincare_check,
    poisson_limit_table,
)
from .translation import (
    TranslationPath,
    evolve,
    is_fundamental_solution,
    matrix_exponential,
    necessary_conditions,
    support_confinement_check,
    transport_identity_check,
    transport_identity_exact,
)

__version__ = "0.1.0"
