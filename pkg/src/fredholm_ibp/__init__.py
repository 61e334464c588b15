"""Fredholm representations of Gaussian processes and integration-by-parts tests."""

from .errors import (
    FredholmError,
    InvalidArgumentError,
    NotPositiveSemidefiniteError,
    UnsupportedKernelError,
)
from .expr import parse
from .fredholm import (
    BracketFunction,
    CovarianceMatrix,
    catalog_covariance,
    catalog_kernel,
    covariance_from_kernel,
    factorize,
    trace_check,
    wiener_variance,
)
from .functionals import (
    SmoothFunctional,
    derivative_pairing,
    evaluate,
    gateaux_fd,
    hermite,
    malliavin_d1,
    malliavin_d2,
    pathwise_integral,
    stein_residual_1d,
)
from .grid import Grid, make_grid, quadrature
from .ibp import (
    IbpReport,
    TestVerdict,
    char_function_check,
    default_family,
    gaussianity_test,
    ibp_corollary,
    ibp_strong,
    ibp_weak,
)
from .kernel_ops import (
    Kernel,
    StepFunction,
    adjoint_apply,
    apply_operator,
    bv_adjoint_apply,
    dom_inner,
    duality_residual,
)
from .simulate import PathEnsemble, sample_cholesky, sample_compensated_poisson, sample_series

__version__ = "0.1.0"
