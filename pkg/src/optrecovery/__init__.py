"""Linear optimal recovery from point values under Chebyshev-space approximability."""

__version__ = "0.1.0"

from optrecovery.cheb_core import (
    ChebyshevSystem,
    CollocationMatrix,
    SamplingGrid,
    collocate,
    lagrange_value,
    lagrange_values,
    make_system,
    moment_vector,
)
from optrecovery.diagnostics import (
    RatioReport,
    WCEAudit,
    enumerate_supports,
    ersatz_solver,
    rho_norm_ratio,
    wce_audit,
)
from optrecovery.exceptions import (
    ChebyshevPropertyError,
    CyclingError,
    DegenerateError,
    InfeasibleError,
    RecoveryError,
    SolverError,
    SubintervalError,
)
from optrecovery.l1_simplex import (
    CertificateReport,
    SparseSolution,
    StandardFormLP,
    certificate_check,
    simplex_solve,
    to_standard_form,
)
from optrecovery.recovery import (
    PiecewiseRecoveryMap,
    RecoveredFunction,
    asharp_matrix,
    asharp_vector,
    build_recovery_map,
    evaluate_asharp,
    evaluate_delta,
    insert_point_warm,
    l1_profile,
    load_map,
    recover,
    save_map,
)
