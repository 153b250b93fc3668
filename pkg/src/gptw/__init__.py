"""Pseudospectral workbench for T-periodic Gross-Pitaevskii traveling waves."""

from .field import (
    ComplexField,
    FieldFormatError,
    GridMismatch,
    InconsistentWinding,
    LiftResult,
    TorusGrid,
    VortexPresent,
    axis_windings,
    inner_product,
    l2_norm,
    l2_product,
    lift,
    read_field,
    read_header,
    spectral_derivative,
    transform_forward,
    transform_inverse,
    write_field,
)
from .functionals import (
    ActionReport,
    Certificate,
    Params,
    action,
    certify,
    energy,
    gradient,
    hessian_apply,
    momentum,
)
from .ansatz import (
    NoSuchSolution,
    SupportTooLarge,
    VortexAnsatz,
    constant,
    fitted_vortex_ansatz,
    perturb,
    plane_wave,
    vortex_test_function,
)
from .minimize import (
    CriticalPoint,
    MinimizeOptions,
    NonFiniteValue,
    classify,
    minimize_action,
    minimizer_experiment,
)
from .mountainpass import (
    NotASaddle,
    Path,
    RelaxOptions,
    SaddleOptions,
    SaddleResult,
    StalledPath,
    find_saddle,
    init_path,
    mountain_pass_pipeline,
    relax_path,
)
from .spectrum import (
    NoConvergence,
    SpectrumReport,
    ThresholdReport,
    WeightOutOfRange,
    case1_bound,
    constancy_scan,
    hessian_spectrum_at_constant,
    plane_wave_onset,
    poincare_constant,
    symbol_eigenvalues,
    weighted_eigenvalue,
)

__all__ = [name for name in dir() if not name.startswith("_")]
