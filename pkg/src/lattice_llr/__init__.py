"""Local-linear kernel regression for random fields on rectangular lattices."""

__version__ = "0.1.0"

from ._accel import get_backend, set_backend, use_backend
from .asymptotics import (
    AsymptoticQuantities,
    TrueModel,
    boundary_quantities,
    limit_quantities,
    standardize_error,
)
from .estimator import (
    BandwidthSpec,
    FitFailure,
    LocalFit,
    fit_curve,
    kde,
    local_linear_fit,
    nadaraya_watson,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    noise_to_signal,
    normality_diagnostics,
    run_experiment,
)
from .kernels import KernelSpec, TiltCoefficients, eval_kernel, eval_tilted, kernel_moment
from .lattice import LatticeField, LatticeShape, from_records, read_csv, write_csv
from .simulator import LagSet, ModelSpec, SimProtocol, simulate, simulate_model1, simulate_model2, sweep_field
