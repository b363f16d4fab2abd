from .codec import deserialize, loads, serialize
from .errors import (
    CalabiLabError,
    CheckpointError,
    ConfigError,
    ContractViolation,
    DegeneratePlane,
    EigenSolverError,
    FitFailure,
    GeodesicFailure,
    InvalidArgument,
    InvalidPotential,
    MonotonicityViolation,
    StepFailure,
    StiffnessFailure,
    UnsupportedOperation,
)
from .surface import ConformalMetric, ScalarField, Surface, SurfaceSpec, TensorField2, Topology
from .operators import (
    gauss_curvature,
    grad_inner,
    grad_norm_sq,
    integrate,
    laplace0,
    laplace_g,
    lichnerowicz,
    lichnerowicz_norm_sq,
)
from .mobius import MobiusMap, mobius_pullback, round_bubble
from .potentials import (
    Potential,
    PotentialPath,
    covariant_derivative,
    flow_curve_tail,
    geodesic_residual,
    poisson_bracket,
    sectional_curvature,
    tangent_norm,
)
from .energy import (
    DecayFit,
    EnergySample,
    calabi_energy,
    fit_exponential_decay,
    gradk_energy,
    liouville_energy,
    mabuchi_energy,
    mabuchi_energy_closed,
    mabuchi_energy_integrated,
)
from .spectral import (
    SpectrumReport,
    convergence_conditions,
    kazdan_warner_floor,
    kazdan_warner_residual,
    lambda_first_band,
    low_spectrum,
)
from .flow import FlowConfig, FlowState, FlowTrace, run, step
from .checkpoint import checkpoint_load, checkpoint_save
from .concentration import ConcentrationReport, area_holder_check, concentration_scan, cutoff
from .geodesic import GeodesicSettings, distance, solve_geodesic, verify_distance_decrease
