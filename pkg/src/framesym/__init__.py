"""Local symmetry structure of manifolds carrying a global frame.

The pipeline: expressions define a frame; jets differentiate it exactly;
structure functions and curvature derivatives feed kernel computations whose
elements integrate, by transport along an involutive graph distribution, into
local Killing fields; a grid scanner classifies points into orbits and
strata.
"""

from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    DegenerateFrame,
    DimensionMismatch,
    DomainError,
    DomainExit,
    FrameSymError,
    GeneratorResidualWarning,
    InsufficientSamples,
    OrderOverflow,
    OrderUnderflow,
    ParseError,
    PreconditionViolated,
    StabilizationNotFound,
    UnknownIdentifier,
)
from .expressions import differentiate, eval_jet, evaluate, parse, pretty
from .filtration import (
    HomogeneityReport,
    KillingFiltration,
    ProbeResult,
    contract,
    contraction_matrix,
    generator_residual,
    homogeneity_report,
    integrability_probe,
    killing_dims,
    killing_spaces,
)
from .frames import (
    DerivedCurvature,
    FrameSpec,
    StructureTensor,
    curvature,
    derived_curvature,
    structure_functions,
    structure_values,
)
from .jets import Jet, jet_add, jet_compose, jet_constant, jet_mul, jet_partial
from .orbits import OrbitAtlas, classify_orbits, export, scan_grid, stratify
from .transport import (
    FlowPath,
    SampledKillingField,
    TransportPath,
    direction_lattice,
    flow,
    killing_field,
    transport_generator,
    verify_killing,
    verify_transport_invariance,
    verify_transport_ode,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
