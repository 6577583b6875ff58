"""Conductive media on periodic networks of the flat torus: exact effective
conductance tensors, homotopy-lattice classification, stationarity analysis
and fluctuation-driven adaptation."""

from .core import (
    BadTrace,
    Edge,
    Mode,
    NetworkMedium,
    NotPSD,
    NotRealizable,
    PeriodicNetwork,
    ProjectionMixture,
    TorusPoint,
    ZeroMatrix,
    kernel_basis,
    mass_tensor,
    realizable_dimension,
    realize_as_mixture,
)
from .topology import (
    Classification,
    CycleLattice,
    DimensionUnsupported,
    classify,
    components,
    cycle_lattice,
    hermite_normal_form,
    planarize,
)
from .cellsolver import (
    BudgetExceeded,
    EffectiveTensor,
    HomogenizationTrace,
    SolveFailure,
    effective_bilinear,
    effective_tensor,
    homogenize_window,
    subdivide,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
