"""Cluster expansion for dilute spin-1/2 Jastrow-Slater trial states on a torus.

The pieces compose in dependency order: scattering solutions set the pair
correlations, momentum-set construction fills the Fermi sea, diagram
enumeration and kernel contraction drive the expansion, and the energy
assembly puts the terms together.  ``oracle`` holds the brute-force route
used to cross-check everything at tiny particle number.
"""

from .errors import CapExceeded, ConfigError, GGRError
from .torus import Torus, GridFunction, periodic_delta, periodic_distance, plane_wave
from .scattering import (
    Potential,
    RadialChannel,
    ScatteringError,
    ScatteringSolution,
    energy_integral,
    g_integrals,
    solve,
    solve_scattering,
)
from .fermi_polyhedron import (
    FermiPolyhedron,
    PolyhedronError,
    UnitPolyhedron,
    build_polyhedron,
    dirichlet_l1,
    free_kinetic_reference,
    kinetic_energy,
    lattice_points,
)
from .diagrams import (
    Diagram,
    GGraph,
    VertexSet,
    decompose,
    dump_diagram,
    enumerate_diagrams,
    enumerate_ggraphs,
    enumerate_ggraphs_graded,
    enumerate_partitions,
    enumerate_trees,
    is_linked,
    parse_diagram,
)
from .evaluation import (
    Kernel,
    KernelSet,
    RadialGFourier,
    b2_value_fourier,
    diagram_value,
    g_kernel,
    gamma1,
    truncated_correlation,
)
from .expansion import (
    Caps,
    ExpansionSeries,
    NormalizationResult,
    TrialStateSpec,
    graded_partial_sums,
    monitor_from_spec,
    normalization_constant,
    reduced_density,
    series_csv,
)
from .energy import (
    EnergyBreakdown,
    assemble,
    b2_series,
    box_extrapolate,
    energy_report,
    leading_energy_density,
    schedule_hint,
    term_11,
    term_20_bound,
)
from .oracle import brute_normalization, brute_reduced_density, slater
from .cli import RunConfig, load_config, parse_config, print_config, run

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
