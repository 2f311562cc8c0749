"""Wavenumber-domain channel synthesis and joint graph-cut estimation for
multi-user holographic MIMO.

The library is organized bottom-up: ``lattice`` builds the propagating
harmonic index set and the sparse basis, ``channel`` synthesizes clustered
ground-truth channels from von Mises-Fisher scatterers, ``mincut`` solves
the exact binary MAP labeling, ``estimators`` implements the joint
graph-cut estimator and its baselines, and ``harness`` runs reproducible
Monte-Carlo campaigns behind the ``hmimo-jgc`` CLI.
"""

from .channel import (
    ClusterSpec,
    QuadratureError,
    QuadratureGrid,
    ScatteringScenario,
    UserChannel,
    VarianceMap,
    apply_activity_floor,
    cluster_cell_masses,
    common_support,
    draw_scenario,
    sample_channels,
    variance_map,
    variance_maps,
    vmf_density,
)
from .estimators import (
    EstimationResult,
    EstimatorConfig,
    MeasurementSet,
    gcse,
    generate_measurements,
    jgc_ce,
    merge_and_label,
    nmse,
    residual_scores,
    select_candidates,
    trim_ls,
    vote_common,
    wd_omp,
)
from .harness import (
    CampaignConfig,
    ConfigError,
    GeometryConfig,
    ScenarioConfig,
    derive_seed,
    load_config,
    read_results,
    run_campaign,
    summarize,
    write_results,
)
from .lattice import (
    ArrayGeometry,
    GeometryError,
    SparseBasis,
    WavenumberLattice,
    build_basis,
    build_lattice,
    spatial_channel,
)
from .mincut import Labeling, SupportGraph, energy, minimize

__version__ = "0.1.0"
