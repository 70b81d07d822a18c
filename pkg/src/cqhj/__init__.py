"""Complex quantum trajectories and interference dynamics of colliding Gaussian wave packets.

The wave function of a superposition of free Gaussians is continued
analytically into the complex plane. The package computes its quantum
momentum function and derived fields, the rotating nodal line, complex and
Polya trajectories, wrapping times, and sampled volumes for isosurface plots.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F403
from .wavefield import (  # noqa: E402
    FieldSample,
    GaussianPacket,
    Superposition,
    complex_action,
    field_sample,
    node_epsilon,
    packet_value,
    probability_density,
    psi_scale,
    pvf,
    sigma_t,
    sigma_tilde,
    qmf,
    qmf_dz,
    quantum_potential,
    superposition_d2z,
    superposition_dz,
    superposition_value,
)
from .nodal import (  # noqa: E402
    CharacteristicPoint,
    ContourSpec,
    NodalLineState,
    NodalTrajectoryLine,
    characteristic_points,
    circulation,
    nodal_angle,
    nodal_line_state,
    nodal_rate,
    nodal_trajectory,
    node_position,
    node_spacing,
    pole_local_div_vort,
    refine_node,
    refine_stagnation,
    stagnation_seed,
    symmetric_params,
    theta_limits,
)
from .trajectory import (  # noqa: E402
    IsochroneResult,
    StagnationExpansion,
    Trajectory,
    approx_trajectory,
    integrate,
    isochrone,
    isochrone_targets,
    winding_number,
    stagnation_expansion,
)
from .metrics import (  # noqa: E402
    EnsembleSummary,
    LifetimeWindow,
    WrappingRecord,
    average_wrapping_time,
    ensemble_wrapping,
    interference_lifetime,
    summarize,
    time_at_angle,
    wrapping_time,
)
from .cave import Axis, CaveGrid, GridSpec, export_volume, read_volume, sample_cave  # noqa: E402
from .scenario import Scenario, load_scenario, parse_scenario, preset  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
