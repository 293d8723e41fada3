"""Control barrier corridors: safe goal sets, filtered controllers, and a
scenario-driven simulator for fully actuated, unicycle, and linear
output-regulated systems."""

from .barriers import (
    AffineBarrier,
    BarrierFamily,
    GoalControlBarrier,
    PowerDistanceBarrier,
    ProductBarrier,
    ShiftedBarrier,
    SoftMinBarrier,
    power_convexity_tag,
    product_compose,
    shift_epsilon,
    softmin_compose,
)
from .control import (
    LinearPlant,
    UnicyclePose,
    output_regulation_control,
    output_regulation_gains,
    proportional_control,
    qp_filter_2d,
    safe_unicycle_velocity,
    scalar_qp,
    unicycle_reference_control,
    wrap_angle,
)
from .corridor import (
    CorridorParams,
    bc_full,
    bc_lor,
    bc_uni,
    output_current_barriers,
    output_goal_barriers,
    spectral_norm,
    trust_region_contains,
)
from .geom import (
    Corridor,
    Halfspace,
    Polygon,
    clip_corridor_2d,
    default_bbox,
    sample_corridor,
)
from .pathfollow import ExploreConfig, ExplorationLog, Path, explore, follow_path, select_path_goal
from .sim import Sample, StepDecision, Trajectory, rk4_step, run_closed_loop
from .world import (
    ClearanceField,
    LidarScan,
    OccupancyGrid,
    distance_transform,
    dump_world,
    frontier_cells,
    lidar_scan,
    load_world,
    plan_path,
    select_frontier,
    update_map,
)

__version__ = "0.1.0"
