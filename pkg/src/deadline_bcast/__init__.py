"""Hard-deadline scheduling and outage analysis for two-user erasure broadcast channels."""

__version__ = "0.1.0"

from .channel import (  # noqa: E402
    BlockStats,
    DeadlineConfig,
    ErasurePattern,
    ErasureProbs,
    block_stats,
    enumerate_block_configs,
    enumerate_patterns,
    pattern_probability,
    sample_pattern,
)
from .cutset import (  # noqa: E402
    block_capacities,
    equivalent_feasible,
    is_feasible,
    region_boundary,
    region_coefficients,
)
from .errors import ConfigError, GuardError, OracleMismatchError  # noqa: E402
from .outage import (  # noqa: E402
    CostToGoTable,
    OutageResult,
    brute_force_outage,
    build_cost_table,
    exact_outage,
    monte_carlo_outage,
    rate_solver,
)
from .schedulers import (  # noqa: E402
    CsiMode,
    FrameOutcome,
    current_csi_policy,
    greedy_full_csi,
    past_csi_policy,
)
