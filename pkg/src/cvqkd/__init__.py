"""Four-state discretely-modulated CV-QKD simulation and analysis toolkit."""

from .params import ProtocolParams, ChannelScenario, SkrReport
from .entropy import g_entropy, symplectic_eigenvalues, symplectic_eigenvalues_oracle
from .lca import (
    correlation_z4,
    mutual_information_lca,
    holevo_bound_lca,
    skr_lca,
    null_skr_threshold,
)
from .sdp_rate import (
    SdpSolution,
    solve_correlation_sdp,
    holevo_bound_sdp,
    mutual_information_sdp,
    skr_sdp,
    null_skr_threshold_sdp,
)

__version__ = "0.1.0"
