"""Cross-entropy user association for two-tier cellular networks.

A single-cell downlink simulator (path loss, SINR, shared-bandwidth rates),
a cross-entropy combinatorial optimizer for the user-association problem,
reference baselines (max-SINR, exhaustive search, dual subgradient), and a
seeded Monte-Carlo benchmark harness with a CLI.
"""

from .assoc import (Association, LoadCaps, UtilitySpec, bs_loads,
                    evaluate_utility, is_feasible, repair_to_caps,
                    score_association, user_rates)
from .baselines import (DualConfig, dual_subgradient_assoc, exhaustive_search,
                        max_sinr_assoc)
from .ce import (BernoulliParams, CEConfig, CERunTrace, SampleStream,
                 ceas_run, elite_log_likelihood, sample_feasible,
                 score_samples, select_elites, smooth_update, update_params)
from .kernels import BACKEND as KERNEL_BACKEND
from .netmodel import (Deployment, LinkGains, PathLossParams, ScenarioConfig,
                       ShadowingParams, compute_link_gains,
                       generate_deployment, path_loss_db)

__version__ = "0.1.0"

__all__ = [
    "Association", "BernoulliParams", "CEConfig", "CERunTrace",
    "Deployment", "DualConfig", "KERNEL_BACKEND", "LinkGains", "LoadCaps",
    "PathLossParams", "SampleStream", "ScenarioConfig", "ShadowingParams",
    "UtilitySpec", "bs_loads", "ceas_run", "compute_link_gains",
    "dual_subgradient_assoc", "elite_log_likelihood", "evaluate_utility",
    "exhaustive_search", "generate_deployment", "is_feasible",
    "max_sinr_assoc", "path_loss_db", "repair_to_caps", "sample_feasible",
    "score_association", "score_samples", "select_elites", "smooth_update",
    "update_params", "user_rates",
]
