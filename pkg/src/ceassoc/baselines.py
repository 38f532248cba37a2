"""Reference association methods: max-SINR, exhaustive search, and a
price-based (dual subgradient) heuristic.

The dual method is a reconstruction of the classic relaxation approach for
the equal-sharing log-utility objective: per-BS prices steer a per-user
argmax rule, and each price moves by a subgradient step toward its
closed-form target load exp(mu - 1). Its outcome depends visibly on the
step size, which is the point of including it as a baseline.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .assoc import Association, LoadCaps, UtilitySpec, utility_kernel_inputs
from .errors import ContractError, EnumerationBudgetError, EvaluationError
from .netmodel import LinkGains

ENUMERATION_BUDGET = 10_000_000
_CHUNK = 8192


@dataclass(frozen=True)
class DualConfig:
    step_size: float = 0.1
    n_iterations: int = 200
    init_price: float = 0.0

    def __post_init__(self):
        if self.step_size < 0:
            raise ContractError("step_size must be non-negative")
        if self.n_iterations <= 0:
            raise ContractError("n_iterations must be positive")


def max_sinr_assoc(gains: LinkGains) -> Association:
    """Assign every user to its highest-SINR BS (ties to the lowest index).
    Load caps are intentionally ignored; see repair_to_caps for the capped
    comparison variant."""
    return Association(np.argmax(gains.sinr, axis=1), gains.n_bs)


def _decode_block(start: int, stop: int, n_users: int, n_bs: int) -> np.ndarray:
    """Assignments for enumeration indices [start, stop); index order is
    lexicographic in the assign tuple (user 0 most significant)."""
    ks = np.arange(start, stop, dtype=np.int64)
    out = np.empty((ks.shape[0], n_users), dtype=np.int64)
    for i in range(n_users):
        out[:, i] = (ks // (n_bs ** (n_users - 1 - i))) % n_bs
    return out


def exhaustive_search(gains: LinkGains, caps: LoadCaps, utility: UtilitySpec,
                      budget: int = ENUMERATION_BUDGET) -> tuple[Association, float]:
    """Enumerate all J**I one-hot associations and return the feasible
    maximizer (ties to the lexicographically smallest assign vector).

    Refuses instances where J**I exceeds `budget`.
    """
    n_users, n_bs = gains.n_users, gains.n_bs
    if caps.n_bs != n_bs:
        raise ContractError("caps and gains disagree on the BS count")
    total = n_bs ** n_users
    if total > budget:
        raise EnumerationBudgetError(
            f"J**I = {total} candidates exceed the enumeration budget {budget}")
    caps.ensure_feasible(n_users)

    value, metric, load_log_scale = utility_kernel_inputs(gains, utility)
    best_score = float("-inf")
    best_assign = None
    for start in range(0, total, _CHUNK):
        block = _decode_block(start, min(start + _CHUNK, total), n_users, n_bs)
        loads = kernels.batch_loads(block, n_bs)
        feasible = np.flatnonzero((loads <= caps.cap[None, :]).all(axis=1))
        if feasible.size == 0:
            continue
        scores = kernels.score_assignments(
            block[feasible], value, metric, load_log_scale)
        k = int(np.argmax(scores))  # first maximum: lexicographically smallest
        if best_assign is None or scores[k] > best_score:
            best_score = float(scores[k])
            best_assign = block[feasible[k]].copy()
    if best_assign is None:
        raise ContractError("no feasible association exists under the caps")
    return Association(best_assign, n_bs), best_score


def dual_subgradient_assoc(gains: LinkGains, utility: UtilitySpec,
                           cfg: DualConfig) -> tuple[Association, np.ndarray]:
    """Price-based association for the log-utility objective.

    Iterates: every user picks argmax_j [ln(full_rate_ij / scale) - mu_j];
    every price moves by step * (realized load - exp(mu - 1)). Returns the
    association induced by the final prices together with the price
    trajectory (n_iterations + 1 rows, initial prices first).
    """
    if utility.kind != "logarithmic":
        raise ContractError("the dual baseline is defined for logarithmic utility")
    n_users, n_bs = gains.n_users, gains.n_bs
    with np.errstate(divide="ignore"):
        log_rate = np.log(gains.full_rate / utility.rate_unit_scale)
    dead = np.all(np.isneginf(log_rate), axis=1)
    if dead.any():
        raise EvaluationError(
            f"user {int(np.flatnonzero(dead)[0])} has zero rate on every BS")

    mu = np.full(n_bs, float(cfg.init_price))
    trajectory = np.empty((cfg.n_iterations + 1, n_bs))
    trajectory[0] = mu
    for k in range(cfg.n_iterations):
        assign = np.argmax(log_rate - mu[None, :], axis=1)
        loads = np.bincount(assign, minlength=n_bs)
        mu = mu + cfg.step_size * (loads - np.exp(mu - 1.0))
        trajectory[k + 1] = mu
    final = np.argmax(log_rate - mu[None, :], axis=1)
    return Association(final, n_bs), trajectory
