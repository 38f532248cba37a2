"""Cross-entropy search over constrained binary assignments.

The engine keeps a Bernoulli probability vector over the flattened
assignment bits, samples feasible candidate associations from it, scores
them, and refits the vector to the highest-scoring candidates (the elite
columnwise mean, blended with the previous vector by a smoothing factor).
Sampling and scoring run on the active kernel backend; every candidate
draws from its own counter-derived substream, so runs are reproducible
for a given seed no matter how the work is scheduled.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .assoc import Association, LoadCaps, UtilitySpec, utility_kernel_inputs
from .errors import ContractError
from .netmodel import LinkGains


@dataclass(frozen=True)
class CEConfig:
    """Engine parameters. Defaults follow the benchmark setup: 500 samples,
    10 elites, 20 iterations, smoothing 0.7."""

    n_samples: int = 500
    n_elites: int = 10
    n_iterations: int = 20
    smoothing_alpha: float = 0.7
    max_row_resamples: int = 20
    max_vector_resamples: int = 100
    seed: int = 0
    stop_after_stagnant: Optional[int] = None  # optional early stop, off by default
    record_params: bool = False
    warm_start: None = None  # reserved; warm-starting is not implemented

    def __post_init__(self):
        if self.n_samples <= 0 or self.n_iterations <= 0:
            raise ContractError("n_samples and n_iterations must be positive")
        if not 0 < self.n_elites <= self.n_samples:
            raise ContractError("need 0 < n_elites <= n_samples")
        if not 0.0 <= self.smoothing_alpha <= 1.0:
            raise ContractError("smoothing_alpha must lie in [0, 1]")
        if self.max_row_resamples <= 0 or self.max_vector_resamples <= 0:
            raise ContractError("resample budgets must be positive")
        if self.stop_after_stagnant is not None and self.stop_after_stagnant <= 0:
            raise ContractError("stop_after_stagnant must be positive when set")
        if self.warm_start is not None:
            raise ContractError("warm_start is reserved and must be None")


class BernoulliParams:
    """Success probabilities of the flattened assignment bits
    (length I*J, index n = i*J + j)."""

    __slots__ = ("u", "n_users", "n_bs")

    def __init__(self, u, n_users: int, n_bs: int):
        arr = np.asarray(u, dtype=np.float64)
        if arr.shape != (n_users * n_bs,):
            raise ContractError(
                f"expected {n_users * n_bs} parameters, got shape {arr.shape}")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ContractError("Bernoulli parameters must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "u", arr)
        object.__setattr__(self, "n_users", int(n_users))
        object.__setattr__(self, "n_bs", int(n_bs))

    def __setattr__(self, name, value):
        raise AttributeError("BernoulliParams is immutable")

    @classmethod
    def uniform(cls, n_users: int, n_bs: int) -> "BernoulliParams":
        """The no-prior-information start: probability 1/2 everywhere."""
        return cls(np.full(n_users * n_bs, 0.5), n_users, n_bs)

    def matrix(self) -> np.ndarray:
        return self.u.reshape(self.n_users, self.n_bs)


@dataclass(frozen=True)
class SampleStream:
    """Coordinates of one candidate's random substream."""

    seed: int
    iteration: int = 0
    index: int = 0


@dataclass
class IterationStats:
    iteration: int
    best_score: float
    elite_mean_score: float
    mean_score: float
    params_snapshot: Optional[np.ndarray] = None


@dataclass
class CERunTrace:
    """Per-iteration bookkeeping plus the best feasible sample ever seen."""

    per_iteration: list = field(default_factory=list)
    incumbent: Optional[Association] = None
    incumbent_score: float = float("-inf")
    final_iteration_best: Optional[Association] = None
    final_iteration_best_score: float = float("-inf")

    @property
    def iterations_run(self) -> int:
        return len(self.per_iteration)

    def best_score_curve(self) -> np.ndarray:
        return np.array([s.best_score for s in self.per_iteration])

    def incumbent_curve(self) -> np.ndarray:
        """Running maximum of the per-iteration best scores."""
        return np.maximum.accumulate(self.best_score_curve())

    def to_jsonl(self) -> str:
        import json

        lines = [
            json.dumps({"t": s.iteration, "best_score": s.best_score,
                        "elite_mean_score": s.elite_mean_score,
                        "mean_score": s.mean_score})
            for s in self.per_iteration
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def sample_feasible(params: BernoulliParams, caps: LoadCaps,
                    stream: SampleStream, max_row_resamples: int = 20,
                    max_vector_resamples: int = 100) -> Association:
    """Draw one feasible association from the Bernoulli model.

    Per-user rows are drawn as independent bits and rejected until one-hot
    (falling back to a categorical draw over the normalized row); whole
    vectors violating the caps are rejected and finally repaired.
    """
    if caps.n_bs != params.n_bs:
        raise ContractError("caps and params disagree on the BS count")
    caps.ensure_feasible(params.n_users)
    rows = kernels.sample_assignments(
        params.matrix(), caps.cap, stream.seed, stream.iteration,
        stream.index, 1, max_row_resamples, max_vector_resamples)
    return Association(rows[0], params.n_bs)


def _as_matrix(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return np.asarray(samples, dtype=np.int64)
    return np.array([s.assign for s in samples], dtype=np.int64)


def score_samples(samples, gains: LinkGains, utility: UtilitySpec) -> np.ndarray:
    """Objective value of each sample, order preserved. Zero-rate links under
    logarithmic utility score -inf (the sampler never needs to abort)."""
    mat = _as_matrix(samples)
    value, metric, load_log_scale = utility_kernel_inputs(gains, utility)
    return kernels.score_assignments(mat, value, metric, load_log_scale)


def select_elites(samples, scores: np.ndarray, n_elites: int):
    """The n_elites highest-scoring samples, descending, ties broken by the
    lower sample index. Returns (elite_matrix, elite_scores, elite_indices)."""
    mat = _as_matrix(samples)
    scores = np.asarray(scores, dtype=np.float64)
    if n_elites > scores.shape[0]:
        raise ContractError("n_elites exceeds the sample count")
    order = np.argsort(-scores, kind="stable")
    idx = order[:n_elites]
    return mat[idx], scores[idx], idx


def update_params(elites, n_bs: Optional[int] = None) -> BernoulliParams:
    """Closed-form refit: each bit's probability becomes its mean over the
    elite set."""
    if isinstance(elites, np.ndarray):
        if n_bs is None:
            raise ContractError("n_bs is required for raw elite matrices")
        mat = np.asarray(elites, dtype=np.int64)
    else:
        elites = list(elites)
        if not elites:
            raise ContractError("elite set must not be empty")
        if n_bs is None:
            n_bs = elites[0].n_bs
        mat = _as_matrix(elites)
    if mat.shape[0] == 0:
        raise ContractError("elite set must not be empty")
    v2d = (mat[:, :, None] == np.arange(n_bs)).mean(axis=0)
    return BernoulliParams(v2d.reshape(-1), mat.shape[1], n_bs)


def elite_log_likelihood(elites, params: BernoulliParams,
                         n_samples: int) -> float:
    """Sample-averaged log-likelihood of the elite set under the Bernoulli
    model: (1/n_samples) * sum over elites of ln p(x; u).

    Conventions: a bit agreeing with a saturated parameter contributes 0;
    a bit contradicting one yields -inf. n_samples is the size of the pool
    the elites were selected from (the average is over the full pool size,
    a constant that keeps the value comparable across iterations).
    """
    if n_samples <= 0:
        raise ContractError("n_samples must be positive")
    mat = _as_matrix(elites)
    if mat.shape[0] == 0:
        raise ContractError("elite set must not be empty")
    x = (mat[:, :, None] == np.arange(params.n_bs)).reshape(mat.shape[0], -1)
    with np.errstate(divide="ignore"):
        ln_u = np.log(params.u)
        ln_not_u = np.log1p(-params.u)
    terms = np.where(x, ln_u[None, :], ln_not_u[None, :])
    return float(terms.sum() / n_samples)


def smooth_update(prev: BernoulliParams, v: BernoulliParams,
                  alpha: float) -> BernoulliParams:
    """Convex blend alpha * v + (1 - alpha) * prev, elementwise."""
    if (prev.n_users, prev.n_bs) != (v.n_users, v.n_bs):
        raise ContractError("parameter vectors have mismatched dimensions")
    if not 0.0 <= alpha <= 1.0:
        raise ContractError("alpha must lie in [0, 1]")
    blended = np.clip(alpha * v.u + (1.0 - alpha) * prev.u, 0.0, 1.0)
    return BernoulliParams(blended, prev.n_users, prev.n_bs)


def ceas_run(gains: LinkGains, caps: LoadCaps, utility: UtilitySpec,
             cfg: CEConfig) -> tuple[Association, CERunTrace]:
    """Run the full sample / score / select / refit / smooth loop.

    Returns the incumbent (best feasible sample over all iterations, which
    dominates the final iteration's top sample) and the trace; the final
    iteration's top sample is also recorded on the trace. Deterministic in
    (gains, caps, utility, cfg.seed).
    """
    n_users, n_bs = gains.n_users, gains.n_bs
    if caps.n_bs != n_bs:
        raise ContractError("caps and gains disagree on the BS count")
    caps.ensure_feasible(n_users)

    value, metric, load_log_scale = utility_kernel_inputs(gains, utility)
    u2d = np.full((n_users, n_bs), 0.5)
    trace = CERunTrace()
    incumbent: Optional[np.ndarray] = None
    incumbent_score = float("-inf")
    stagnant = 0

    for t in range(cfg.n_iterations):
        samples = kernels.sample_assignments(
            u2d, caps.cap, cfg.seed, t, 0, cfg.n_samples,
            cfg.max_row_resamples, cfg.max_vector_resamples)
        scores = kernels.score_assignments(samples, value, metric, load_log_scale)
        order = np.argsort(-scores, kind="stable")
        elite_idx = order[:cfg.n_elites]
        top = int(order[0])

        if scores[top] > incumbent_score:
            incumbent = samples[top].copy()
            incumbent_score = float(scores[top])
            stagnant = 0
        else:
            stagnant += 1

        v2d = (samples[elite_idx][:, :, None] == np.arange(n_bs)).mean(axis=0)
        u2d = np.clip(cfg.smoothing_alpha * v2d
                      + (1.0 - cfg.smoothing_alpha) * u2d, 0.0, 1.0)

        trace.per_iteration.append(IterationStats(
            iteration=t,
            best_score=float(scores[top]),
            elite_mean_score=float(np.mean(scores[elite_idx])),
            mean_score=float(np.mean(scores)),
            params_snapshot=u2d.reshape(-1).copy() if cfg.record_params else None,
        ))
        trace.final_iteration_best = Association(samples[top], n_bs)
        trace.final_iteration_best_score = float(scores[top])

        if (cfg.stop_after_stagnant is not None
                and stagnant >= cfg.stop_after_stagnant):
            break

    best = Association(incumbent, n_bs)
    trace.incumbent = best
    trace.incumbent_score = incumbent_score
    return best, trace
