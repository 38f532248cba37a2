"""NumPy implementation of the sampling/scoring kernels.

This is the fallback backend and the behavioral reference for the compiled
extension: both consume the same counter-based uniforms (see rng.py), so
sampled assignments are identical integer-for-integer across backends, and
scores agree to floating-point reassociation (reductions are written as
cumulative sums so the evaluation order matches the C loops).

Sampling scheme per candidate vector:
  * each user row draws independent Bernoulli bits from its parameter row,
    rejecting non-one-hot rows up to max_row_resamples, then falls back to
    a categorical draw over the normalized row (uniform if the row is all
    zero);
  * whole vectors violating the per-BS caps are rejected up to
    max_vector_resamples, after which the last draw is repaired
    deterministically (see repair_capacity).
"""

import numpy as np

from .errors import ContractError
from .rng import DOMAIN_SAMPLE, fold_array, fold_chain, u01_array

BACKEND_NAME = "python"


def batch_loads(assign: np.ndarray, n_bs: int) -> np.ndarray:
    """Per-BS load counts for a (n, I) batch of assignments."""
    n, n_users = assign.shape
    if n_users == 0:
        return np.zeros((n, n_bs), dtype=np.int64)
    offsets = assign + (np.arange(n, dtype=np.int64) * n_bs)[:, None]
    return np.bincount(offsets.ravel(), minlength=n * n_bs).reshape(n, n_bs)


def repair_capacity(assign: np.ndarray, pref: np.ndarray, cap: np.ndarray) -> np.ndarray:
    """Move users off over-cap BSs until every cap holds.

    From each over-cap BS (ascending index), the user with the lowest
    preference for it (ties to the lowest user index) moves to the
    spare-capacity BS they prefer most (ties to the lowest BS index).
    """
    out = np.array(assign, dtype=np.int64, copy=True)
    n_bs = cap.shape[0]
    loads = np.bincount(out, minlength=n_bs)
    for j in range(n_bs):
        while loads[j] > cap[j]:
            members = np.flatnonzero(out == j)
            mover = members[np.argmin(pref[members, j])]
            open_bs = np.flatnonzero(loads < cap)
            target = open_bs[np.argmax(pref[mover, open_bs])]
            out[mover] = target
            loads[j] -= 1
            loads[target] += 1
    return out


def _draw_rows(vec_keys: np.ndarray, u2d: np.ndarray, cum: np.ndarray,
               max_row_resamples: int) -> np.ndarray:
    """Draw one-hot rows for every (candidate, user) pair.

    vec_keys are the per-candidate stream keys already folded down to the
    vector-attempt level; attempt r consumes coordinates (key, user, r, bit).
    """
    m = vec_keys.shape[0]
    n_users, n_bs = u2d.shape
    assign = np.full((m, n_users), -1, dtype=np.int64)
    if n_users == 0 or m == 0:
        return assign

    bs_words = np.arange(n_bs, dtype=np.uint64)
    und_keys = fold_array(vec_keys[:, None],
                          np.arange(n_users, dtype=np.uint64)[None, :]).ravel()
    und_cand = np.repeat(np.arange(m), n_users)
    und_user = np.tile(np.arange(n_users), m)

    for r in range(max_row_resamples):
        attempt_keys = fold_array(und_keys, r)
        bit_keys = fold_array(attempt_keys[:, None], bs_words[None, :])
        bits = u01_array(bit_keys) < u2d[und_user]
        one_hot = bits.sum(axis=1) == 1
        if one_hot.any():
            assign[und_cand[one_hot], und_user[one_hot]] = np.argmax(
                bits[one_hot], axis=1)
            keep = ~one_hot
            und_keys = und_keys[keep]
            und_cand = und_cand[keep]
            und_user = und_user[keep]
        if und_keys.size == 0:
            return assign

    # Categorical fallback: attempt slot max_row_resamples, bit slot 0.
    fb_keys = fold_array(fold_array(und_keys, max_row_resamples), 0)
    x = u01_array(fb_keys)
    crow = cum[und_user]
    totals = crow[:, -1]
    chosen = np.empty(und_keys.shape[0], dtype=np.int64)
    positive = totals > 0.0
    if positive.any():
        above = crow[positive] > (x[positive] * totals[positive])[:, None]
        j = np.where(above.any(axis=1), above.argmax(axis=1), n_bs - 1)
        chosen[positive] = j
    if (~positive).any():
        chosen[~positive] = np.minimum(
            (x[~positive] * n_bs).astype(np.int64), n_bs - 1)
    assign[und_cand, und_user] = chosen
    return assign


def sample_assignments(u2d: np.ndarray, cap: np.ndarray, seed: int,
                       iteration: int, sample_offset: int, n_samples: int,
                       max_row_resamples: int, max_vector_resamples: int) -> np.ndarray:
    """Draw n_samples feasible assignments from the Bernoulli model.

    Deterministic in (u2d, cap, seed, iteration, sample_offset + k) for the
    k-th returned row, independent of batch splits.
    """
    u2d = np.ascontiguousarray(u2d, dtype=np.float64)
    n_users, n_bs = u2d.shape
    cap = np.asarray(cap, dtype=np.int64)
    if cap.shape != (n_bs,):
        raise ContractError("cap length must equal the BS count")
    if int(cap.sum()) < n_users:
        raise ContractError(
            f"total capacity {int(cap.sum())} cannot host {n_users} users")

    # Sequential partial sums so the compiled backend can reproduce the
    # categorical thresholds exactly.
    cum = np.cumsum(u2d, axis=1) if n_bs else np.zeros((n_users, 0))

    base = fold_chain(seed, DOMAIN_SAMPLE, iteration)
    sample_keys = fold_array(
        np.uint64(base),
        np.arange(sample_offset, sample_offset + n_samples, dtype=np.uint64))

    out = np.empty((n_samples, n_users), dtype=np.int64)
    last = np.empty((n_samples, n_users), dtype=np.int64)
    pending = np.arange(n_samples)
    for v in range(max_vector_resamples):
        vec_keys = fold_array(sample_keys[pending], v)
        drawn = _draw_rows(vec_keys, u2d, cum, max_row_resamples)
        loads = batch_loads(drawn, n_bs)
        ok = (loads <= cap[None, :]).all(axis=1)
        out[pending[ok]] = drawn[ok]
        last[pending] = drawn
        pending = pending[~ok]
        if pending.size == 0:
            break
    for idx in pending:
        out[idx] = repair_capacity(last[idx], u2d, cap)
    return out


def score_assignments(assign: np.ndarray, value: np.ndarray, metric: int,
                      load_log_scale: float) -> np.ndarray:
    """Objective values for a (n, I) batch of assignments.

    metric 0 (logarithmic): sum_i value[i, a_i] - scale * sum_j L_j ln L_j,
    where value is the per-link log-rate matrix (-inf marks zero-rate links,
    which propagates to a -inf score). metric 1 (identity): per-user shares
    sum_i value[i, a_i] / L_{a_i}.
    """
    assign = np.asarray(assign, dtype=np.int64)
    n, n_users = assign.shape
    n_bs = value.shape[1]
    if value.shape[0] != n_users:
        raise ContractError("value matrix and assignments disagree on user count")
    if n_users == 0:
        return np.zeros(n)
    loads = batch_loads(assign, n_bs)
    picked = value[np.arange(n_users)[None, :], assign]
    if metric == 0:
        link_sum = np.cumsum(picked, axis=1)[:, -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            load_term = np.where(loads > 0, loads * np.log(loads), 0.0)
        return link_sum - load_log_scale * np.cumsum(load_term, axis=1)[:, -1]
    shares = picked / loads[np.arange(n)[:, None], assign]
    return np.cumsum(shares, axis=1)[:, -1]
