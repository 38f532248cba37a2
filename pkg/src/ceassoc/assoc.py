"""Association decisions, feasibility rules, and the network-utility objective.

An association assigns every user to exactly one BS; users sharing a BS
split its bandwidth equally. The objective is the sum over users of a
utility of their achieved rate (logarithmic by default, which rewards
load balancing).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .errors import ConfigError, ContractError, EvaluationError

if TYPE_CHECKING:
    from .netmodel import LinkGains


@dataclass(frozen=True)
class UtilitySpec:
    """Per-user utility applied to rates after dividing by rate_unit_scale
    (Mbps by default). Logarithmic utility requires positive rates."""

    kind: str = "logarithmic"
    rate_unit_scale: float = 1.0e6
    log_base: float = math.e

    def __post_init__(self):
        if self.kind not in ("logarithmic", "identity"):
            raise ConfigError(f"unknown utility kind {self.kind!r}")
        if self.rate_unit_scale <= 0:
            raise ConfigError("rate_unit_scale must be positive")
        if self.kind == "logarithmic" and self.log_base <= 1.0:
            raise ConfigError("log_base must exceed 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "rate_unit_scale": self.rate_unit_scale,
                "log_base": self.log_base}


class Association:
    """One BS per user, stored in assign form: assign[i] is user i's BS.

    The flattened binary vector view (length I*J, index n = i*J + j) is
    derived on demand.
    """

    __slots__ = ("assign", "n_bs")

    def __init__(self, assign, n_bs: int):
        a = np.asarray(assign, dtype=np.int64)
        if a.ndim != 1:
            raise ContractError("assign must be one-dimensional")
        if n_bs <= 0:
            raise ContractError("n_bs must be positive")
        if a.size and (a.min() < 0 or a.max() >= n_bs):
            raise ContractError(f"assign entries must lie in [0, {n_bs})")
        a.setflags(write=False)
        object.__setattr__(self, "assign", a)
        object.__setattr__(self, "n_bs", int(n_bs))

    def __setattr__(self, name, value):
        raise AttributeError("Association is immutable")

    @property
    def n_users(self) -> int:
        return int(self.assign.shape[0])

    def one_hot(self) -> np.ndarray:
        """(I, J) binary matrix with one-hot rows."""
        x = np.zeros((self.n_users, self.n_bs), dtype=np.int64)
        if self.n_users:
            x[np.arange(self.n_users), self.assign] = 1
        return x

    def flat(self) -> np.ndarray:
        """Length I*J binary vector, index n = i * J + j."""
        return self.one_hot().reshape(-1)

    def to_json(self) -> str:
        return json.dumps(self.assign.tolist())

    @classmethod
    def from_json(cls, text: str, n_bs: int) -> "Association":
        return cls(json.loads(text), n_bs)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Association) and self.n_bs == other.n_bs
                and np.array_equal(self.assign, other.assign))

    def __repr__(self) -> str:
        return f"Association({self.assign.tolist()}, n_bs={self.n_bs})"


@dataclass(frozen=True)
class LoadCaps:
    """Per-BS load upper bounds."""

    cap: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cap, dtype=np.int64)
        if c.ndim != 1:
            raise ContractError("cap must be one-dimensional")
        if c.size and c.min() < 0:
            raise ContractError("caps must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "cap", c)

    @property
    def n_bs(self) -> int:
        return int(self.cap.shape[0])

    @classmethod
    def inactive(cls, n_users: int, n_bs: int) -> "LoadCaps":
        """Caps that can never bind (every BS may hold all users)."""
        return cls(np.full(n_bs, n_users, dtype=np.int64))

    @classmethod
    def for_users(cls, cap, n_users: int) -> "LoadCaps":
        """Construct and verify that a feasible association exists."""
        caps = cls(np.asarray(cap, dtype=np.int64))
        caps.ensure_feasible(n_users)
        return caps

    def ensure_feasible(self, n_users: int) -> None:
        total = int(self.cap.sum())
        if total < n_users:
            raise ContractError(
                f"total capacity {total} cannot host {n_users} users")


def bs_loads(a: Association) -> np.ndarray:
    """Number of users on each BS; sums to the user count."""
    return np.bincount(a.assign, minlength=a.n_bs).astype(np.int64)


def is_feasible(a: Association, caps: LoadCaps) -> bool:
    """True iff every BS load is within its cap (one BS per user holds by
    construction of Association)."""
    if caps.n_bs != a.n_bs:
        raise ContractError(
            f"caps dimension {caps.n_bs} does not match n_bs {a.n_bs}")
    return bool(np.all(bs_loads(a) <= caps.cap))


def user_rates(a: Association, g: "LinkGains") -> np.ndarray:
    """Achieved rate per user in bit/s: the chosen link's full rate divided
    by the number of users sharing that BS."""
    if g.n_users != a.n_users or g.n_bs != a.n_bs:
        raise ContractError("association and gains dimensions do not match")
    if a.n_users == 0:
        return np.zeros(0)
    loads = bs_loads(a)
    return g.full_rate[np.arange(a.n_users), a.assign] / loads[a.assign]


def evaluate_utility(a: Association, g: "LinkGains", spec: UtilitySpec) -> float:
    """Total network utility sum_i U(rate_i / rate_unit_scale).

    Raises EvaluationError (naming the first offending user) when a rate is
    non-positive under logarithmic utility; the optimizer's scoring path uses
    score_association instead, which maps that case to -inf.
    """
    vals = user_rates(a, g) / spec.rate_unit_scale
    if spec.kind == "identity":
        return float(np.sum(vals))
    bad = np.flatnonzero(vals <= 0.0)
    if bad.size:
        raise EvaluationError(
            f"user {int(bad[0])} has non-positive rate under logarithmic utility")
    return float(np.sum(np.log(vals)) / math.log(spec.log_base))


def score_association(a: Association, g: "LinkGains", spec: UtilitySpec) -> float:
    """evaluate_utility with the total-scoring convention: a zero rate under
    logarithmic utility scores -inf instead of raising."""
    vals = user_rates(a, g) / spec.rate_unit_scale
    if spec.kind == "identity":
        return float(np.sum(vals))
    if np.any(vals <= 0.0):
        return float("-inf")
    return float(np.sum(np.log(vals)) / math.log(spec.log_base))


def repair_to_caps(assign: np.ndarray, pref: np.ndarray, caps: LoadCaps) -> np.ndarray:
    """Deterministically fix cap violations by moving users off over-cap BSs.

    Delegates to the active kernel backend: from each over-cap BS (ascending
    index), the user with the lowest preference for it moves to the
    spare-capacity BS they prefer most. `pref` is an (I, J) preference
    matrix, e.g. the sampler's Bernoulli parameters or an SINR matrix.
    """
    from . import kernels

    assign = np.asarray(assign, dtype=np.int64)
    caps.ensure_feasible(assign.shape[0])
    return kernels.repair_capacity(assign, np.asarray(pref, dtype=np.float64),
                                   caps.cap)


def utility_kernel_inputs(g: "LinkGains", spec: UtilitySpec,
                          out_value: Optional[np.ndarray] = None):
    """Precompute the per-link value matrix consumed by the scoring kernels.

    For logarithmic utility the kernel evaluates
      sum_i value[i, a_i] - load_log_scale * sum_j L_j * ln(L_j)
    with value = log(full_rate / scale) in the configured base (-inf where
    the full rate is zero), which equals the objective exactly up to
    floating-point regrouping. For identity utility the kernel evaluates
      sum_i value[i, a_i] / L_{a_i}  with value = full_rate / scale.
    """
    scaled = g.full_rate / spec.rate_unit_scale
    if spec.kind == "identity":
        return scaled, 1, 0.0
    with np.errstate(divide="ignore"):
        value = np.log(scaled, out=out_value)
    inv_ln_base = 1.0 / math.log(spec.log_base)
    if inv_ln_base != 1.0:
        value *= inv_ln_base
    return value, 0, inv_ln_base
