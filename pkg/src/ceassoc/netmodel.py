"""Network deployments and physical-layer quantities.

Generates single-cell two-tier layouts (one macro BS plus small BSs and
users on a flat disk) and computes per-link path loss, channel gain, SINR,
and full-bandwidth Shannon rates. All functions are pure: identical
(config, seed) inputs give bitwise-identical outputs.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assoc import UtilitySpec
from .errors import ConfigError, GenerationError
from .rng import DOMAIN_SHADOWING, fold_chain

MACRO = "macro"
SMALL = "small"


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    if p_w <= 0:
        raise ValueError("power must be positive to express in dBm")
    return 30.0 + 10.0 * math.log10(p_w)


@dataclass(frozen=True)
class PathLossParams:
    """Log-distance model: PL(d) = intercept + slope * log10(d / 1 km)."""

    intercept_db: float = 128.1
    slope_db_per_decade: float = 37.6


@dataclass(frozen=True)
class ShadowingParams:
    enabled: bool = False
    sigma_db: float = 8.0


@dataclass(frozen=True)
class MinDistances:
    """Placement separation rules; user_bs_m is the clamp applied to
    user-BS distances before path loss (the log model diverges at d -> 0)."""

    mbs_sbs_m: float = 75.0
    sbs_sbs_m: float = 40.0
    user_bs_m: float = 10.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario family: one macro BS at the origin, n_sbs small BSs and
    n_users users uniform on the disk."""

    n_users: int = 30
    n_sbs: int = 3
    cell_radius_m: float = 500.0
    mbs_power_dbm: float = 43.0
    sbs_power_dbm: float = 23.0
    bandwidth_hz: float = 10.0e6
    noise_dbm: float = -104.0
    pathloss: PathLossParams = field(default_factory=PathLossParams)
    shadowing: ShadowingParams = field(default_factory=ShadowingParams)
    min_distances: MinDistances = field(default_factory=MinDistances)
    utility: UtilitySpec = field(default_factory=UtilitySpec)

    def __post_init__(self):
        if self.n_users < 0 or self.n_sbs < 0:
            raise ConfigError("n_users and n_sbs must be non-negative")
        if self.cell_radius_m <= 0:
            raise ConfigError("cell_radius_m must be positive")
        if self.bandwidth_hz <= 0:
            raise ConfigError("bandwidth_hz must be positive")

    @property
    def n_bs(self) -> int:
        return self.n_sbs + 1

    def to_dict(self) -> dict:
        return {
            "n_users": self.n_users,
            "n_sbs": self.n_sbs,
            "cell_radius_m": self.cell_radius_m,
            "mbs_power_dbm": self.mbs_power_dbm,
            "sbs_power_dbm": self.sbs_power_dbm,
            "bandwidth_hz": self.bandwidth_hz,
            "noise_dbm": self.noise_dbm,
            "pathloss": {
                "intercept_db": self.pathloss.intercept_db,
                "slope_db_per_decade": self.pathloss.slope_db_per_decade,
            },
            "shadowing": {
                "enabled": self.shadowing.enabled,
                "sigma_db": self.shadowing.sigma_db,
            },
            "min_distances": {
                "mbs_sbs_m": self.min_distances.mbs_sbs_m,
                "sbs_sbs_m": self.min_distances.sbs_sbs_m,
                "user_bs_m": self.min_distances.user_bs_m,
            },
            "utility": {
                "kind": self.utility.kind,
                "rate_unit_scale": self.utility.rate_unit_scale,
                "log_base": self.utility.log_base,
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        known = {
            "n_users", "n_sbs", "cell_radius_m", "mbs_power_dbm",
            "sbs_power_dbm", "bandwidth_hz", "noise_dbm", "pathloss",
            "shadowing", "min_distances", "utility",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        kwargs = {k: doc[k] for k in known & set(doc)
                  if k not in ("pathloss", "shadowing", "min_distances", "utility")}
        try:
            if "pathloss" in doc:
                kwargs["pathloss"] = PathLossParams(**doc["pathloss"])
            if "shadowing" in doc:
                kwargs["shadowing"] = ShadowingParams(**doc["shadowing"])
            if "min_distances" in doc:
                kwargs["min_distances"] = MinDistances(**doc["min_distances"])
            if "utility" in doc:
                kwargs["utility"] = UtilitySpec(**doc["utility"])
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class BaseStation:
    position: tuple[float, float]
    tx_power_dbm: float
    tier: str  # MACRO or SMALL


@dataclass(frozen=True)
class Deployment:
    """One realized drop: BS and user geometry plus everything needed to
    evaluate the link budget."""

    bss: tuple[BaseStation, ...]
    users: np.ndarray  # (I, 2) meters
    cell_radius_m: float
    bandwidth_hz: float
    noise_power_dbm: float
    pathloss: PathLossParams
    shadowing: ShadowingParams
    min_user_bs_m: float
    seed: int

    @property
    def n_users(self) -> int:
        return int(self.users.shape[0])

    @property
    def n_bs(self) -> int:
        return len(self.bss)

    @property
    def bs_positions(self) -> np.ndarray:
        return np.array([bs.position for bs in self.bss], dtype=np.float64)

    @property
    def bs_powers_dbm(self) -> np.ndarray:
        return np.array([bs.tx_power_dbm for bs in self.bss], dtype=np.float64)

    @property
    def tiers(self) -> tuple[str, ...]:
        return tuple(bs.tier for bs in self.bss)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "cell_radius_m": self.cell_radius_m,
            "bandwidth_hz": self.bandwidth_hz,
            "noise_power_dbm": self.noise_power_dbm,
            "pathloss": {
                "intercept_db": self.pathloss.intercept_db,
                "slope_db_per_decade": self.pathloss.slope_db_per_decade,
            },
            "shadowing": {
                "enabled": self.shadowing.enabled,
                "sigma_db": self.shadowing.sigma_db,
            },
            "min_user_bs_m": self.min_user_bs_m,
            "bss": [
                {"position": list(bs.position), "tx_power_dbm": bs.tx_power_dbm,
                 "tier": bs.tier}
                for bs in self.bss
            ],
            "users": self.users.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def checksum(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, doc: dict) -> "Deployment":
        return cls(
            bss=tuple(
                BaseStation(tuple(b["position"]), b["tx_power_dbm"], b["tier"])
                for b in doc["bss"]
            ),
            users=np.array(doc["users"], dtype=np.float64).reshape(-1, 2),
            cell_radius_m=doc["cell_radius_m"],
            bandwidth_hz=doc["bandwidth_hz"],
            noise_power_dbm=doc["noise_power_dbm"],
            pathloss=PathLossParams(**doc["pathloss"]),
            shadowing=ShadowingParams(**doc["shadowing"]),
            min_user_bs_m=doc["min_user_bs_m"],
            seed=doc["seed"],
        )

    @classmethod
    def from_json(cls, text: str) -> "Deployment":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class LinkGains:
    """Per-link linear channel gains, SINRs, and full-bandwidth rates
    (bandwidth * log2(1 + SINR), before any load sharing)."""

    gain: np.ndarray       # (I, J) linear
    sinr: np.ndarray       # (I, J) linear
    full_rate: np.ndarray  # (I, J) bit/s
    tiers: tuple[str, ...]
    bandwidth_hz: float

    @property
    def n_users(self) -> int:
        return int(self.gain.shape[0])

    @property
    def n_bs(self) -> int:
        return int(self.gain.shape[1])

    def checksum(self) -> str:
        h = hashlib.sha256()
        for m in (self.gain, self.sinr, self.full_rate):
            h.update(np.ascontiguousarray(m).tobytes())
        return h.hexdigest()


def path_loss_db(distance_m: float, pathloss: Optional[PathLossParams] = None) -> float:
    """Log-distance path loss in dB at `distance_m` meters.

    Raises ValueError for non-positive distances; callers wanting the
    short-range clamp apply it before calling (see MinDistances.user_bs_m).
    """
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    pl = pathloss or PathLossParams()
    return pl.intercept_db + pl.slope_db_per_decade * math.log10(distance_m / 1000.0)


def compute_link_gains(dep: Deployment) -> LinkGains:
    """Evaluate the link budget of a deployment.

    gain[i, j] follows the log-distance model (plus optional log-normal
    shadowing drawn deterministically from the deployment seed);
    sinr[i, j] = gain[i, j] * P_j / (sum_{q != j} gain[i, q] * P_q + noise);
    full_rate[i, j] = bandwidth * log2(1 + sinr[i, j]).
    """
    pl = dep.pathloss
    users = dep.users.reshape(-1, 2)
    n_users = users.shape[0]
    bs_pos = dep.bs_positions
    if n_users == 0:
        empty = np.zeros((0, dep.n_bs))
        return LinkGains(empty, empty.copy(), empty.copy(), dep.tiers, dep.bandwidth_hz)

    dist = np.hypot(users[:, None, 0] - bs_pos[None, :, 0],
                    users[:, None, 1] - bs_pos[None, :, 1])
    dist = np.maximum(dist, dep.min_user_bs_m)
    pl_db = pl.intercept_db + pl.slope_db_per_decade * np.log10(dist / 1000.0)
    if dep.shadowing.enabled:
        rng = np.random.default_rng(fold_chain(dep.seed, DOMAIN_SHADOWING))
        pl_db = pl_db + rng.normal(0.0, dep.shadowing.sigma_db, size=pl_db.shape)
    gain = 10.0 ** (-pl_db / 10.0)

    p_lin = 10.0 ** ((dep.bs_powers_dbm - 30.0) / 10.0)
    noise_lin = dbm_to_watts(dep.noise_power_dbm)
    rx = gain * p_lin[None, :]
    interference = rx.sum(axis=1, keepdims=True) - rx
    sinr = rx / (interference + noise_lin)
    full_rate = dep.bandwidth_hz * np.log2(1.0 + sinr)
    return LinkGains(gain, sinr, full_rate, dep.tiers, dep.bandwidth_hz)


def _uniform_disk(rng: np.random.Generator, radius: float, n: int) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def generate_deployment(cfg: ScenarioConfig, seed: int,
                        max_placement_retries: int = 1000) -> Deployment:
    """Draw one deployment: macro BS at the origin, small BSs uniform on the
    disk subject to separation rules, users uniform on the disk.

    Deterministic in (cfg, seed). Raises GenerationError if a small BS cannot
    be placed within the retry budget.
    """
    rng = np.random.default_rng(seed)
    mbs = BaseStation((0.0, 0.0), cfg.mbs_power_dbm, MACRO)
    placed: list[BaseStation] = [mbs]
    for k in range(cfg.n_sbs):
        for _ in range(max_placement_retries):
            pos = _uniform_disk(rng, cfg.cell_radius_m, 1)[0]
            d_mbs = math.hypot(pos[0], pos[1])
            if d_mbs < cfg.min_distances.mbs_sbs_m:
                continue
            ok = all(
                math.hypot(pos[0] - bs.position[0], pos[1] - bs.position[1])
                >= cfg.min_distances.sbs_sbs_m
                for bs in placed[1:]
            )
            if ok:
                placed.append(BaseStation((float(pos[0]), float(pos[1])),
                                          cfg.sbs_power_dbm, SMALL))
                break
        else:
            raise GenerationError(
                f"could not place small BS {k + 1} of {cfg.n_sbs} after "
                f"{max_placement_retries} attempts (radius {cfg.cell_radius_m} m)"
            )
    users = _uniform_disk(rng, cfg.cell_radius_m, cfg.n_users)
    return Deployment(
        bss=tuple(placed),
        users=users,
        cell_radius_m=cfg.cell_radius_m,
        bandwidth_hz=cfg.bandwidth_hz,
        noise_power_dbm=cfg.noise_dbm,
        pathloss=cfg.pathloss,
        shadowing=cfg.shadowing,
        min_user_bs_m=cfg.min_distances.user_bs_m,
        seed=int(seed),
    )
