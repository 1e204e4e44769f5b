"""Domain types and the forward channel: distances, RSS, audibility, TOA delays."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import log_ndtr, ndtr

from elsa.rng import anchor_generators

# Distances are floored here before any log is taken.
D_MIN = 0.01


@dataclass(frozen=True)
class Location:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite location ({self.x}, {self.y})")

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Region:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate region {self}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, p: Location) -> bool:
        return self.x_min <= p.x <= self.x_max and self.y_min <= p.y <= self.y_max


@dataclass(frozen=True)
class ChannelParams:
    """Log-normal shadowing channel plus receiver sensitivity ``lam`` (dBm)."""

    p_t: float = -40.0
    alpha: float = 3.2
    d_0: float = 1.0
    sigma_eps: float = math.sqrt(10.0)
    lam: float = -102.0

    def __post_init__(self):
        if self.alpha <= 0 or self.d_0 <= 0 or self.sigma_eps <= 0:
            raise ValueError(f"invalid channel parameters {self}")


@dataclass(frozen=True)
class TimingParams:
    v_p: float = 3e8
    sigma_w: float = 1e-8

    def __post_init__(self):
        if self.v_p <= 0 or self.sigma_w <= 0:
            raise ValueError(f"invalid timing parameters {self}")


@dataclass(frozen=True)
class Observation:
    audible: bool
    delay: Optional[float] = None
    rss: Optional[float] = None

    def __post_init__(self):
        if self.audible != (self.delay is not None):
            raise ValueError("delay must be present iff the anchor is audible")
        if self.delay is not None and not math.isfinite(self.delay):
            raise ValueError("non-finite delay")


@dataclass(frozen=True)
class ObservationVector:
    anchors: tuple[Location, ...]
    obs: tuple[Observation, ...]

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(self.anchors))
        object.__setattr__(self, "obs", tuple(self.obs))
        if len(self.anchors) != len(self.obs):
            raise ValueError("anchors and observations differ in length")
        if not self.anchors:
            raise ValueError("need at least one anchor")
        if len(set(a.as_tuple() for a in self.anchors)) != len(self.anchors):
            raise ValueError("anchor positions must be pairwise distinct")

    def __len__(self):
        return len(self.anchors)

    @property
    def audible(self) -> np.ndarray:
        return np.array([o.audible for o in self.obs], dtype=bool)

    @property
    def n_audible(self) -> int:
        return sum(o.audible for o in self.obs)

    @property
    def delays(self) -> np.ndarray:
        """Delays with NaN in inaudible slots."""
        return np.array([o.delay if o.audible else np.nan for o in self.obs], dtype=float)

    def permuted(self, order: Sequence[int]) -> "ObservationVector":
        return ObservationVector(tuple(self.anchors[i] for i in order), tuple(self.obs[i] for i in order))


def distance(a: Location, b: Location) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def _clamp(d):
    return np.maximum(d, D_MIN)


def mean_rss(d, ch: ChannelParams):
    """Mean received power (dBm) at distance ``d``; accepts scalars or arrays."""
    d = np.asarray(d, dtype=float)
    if np.any(~(d >= 0)):
        raise ValueError("distance must be non-negative")
    out = ch.p_t - 10.0 * ch.alpha * np.log10(_clamp(d) / ch.d_0)
    return float(out) if out.ndim == 0 else out


def _audibility_z(d, ch: ChannelParams):
    # Standardised gap between the threshold and the mean RSS.
    return (ch.lam - mean_rss(d, ch)) / ch.sigma_eps


def audibility_probability(d, ch: ChannelParams):
    """P(r = 1 | d) = 1 - Phi((lam - mean_rss(d)) / sigma_eps)."""
    out = ndtr(-np.asarray(_audibility_z(d, ch)))
    return float(out) if np.ndim(out) == 0 else out


def log_audible(d, ch: ChannelParams):
    """log P(r = 1 | d), accurate in both tails."""
    out = log_ndtr(-np.asarray(_audibility_z(d, ch)))
    return float(out) if np.ndim(out) == 0 else out


def log_inaudible(d, ch: ChannelParams):
    """log P(r = 0 | d)."""
    out = log_ndtr(np.asarray(_audibility_z(d, ch)))
    return float(out) if np.ndim(out) == 0 else out


def simulate_observation(target: Location, anchors: Sequence[Location], ch: ChannelParams,
                         tm: TimingParams, rng_seed: int) -> ObservationVector:
    """Draw shadowing, audibility and (when audible) a noisy TOA delay per anchor.

    Anchor ``i`` uses its own random stream so results do not depend on
    iteration order or on the number of anchors that follow it.
    """
    out = []
    for a, rng in zip(anchors, anchor_generators(rng_seed, len(anchors))):
        d = distance(target, a)
        eps, w = rng.standard_normal(2)
        p = mean_rss(d, ch) + ch.sigma_eps * eps
        if p >= ch.lam:
            out.append(Observation(True, d / tm.v_p + tm.sigma_w * w, p))
        else:
            out.append(Observation(False))
    return ObservationVector(tuple(anchors), tuple(out))
