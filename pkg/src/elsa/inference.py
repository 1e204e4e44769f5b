"""Hypothesis-conditional likelihoods and grid-search MAP location estimates.

Everything is in the natural-log domain. Under H1 the delay of an audible
anchor is modelled as N(d / v_p + mu_delta, sigma_w^2 + sigma_delta^2).

Audibility probabilities can optionally be evaluated under H1 at a distance
shifted by the attack's equivalent range ``mu_delta * v_p``: enlarged for
audible anchors, shrunk (floored at ``D_MIN``) for inaudible ones. The detectors
leave this off by default (``ScenarioParams.h1_audibility_shift``), so P(r | theta)
is the same function under both hypotheses and the audibility evidence enters
only through where each MAP estimate lands.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from elsa.adversary import AttackParams
from elsa.model import (
    D_MIN, ChannelParams, Location, ObservationVector, Region, TimingParams,
    distance, log_audible, log_inaudible,
)

LOG_2PI = math.log(2.0 * math.pi)


class Hypothesis(enum.Enum):
    H0 = "H0_no_spoofing"
    H1 = "H1_spoofing"


@dataclass(frozen=True)
class ScenarioParams:
    channel: ChannelParams = field(default_factory=ChannelParams)
    timing: TimingParams = field(default_factory=TimingParams)
    attack: AttackParams = field(default_factory=AttackParams)
    h1_audibility_shift: bool = False


@dataclass(frozen=True)
class GridSpec:
    region: Region
    step: float = 1.0

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if len(self.xs) * len(self.ys) < 4:
            raise ValueError("grid needs at least 4 nodes")

    @staticmethod
    def _axis(lo, hi, step):
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(n)

    @property
    def xs(self) -> np.ndarray:
        return self._axis(self.region.x_min, self.region.x_max, self.step)

    @property
    def ys(self) -> np.ndarray:
        return self._axis(self.region.y_min, self.region.y_max, self.step)


@dataclass(frozen=True)
class MapEstimate:
    location: Location
    log_posterior: float
    hypothesis: Hypothesis


def _delay_moments(hyp: Hypothesis, tm: TimingParams, atk: AttackParams) -> tuple[float, float]:
    """(mean offset, variance) of the delay around d / v_p."""
    if hyp is Hypothesis.H0:
        return 0.0, tm.sigma_w ** 2
    return atk.mu_delta, tm.sigma_w ** 2 + atk.sigma_delta ** 2


def log_likelihood_delay(t: float, d, hyp: Hypothesis, tm: TimingParams, atk: AttackParams):
    offset, var = _delay_moments(hyp, tm, atk)
    resid = t - (np.asarray(d) / tm.v_p + offset)
    out = -0.5 * (LOG_2PI + math.log(var)) - resid * resid / (2.0 * var)
    return float(out) if np.ndim(out) == 0 else out


def shifted_distances(d, atk: AttackParams, tm: TimingParams):
    """(audible, inaudible) distances used by the H1 audibility terms."""
    shift = atk.mu_delta * tm.v_p
    d = np.asarray(d, dtype=float)
    return d + shift, np.maximum(d - shift, D_MIN)


def log_audibility_term(r: bool, d, hyp: Hypothesis, ch: ChannelParams, atk: AttackParams,
                        tm: TimingParams, shift: bool = True):
    """log P(r | d, hyp); ``shift=False`` makes H1 identical to H0."""
    if hyp is Hypothesis.H1 and shift:
        d_up, d_down = shifted_distances(d, atk, tm)
        return log_audible(d_up, ch) if r else log_inaudible(d_down, ch)
    return log_audible(d, ch) if r else log_inaudible(d, ch)


def log_prior(theta: Location, region: Region) -> float:
    return -math.log(region.area) if region.contains(theta) else -math.inf


def anchor_terms(obs: ObservationVector, theta: Location, hyp: Hypothesis, params: ScenarioParams,
                 use_audibility: bool = True) -> list[tuple[float, float]]:
    """Per-anchor (delay, audibility) log terms at ``theta``; zeros where a term is absent."""
    ch, tm, atk = params.channel, params.timing, params.attack
    out = []
    for a, o in zip(obs.anchors, obs.obs):
        d = distance(theta, a)
        delay = log_likelihood_delay(o.delay, d, hyp, tm, atk) if o.audible else 0.0
        aud = (log_audibility_term(o.audible, d, hyp, ch, atk, tm, params.h1_audibility_shift)
               if use_audibility else 0.0)
        out.append((delay, aud))
    return out


def log_joint(obs: ObservationVector, theta: Location, hyp: Hypothesis, params: ScenarioParams,
              region: Region, use_audibility: bool = True) -> float:
    """Unnormalised log posterior of ``theta``; -inf outside the prior's support."""
    lp = log_prior(theta, region)
    if lp == -math.inf:
        return lp
    return sum(dl + au for dl, au in anchor_terms(obs, theta, hyp, params, use_audibility)) + lp


class LikelihoodGrid:
    """Per-anchor distance and audibility surfaces over a grid, reused across observations.

    Arrays are indexed ``[anchor, iy, ix]``; flattening in C order makes
    ``argmax`` break ties by lowest y, then lowest x.
    """

    def __init__(self, anchors: tuple[Location, ...], grid: GridSpec, params: ScenarioParams):
        self.anchors = anchors
        self.grid = grid
        self.params = params
        self.xs, self.ys = grid.xs, grid.ys
        gx, gy = np.meshgrid(self.xs, self.ys)
        self.dist = np.stack([np.hypot(gx - a.x, gy - a.y) for a in anchors])
        self.psi = self.dist / params.timing.v_p
        ch, tm, atk = params.channel, params.timing, params.attack
        plain = (log_audible(self.dist, ch), log_inaudible(self.dist, ch))
        self._aud = {Hypothesis.H0: plain, Hypothesis.H1: plain}
        if params.h1_audibility_shift:
            d_up, d_down = shifted_distances(self.dist, atk, tm)
            self._aud[Hypothesis.H1] = (log_audible(d_up, ch), log_inaudible(d_down, ch))
        self.log_prior = -math.log(grid.region.area)

    def surface(self, obs: ObservationVector, hyp: Hypothesis, use_audibility: bool = True) -> np.ndarray:
        tm, atk = self.params.timing, self.params.attack
        offset, var = _delay_moments(hyp, tm, atk)
        norm = -0.5 * (LOG_2PI + math.log(var))
        total = np.full(self.dist.shape[1:], self.log_prior)
        log_aud, log_inaud = self._aud[hyp]
        for i, o in enumerate(obs.obs):
            if o.audible:
                resid = o.delay - offset - self.psi[i]
                total += norm - resid * resid / (2.0 * var)
            if use_audibility:
                total += log_aud[i] if o.audible else log_inaud[i]
        return total

    def map_estimate(self, obs: ObservationVector, hyp: Hypothesis, use_audibility: bool = True) -> MapEstimate:
        s = self.surface(obs, hyp, use_audibility)
        k = int(np.argmax(s))
        iy, ix = divmod(k, s.shape[1])
        return MapEstimate(Location(float(self.xs[ix]), float(self.ys[iy])), float(s.flat[k]), hyp)


@functools.lru_cache(maxsize=64)
def likelihood_grid(anchors: tuple[Location, ...], grid: GridSpec, params: ScenarioParams) -> LikelihoodGrid:
    return LikelihoodGrid(anchors, grid, params)


def map_estimate(obs: ObservationVector, hyp: Hypothesis, grid: GridSpec, params: ScenarioParams,
                 use_audibility: bool = True) -> MapEstimate:
    """Exhaustive grid-search MAP estimate of the target location."""
    return likelihood_grid(obs.anchors, grid, params).map_estimate(obs, hyp, use_audibility)
