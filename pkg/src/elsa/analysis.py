"""Monte Carlo campaigns, empirical ROC curves, and the audibility (Xi) certifier."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from elsa.adversary import AttackParams, inject_attack
from elsa.detector import NoMeasurementsError, conventional_detect, elsa_detect
from elsa.inference import GridSpec, Hypothesis, ScenarioParams, log_likelihood_delay
from elsa.model import (
    D_MIN, ChannelParams, Location, Observation, ObservationVector, TimingParams, audibility_probability,
    distance, log_audible, log_inaudible, simulate_observation,
)
from elsa.rng import derive_seed

DETECTORS = ("elsa", "conventional")
XI_TOLERANCE = 1e-9


# --------------------------------------------------------------------------- campaigns

@dataclass(frozen=True)
class Scenario:
    """Geometry, model parameters and the target-placement policy of a campaign.

    ``target=None`` draws the target uniformly over the grid region. With
    ``audible_zone=k`` the target is redrawn until it sits where exactly ``k``
    anchors are nominally in range (mean RSS >= lambda) and the simulated
    audibility pattern matches that nominal pattern.
    """

    anchors: tuple[Location, ...]
    grid: GridSpec
    params: ScenarioParams = field(default_factory=ScenarioParams)
    target: Optional[Location] = None
    audible_zone: Optional[int] = None
    max_attempts: int = 100_000

    def nominal_pattern(self, target: Location) -> tuple[bool, ...]:
        ch = self.params.channel
        return tuple(bool(audibility_probability(distance(target, a), ch) >= 0.5) for a in self.anchors)


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    seed: int
    true_location: Location
    attacked: bool
    log_lambda_elsa: float
    log_lambda_conventional: Optional[float]
    n_audible: int
    audible: tuple[bool, ...] = ()

    def log_lambda(self, detector: str) -> Optional[float]:
        return self.log_lambda_elsa if detector == "elsa" else self.log_lambda_conventional


def draw_trial_observation(scenario: Scenario, seed: int) -> tuple[Location, ObservationVector]:
    """Place the target and simulate honest measurements for one trial."""
    region = scenario.grid.region
    p = scenario.params
    for attempt in range(scenario.max_attempts):
        if scenario.target is not None:
            target = scenario.target
        else:
            rng = np.random.default_rng(derive_seed(seed, attempt, 0))
            target = Location(float(rng.uniform(region.x_min, region.x_max)),
                              float(rng.uniform(region.y_min, region.y_max)))
        if scenario.audible_zone is not None:
            nominal = scenario.nominal_pattern(target)
            if sum(nominal) != scenario.audible_zone:
                continue
        obs = simulate_observation(target, scenario.anchors, p.channel, p.timing, derive_seed(seed, attempt, 1))
        if scenario.audible_zone is None or tuple(obs.audible) == nominal:
            return target, obs
    raise RuntimeError(f"no admissible target after {scenario.max_attempts} attempts")


def run_trial(scenario: Scenario, trial_id: int, seed: int, attacked: bool) -> TrialRecord:
    target, obs = draw_trial_observation(scenario, seed)
    if attacked:
        obs = inject_attack(obs, scenario.params.attack, derive_seed(seed, 2))
    return evaluate(obs, scenario.grid, scenario.params, trial_id, seed, target, attacked)


def evaluate(obs: ObservationVector, grid: GridSpec, params: ScenarioParams, trial_id: int, seed: int,
             target: Location, attacked: bool) -> TrialRecord:
    """Run both detectors on one observation vector."""
    ll_elsa = elsa_detect(obs, 0.0, grid, params).log_lambda
    try:
        ll_conv = conventional_detect(obs, 0.0, grid, params).log_lambda
    except NoMeasurementsError:
        ll_conv = None
    return TrialRecord(trial_id, seed, target, attacked, ll_elsa, ll_conv, obs.n_audible,
                       tuple(bool(r) for r in obs.audible))


def run_campaign(scenario: Scenario, n_trials: int, attacked: bool, rng_root_seed: int,
                 threads: int = 1) -> list[TrialRecord]:
    """Independent trials, each seeded from (root seed, trial id); merged in trial order."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")

    def one(i):
        return run_trial(scenario, i, derive_seed(rng_root_seed, i), attacked)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, range(n_trials)))
    return [one(i) for i in range(n_trials)]


# --------------------------------------------------------------------------- ROC

@dataclass(frozen=True)
class RocCurve:
    detector: str
    false_alarm: np.ndarray
    detection: np.ndarray
    log_eta: np.ndarray
    dropped_honest: int = 0
    dropped_attacked: int = 0

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.false_alarm.tolist(), self.detection.tolist(), self.log_eta.tolist()))


def _scores(records: Sequence[TrialRecord], detector: str, missing: str) -> tuple[np.ndarray, int]:
    vals = [r.log_lambda(detector) for r in records]
    n_missing = sum(v is None for v in vals)
    if missing == "drop":
        vals = [v for v in vals if v is not None]
    elif missing == "no_detect":
        # A detector that cannot decide never declares spoofing.
        vals = [-math.inf if v is None else v for v in vals]
    else:
        raise ValueError(f"unknown missing policy {missing!r}")
    return np.asarray(vals, dtype=float), n_missing


def roc_from_scores(honest: np.ndarray, attacked: np.ndarray, detector: str = "",
                    dropped: tuple[int, int] = (0, 0)) -> RocCurve:
    """Empirical ROC: every observed statistic is tried as a threshold, decision is ``score > eta``."""
    honest = np.sort(np.asarray(honest, dtype=float))
    attacked = np.sort(np.asarray(attacked, dtype=float))
    if honest.size == 0 or attacked.size == 0:
        raise ValueError("both classes need at least one score")
    merged = np.concatenate([honest, attacked])
    etas = np.unique(merged[np.isfinite(merged)])[::-1]
    etas = np.concatenate([[np.inf], etas, [-np.inf]])

    def exceed(x):
        return (x.size - np.searchsorted(x, etas, side="right")) / x.size

    pf, pd = exceed(honest), exceed(attacked)
    pf[-1] = pd[-1] = 1.0  # eta = -inf: always declare spoofing
    return RocCurve(detector, pf, pd, etas, *dropped)


def build_roc(honest: Sequence[TrialRecord], attacked: Sequence[TrialRecord], detector: str,
              missing: str = "drop") -> RocCurve:
    h, nh = _scores(honest, detector, missing)
    a, na = _scores(attacked, detector, missing)
    return roc_from_scores(h, a, detector, (nh, na) if missing == "drop" else (0, 0))


def auc(curve: RocCurve) -> float:
    return float(np.trapezoid(curve.detection, curve.false_alarm))


def detection_at(curve: RocCurve, pf: float) -> float:
    """Best detection rate over thresholds whose false-alarm rate does not exceed ``pf``."""
    ok = curve.false_alarm <= pf + 1e-12
    return float(curve.detection[ok].max())


def roc_summary(honest, attacked, pfs=(0.02, 0.05)) -> dict:
    out = {}
    for det in DETECTORS:
        for missing in ("drop", "no_detect"):
            c = build_roc(honest, attacked, det, missing)
            key = det if missing == "drop" else f"{det}_all_trials"
            out[key] = {"auc": auc(c), **{f"pd_at_pf_{pf:g}": detection_at(c, pf) for pf in pfs}}
            if missing == "drop":
                out[key].update(dropped_honest=c.dropped_honest, dropped_attacked=c.dropped_attacked)
    # ELSA restricted to the trials the delay-only test can decide, for a like-for-like comparison.
    hs = [r for r in honest if r.log_lambda_conventional is not None]
    at = [r for r in attacked if r.log_lambda_conventional is not None]
    if hs and at:
        c = build_roc(hs, at, "elsa")
        out["elsa_common_support"] = {"auc": auc(c), **{f"pd_at_pf_{pf:g}": detection_at(c, pf) for pf in pfs}}
    return out


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


# --------------------------------------------------------------------------- Xi certifier

@dataclass(frozen=True)
class XiReport:
    xi: float                    # 2 sigma_w^2 (sigma_w^2 + sigma_delta^2) * sum(terms)
    log_sum: float               # sum(terms), natural-log units
    terms: tuple[float, ...]
    n_audible: int
    distances: tuple[float, ...]
    shifted_distances: tuple[float, ...]
    certificate: bool


def xi_term(theta_hat: Location, anchors: Sequence[Location], audibility: Sequence[bool],
            params: ScenarioParams, negate_shift: bool = False) -> XiReport:
    """Audibility-only part of the fixed-location ELSA statistic.

    Audible anchors compare P(r=1) at ``d + mu_delta * v_p`` against ``d``;
    inaudible ones compare P(r=0) at ``max(d - mu_delta * v_p, D_MIN)``.
    ``negate_shift`` flips both shifts (mutation hook for the certifier).
    """
    ch, tm, atk = params.channel, params.timing, params.attack
    if atk.mu_delta < 0:
        raise ValueError("mu_delta must be non-negative")
    shift = atk.mu_delta * tm.v_p * (-1.0 if negate_shift else 1.0)
    terms, ds, shifted = [], [], []
    for a, r in zip(anchors, audibility):
        d = max(distance(theta_hat, a), D_MIN)
        if r:
            d_s = max(d + shift, D_MIN)
            terms.append(log_audible(d_s, ch) - log_audible(d, ch))
        else:
            d_s = max(d - shift, D_MIN)
            terms.append(log_inaudible(d_s, ch) - log_inaudible(d, ch))
        ds.append(d)
        shifted.append(d_s)
    log_sum = math.fsum(terms)
    scale = 2.0 * tm.sigma_w ** 2 * (tm.sigma_w ** 2 + atk.sigma_delta ** 2)
    # The certificate is judged on log_sum: the s^4-scaled xi is ~1e-31 and
    # would pass any 1e-9 tolerance regardless of sign. Both share a sign.
    return XiReport(scale * log_sum, log_sum, tuple(terms), int(sum(map(bool, audibility))),
                    tuple(ds), tuple(shifted), log_sum <= XI_TOLERANCE)


def sample_configuration(rng: np.random.Generator, base: ScenarioParams, spread: float = 4.0,
                         side: float = 100.0, max_anchors: int = 6):
    """Random geometry, audibility pattern and parameters within x/÷ ``spread`` of ``base``."""

    def jitter(v):
        return v * spread ** rng.uniform(-1.0, 1.0)

    ch, tm, atk = base.channel, base.timing, base.attack
    params = ScenarioParams(
        ChannelParams(jitter(ch.p_t), jitter(ch.alpha), jitter(ch.d_0), jitter(ch.sigma_eps), jitter(ch.lam)),
        TimingParams(tm.v_p, jitter(tm.sigma_w)),
        AttackParams(jitter(atk.mu_delta), jitter(atk.sigma_delta), atk.positive_only),
    )
    n = int(rng.integers(1, max_anchors + 1))
    anchors = [Location(*rng.uniform(0, side, 2)) for _ in range(n)]
    theta = Location(*rng.uniform(0, side, 2))
    l = int(rng.integers(0, n + 1))
    audible = np.zeros(n, dtype=bool)
    audible[rng.permutation(n)[:l]] = True
    return theta, anchors, audible.tolist(), params


def certify(n_samples: int, seed: int, base: ScenarioParams, spread: float = 4.0,
            negate_shift: bool = False) -> list[tuple[XiReport, tuple]]:
    """Evaluate Xi over randomly sampled configurations; returns (report, configuration) pairs."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_samples):
        theta, anchors, audible, params = sample_configuration(rng, base, spread)
        out.append((xi_term(theta, anchors, audible, params, negate_shift), (theta, anchors, audible, params)))
    return out


# --------------------------------------------------------------------------- fixed-location statistic

def _audible_pairs(obs: ObservationVector, theta: Location, tm: TimingParams):
    return [(o.delay, distance(theta, a) / tm.v_p) for a, o in zip(obs.anchors, obs.obs) if o.audible]


def z_statistic(obs: ObservationVector, theta: Location, params: ScenarioParams) -> float:
    """Sufficient statistic sum(sd^2 t^2 + 2 mu sw^2 t - 2 sd^2 psi t) over audible anchors."""
    tm, atk = params.timing, params.attack
    sw2, sd2, mu = tm.sigma_w ** 2, atk.sigma_delta ** 2, atk.mu_delta
    pairs = _audible_pairs(obs, theta, tm)
    if not pairs:
        raise NoMeasurementsError("z statistic needs an audible anchor")
    return math.fsum(sd2 * t * t + 2 * mu * sw2 * t - 2 * sd2 * psi * t for t, psi in pairs)


def z_threshold(obs: ObservationVector, theta: Location, log_eta: float, params: ScenarioParams) -> float:
    """Threshold gamma with  Z > gamma  <=>  fixed-location delay log-ratio > log_eta."""
    tm, atk = params.timing, params.attack
    sw2, sd2, mu = tm.sigma_w ** 2, atk.sigma_delta ** 2, atk.mu_delta
    s2 = sw2 + sd2
    pairs = _audible_pairs(obs, theta, tm)
    l = len(pairs)
    base = 2 * sw2 * s2 * (log_eta - l * 0.5 * math.log(sw2 / s2))
    return base + math.fsum(2 * psi * mu * sw2 + mu * mu * sw2 - sd2 * psi * psi for _, psi in pairs)


def fixed_location_log_ratio(obs: ObservationVector, theta: Location, params: ScenarioParams,
                             with_audibility: bool = False) -> float:
    """log Lambda with both hypotheses evaluated at the same known location.

    ``with_audibility`` adds the Xi log-sum, giving the audibility-aware form.
    """
    tm, atk = params.timing, params.attack
    total = 0.0
    for a, o in zip(obs.anchors, obs.obs):
        if o.audible:
            d = distance(theta, a)
            total += (log_likelihood_delay(o.delay, d, Hypothesis.H1, tm, atk)
                      - log_likelihood_delay(o.delay, d, Hypothesis.H0, tm, atk))
    if with_audibility:
        total += xi_term(theta, obs.anchors, obs.audible.tolist(), params).log_sum
    return total


def fixed_location_exceedance(theta: Location, anchors: Sequence[Location], audible: Sequence[bool],
                              params: ScenarioParams, gamma: float, hyp: Hypothesis, n: int, seed: int,
                              with_audibility: bool = False) -> float:
    """Monte Carlo estimate of P(Z (+ Xi) > gamma | hyp) at a fixed location and audibility pattern."""
    tm, atk = params.timing, params.attack
    rng = np.random.default_rng(seed)
    anchors = tuple(anchors)
    psi = np.array([distance(theta, a) / tm.v_p for a in anchors])
    xi = xi_term(theta, anchors, audible, params).xi if with_audibility else 0.0
    hits = 0
    for _ in range(n):
        t = psi + tm.sigma_w * rng.standard_normal(len(anchors))
        if hyp is Hypothesis.H1:
            delta = atk.mu_delta + atk.sigma_delta * rng.standard_normal(len(anchors))
            t = t + (np.abs(delta) if atk.positive_only else delta)
        obs = ObservationVector(anchors, tuple(
            Observation(True, float(ti)) if r else Observation(False) for ti, r in zip(t, audible)))
        hits += z_statistic(obs, theta, params) + xi > gamma
    return hits / n
