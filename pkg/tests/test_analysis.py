import math
from dataclasses import replace

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from conftest import AREA, CORNERS3, upper_tail_oracle
from elsa.adversary import AttackParams
from elsa.analysis import (
    DETECTORS, RocCurve, Scenario, TrialRecord, auc, binomial_se, build_roc, certify, detection_at,
    draw_trial_observation, fixed_location_exceedance, fixed_location_log_ratio, roc_from_scores, roc_summary,
    run_campaign, xi_term, z_statistic, z_threshold,
)
from elsa.detector import NoMeasurementsError
from elsa.inference import GridSpec, Hypothesis, ScenarioParams
from elsa.model import (
    ChannelParams, Location, Observation, ObservationVector, TimingParams, audibility_probability, distance,
    mean_rss,
)

COARSE = GridSpec(AREA, 10.0)


def _scenario(**kw):
    return Scenario(CORNERS3, COARSE, ScenarioParams(), **kw)


# --------------------------------------------------------------------------- campaigns

def test_campaign_is_deterministic_and_thread_independent():
    sc = _scenario()
    assert run_campaign(sc, 1, True, 5) == run_campaign(sc, 1, True, 5)
    assert run_campaign(sc, 40, True, 5) == run_campaign(sc, 40, True, 5, threads=4)
    recs = run_campaign(sc, 40, False, 5)
    assert [r.trial_id for r in recs] == list(range(40))
    assert all(r.n_audible == sum(r.audible) <= 3 for r in recs)


def test_campaign_rejects_empty():
    with pytest.raises(ValueError):
        run_campaign(_scenario(), 0, False, 1)


def test_audible_count_mass_matches_closed_form():
    # Closed form: average over the area of the Poisson-binomial mass built
    # from per-anchor audibility probabilities (midpoint rule, 0.5 m cells).
    ch = ChannelParams()
    c = np.arange(0.25, 100, 0.5)
    gx, gy = np.meshgrid(c, c)
    mass = np.ones((1,) + gx.shape)
    for a in CORNERS3:
        p = audibility_probability(np.hypot(gx - a.x, gy - a.y), ch)
        nxt = np.zeros((mass.shape[0] + 1,) + gx.shape)
        nxt[:-1] += mass * (1 - p)
        nxt[1:] += mass * p
        mass = nxt
    want = mass.mean(axis=(1, 2))
    recs = run_campaign(_scenario(), 10_000, False, 77)
    got = np.bincount([r.n_audible for r in recs], minlength=4) / len(recs)
    assert np.all(np.abs(got - want) < 0.02)


def test_attacked_mean_statistic_exceeds_honest():
    sc = _scenario()
    h = run_campaign(sc, 400, False, 1)
    a = run_campaign(sc, 400, True, 2)
    assert np.mean([r.log_lambda_elsa for r in a]) > np.mean([r.log_lambda_elsa for r in h])


def test_missing_baseline_is_recorded_not_raised():
    sc = Scenario(CORNERS3, COARSE, ScenarioParams(channel=ChannelParams(lam=math.inf)))
    recs = run_campaign(sc, 5, True, 3)
    assert all(r.log_lambda_conventional is None and r.n_audible == 0 for r in recs)
    assert all(math.isfinite(r.log_lambda_elsa) for r in recs)


def test_audible_zone_constraint():
    sc = _scenario(audible_zone=2)
    for s in range(50):
        target, obs = draw_trial_observation(sc, s)
        assert obs.n_audible == 2
        assert tuple(obs.audible) == sc.nominal_pattern(target)
    fixed = _scenario(target=Location(20, 20))
    assert draw_trial_observation(fixed, 3)[0] == Location(20, 20)
    with pytest.raises(RuntimeError):
        draw_trial_observation(replace(_scenario(audible_zone=4), max_attempts=20), 0)


# --------------------------------------------------------------------------- ROC

def _rec(v, attacked, conv=0.0):
    return TrialRecord(0, 0, Location(0, 0), attacked, v, conv, 1)


def test_identical_classes_give_diagonal():
    x = np.random.default_rng(0).normal(size=500)
    c = roc_from_scores(x, x)
    assert np.allclose(c.false_alarm, c.detection, atol=1 / 500)
    assert auc(c) == pytest.approx(0.5, abs=1e-12)


def test_separable_classes():
    c = roc_from_scores(np.array([-3.0, -2, -1]), np.array([1.0, 2, 3]))
    assert (0.0, 1.0) in [(f, d) for f, d, _ in c.points]
    assert auc(c) == 1.0
    assert c.points[0][:2] == (0.0, 0.0) and c.points[-1][:2] == (1.0, 1.0)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60),
       st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60))
def test_roc_is_monotone_and_bounded(h, a):
    c = roc_from_scores(np.array(h), np.array(a))
    assert np.all(np.diff(c.false_alarm) >= 0) and np.all(np.diff(c.detection) >= 0)
    assert np.all((0 <= c.false_alarm) & (c.false_alarm <= 1))
    assert 0 <= auc(c) <= 1
    # Decision rule is strict exceedance of each threshold.
    for pf, pd, eta in c.points[1:-1]:
        assert pf == np.mean(np.array(h) > eta) and pd == np.mean(np.array(a) > eta)


def test_auc_matches_mann_whitney():
    rng = np.random.default_rng(1)
    h, a = rng.normal(size=300), rng.normal(0.7, 1, size=300)
    want = np.mean(a[:, None] > h[None, :])
    assert auc(roc_from_scores(h, a)) == pytest.approx(want, abs=1e-12)


def test_dropped_trials_are_counted():
    honest = [_rec(0.0, False, None), _rec(1.0, False), _rec(-1.0, False)]
    attacked = [_rec(2.0, True, None), _rec(3.0, True, 5.0)]
    c = build_roc(honest, attacked, "conventional")
    assert (c.dropped_honest, c.dropped_attacked) == (1, 1)
    allc = build_roc(honest, attacked, "conventional", missing="no_detect")
    assert allc.detection[-2] == 0.5
    s = roc_summary(honest, attacked)
    assert set(s) == {"elsa", "elsa_all_trials", "conventional", "conventional_all_trials", "elsa_common_support"}
    assert detection_at(build_roc(honest, attacked, "elsa"), 0.0) == 1.0
    with pytest.raises(ValueError):
        build_roc([], attacked, "elsa")


def test_binomial_se():
    assert binomial_se(0.5, 100) == 0.05


# --------------------------------------------------------------------------- Xi

def test_xi_zero_without_attack():
    p = ScenarioParams(attack=AttackParams(0.0, 4e-8))
    rep = xi_term(Location(20, 30), CORNERS3, [True, False, True], p)
    assert rep.xi == 0.0 and rep.log_sum == 0.0 and rep.certificate


def test_xi_negative_at_defaults():
    rng = np.random.default_rng(3)
    p = ScenarioParams()
    for _ in range(200):
        pattern = list(rng.integers(0, 2, 3).astype(bool))
        rep = xi_term(Location(*rng.uniform(0, 100, 2)), CORNERS3, pattern, p)
        assert rep.xi < 0 and rep.certificate
        assert rep.n_audible == sum(pattern)


def test_xi_single_anchor_against_quadrature():
    p = ScenarioParams()
    ch = p.channel
    rep = xi_term(Location(50, 0), [Location(0, 0)], [True], p)
    assert rep.distances == (50.0,) and rep.shifted_distances == pytest.approx((62.0,))
    ratio = upper_tail_oracle(ch.lam, mean_rss(62.0, ch), ch.sigma_eps) / upper_tail_oracle(
        ch.lam, mean_rss(50.0, ch), ch.sigma_eps)
    want = 2 * 1e-16 * (1e-16 + 16e-16) * math.log(ratio)
    assert rep.xi == pytest.approx(want, rel=1e-10)


def test_negated_shift_is_detected():
    results = certify(300, 0, ScenarioParams(), negate_shift=True)
    assert any(not rep.certificate for rep, _ in results)
    assert all(rep.certificate for rep, _ in certify(300, 0, ScenarioParams()))


# --------------------------------------------------------------------------- Z statistic

def _one(anchors, delays):
    return ObservationVector(anchors, tuple(Observation(True, t) for t in delays))


def test_z_vanishes_for_null_attack():
    p = ScenarioParams(attack=AttackParams(0.0, 0.0))
    for t in (1e-7, 3e-7, -2e-8):
        assert z_statistic(_one(CORNERS3[:1], [t]), Location(30, 40), p) == 0.0


def test_z_matches_symbolic_expansion():
    t, psi, mu, sw, sd = sp.symbols("t psi mu sigma_w sigma_d", positive=True)
    s2 = sw ** 2 + sd ** 2
    # Log-ratio of the two Gaussian exponents, scaled by 2 sw^2 s^2; Z is its t-dependent part.
    scaled = sp.expand(2 * sw ** 2 * s2 * ((t - psi) ** 2 / (2 * sw ** 2) - (t - psi - mu) ** 2 / (2 * s2)))
    z_sym = sum(term for term in scaled.as_ordered_terms() if term.has(t))
    rng = np.random.default_rng(5)
    for _ in range(3):
        vals = dict(t=rng.uniform(1e-7, 4e-7), mu=rng.uniform(1e-8, 8e-8), sw=rng.uniform(5e-9, 3e-8),
                    sd=rng.uniform(1e-8, 8e-8))
        theta = Location(*rng.uniform(0, 100, 2))
        p = ScenarioParams(timing=TimingParams(sigma_w=vals["sw"]), attack=AttackParams(vals["mu"], vals["sd"]))
        psi_v = distance(theta, CORNERS3[0]) / 3e8
        want = float(z_sym.subs({t: vals["t"], psi: psi_v, mu: vals["mu"], sw: vals["sw"], sd: vals["sd"]}))
        assert z_statistic(_one(CORNERS3[:1], [vals["t"]]), theta, p) == pytest.approx(want, rel=1e-10)


def test_z_gamma_decision_equals_log_ratio_decision():
    rng = np.random.default_rng(6)
    p = ScenarioParams()
    for k in range(1000):
        theta = Location(*rng.uniform(0, 100, 2))
        psi = [distance(theta, a) / 3e8 for a in CORNERS3]
        delays = [ps + 1e-8 * rng.standard_normal() + (abs(4e-8 + 4e-8 * rng.standard_normal()) if k % 2 else 0)
                  for ps in psi]
        obs = _one(CORNERS3, delays)
        log_eta = rng.uniform(-10, 10)
        lr = fixed_location_log_ratio(obs, theta, p)
        z, g = z_statistic(obs, theta, p), z_threshold(obs, theta, log_eta, p)
        if abs(lr - log_eta) > 1e-6:
            assert (z > g) == (lr > log_eta)


def test_z_needs_audible_anchor():
    with pytest.raises(NoMeasurementsError):
        z_statistic(ObservationVector(CORNERS3[:1], (Observation(False),)), Location(1, 1), ScenarioParams())


def test_fixed_location_false_alarm_invariance():
    # At fixed theta and pattern the audibility part is a constant; shifting the
    # threshold by it gives identical exceedance under either hypothesis.
    p = ScenarioParams()
    theta, pattern = Location(30, 60), [True, True, False]
    xi = xi_term(theta, CORNERS3, pattern, p).xi
    obs_like = _one(CORNERS3[:2], [0.0, 0.0])
    gamma = z_threshold(obs_like, theta, 0.5, p)
    for hyp in (Hypothesis.H0, Hypothesis.H1):
        conv = fixed_location_exceedance(theta, CORNERS3, pattern, p, gamma, hyp, 2000, 9)
        elsa = fixed_location_exceedance(theta, CORNERS3, pattern, p, gamma + xi, hyp, 2000, 9, with_audibility=True)
        assert conv == elsa
    pf = fixed_location_exceedance(theta, CORNERS3, pattern, p, gamma, Hypothesis.H0, 2000, 9)
    pd = fixed_location_exceedance(theta, CORNERS3, pattern, p, gamma, Hypothesis.H1, 2000, 9)
    assert pd > pf


def test_detectors_constant():
    assert DETECTORS == ("elsa", "conventional")
    assert isinstance(build_roc([_rec(0, False)], [_rec(1, True)], "elsa"), RocCurve)
