"""ELSA (audibility-aware GLRT) and the conventional delay-only GLRT.

Both detectors share one MAP engine and one likelihood kernel. The baseline is
ELSA with every audibility term masked out, so the two statistics differ only
by what audibility contributes.
"""
from __future__ import annotations

from dataclasses import dataclass

from elsa.inference import (
    GridSpec, Hypothesis, MapEstimate, ScenarioParams, anchor_terms, likelihood_grid, log_prior,
)
from elsa.model import ObservationVector


class NoMeasurementsError(ValueError):
    """The delay-only test has nothing to decide on (no audible anchor)."""


@dataclass(frozen=True)
class DetectionOutcome:
    log_lambda: float
    threshold_log_eta: float
    spoofing_detected: bool
    map_h0: MapEstimate
    map_h1: MapEstimate
    # (delay_h0, delay_h1, audibility_h0, audibility_h1) per anchor
    per_anchor_terms: tuple[tuple[float, float, float, float], ...]


def _glrt(obs: ObservationVector, log_eta: float, grid: GridSpec, params: ScenarioParams,
          use_audibility: bool) -> DetectionOutcome:
    engine = likelihood_grid(obs.anchors, grid, params)
    map_h0 = engine.map_estimate(obs, Hypothesis.H0, use_audibility)
    map_h1 = engine.map_estimate(obs, Hypothesis.H1, use_audibility)
    t0 = anchor_terms(obs, map_h0.location, Hypothesis.H0, params, use_audibility)
    t1 = anchor_terms(obs, map_h1.location, Hypothesis.H1, params, use_audibility)
    terms = tuple((d0, d1, a0, a1) for (d0, a0), (d1, a1) in zip(t0, t1))
    log_lambda = sum((d1 - d0) + (a1 - a0) for d0, d1, a0, a1 in terms)
    log_lambda += log_prior(map_h1.location, grid.region) - log_prior(map_h0.location, grid.region)
    # Spoofing is declared when the ratio exceeds the threshold.
    return DetectionOutcome(log_lambda, log_eta, log_lambda > log_eta, map_h0, map_h1, terms)


def elsa_detect(obs: ObservationVector, log_eta: float, grid: GridSpec, params: ScenarioParams) -> DetectionOutcome:
    """Audibility-aware GLRT. Valid even when no anchor is audible."""
    return _glrt(obs, log_eta, grid, params, use_audibility=True)


def conventional_detect(obs: ObservationVector, log_eta: float, grid: GridSpec,
                        params: ScenarioParams) -> DetectionOutcome:
    """Delay-only GLRT over the audible anchors."""
    if obs.n_audible == 0:
        raise NoMeasurementsError("no measurements: every anchor is inaudible")
    return _glrt(obs, log_eta, grid, params, use_audibility=False)
