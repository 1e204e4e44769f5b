"""Spoofing-delay injection for honest observation vectors."""
from __future__ import annotations

from dataclasses import dataclass

from elsa.model import Observation, ObservationVector
from elsa.rng import anchor_generators


@dataclass(frozen=True)
class AttackParams:
    """Injected delay delta ~ N(mu_delta, sigma_delta^2), optionally folded to |delta|."""

    mu_delta: float = 4e-8
    sigma_delta: float = 4e-8
    positive_only: bool = True

    def __post_init__(self):
        if self.sigma_delta < 0:
            raise ValueError("sigma_delta must be non-negative")

    def equivalent_distance(self, v_p: float) -> float:
        """Mean attack delay expressed in meters."""
        return self.mu_delta * v_p


def draw_delays(atk: AttackParams, rng_seed: int, n: int) -> list[float]:
    out = []
    for rng in anchor_generators(rng_seed, n):
        delta = atk.mu_delta + atk.sigma_delta * rng.standard_normal()
        out.append(abs(delta) if atk.positive_only else delta)
    return out


def inject_attack(honest: ObservationVector, atk: AttackParams, rng_seed: int) -> ObservationVector:
    """Add one independent delay per audible anchor; audibility is left untouched."""
    deltas = draw_delays(atk, rng_seed, len(honest))
    obs = tuple(
        Observation(True, o.delay + delta, o.rss) if o.audible else o
        for o, delta in zip(honest.obs, deltas)
    )
    return ObservationVector(honest.anchors, obs)
