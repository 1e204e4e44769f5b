"""Audibility-aware detection of TOA location-spoofing attacks (ELSA)."""
from elsa.adversary import AttackParams, inject_attack
from elsa.analysis import Scenario, auc, build_roc, certify, run_campaign, xi_term
from elsa.detector import DetectionOutcome, NoMeasurementsError, conventional_detect, elsa_detect
from elsa.inference import GridSpec, Hypothesis, ScenarioParams, log_joint, map_estimate
from elsa.model import (
    ChannelParams, Location, Observation, ObservationVector, Region, TimingParams,
    audibility_probability, simulate_observation,
)

__version__ = "0.1.0"

__all__ = [
    "AttackParams", "inject_attack", "Scenario", "auc", "build_roc", "certify", "run_campaign", "xi_term",
    "DetectionOutcome", "NoMeasurementsError", "conventional_detect", "elsa_detect", "GridSpec", "Hypothesis",
    "ScenarioParams", "log_joint", "map_estimate", "ChannelParams", "Location", "Observation", "ObservationVector",
    "Region", "TimingParams", "audibility_probability", "simulate_observation",
]
