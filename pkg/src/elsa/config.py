"""Experiment configuration: JSON file <-> dataclasses.

Keys carry their unit as a suffix (``_s``, ``_m``, ``_dbm``, ...). ``lambda_dbm``
and ``lambda_override_dbm`` may be infinite, written either as the bare
``-Infinity`` token or as the string ``"-Infinity"``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from elsa.adversary import AttackParams
from elsa.analysis import Scenario
from elsa.inference import GridSpec, ScenarioParams
from elsa.model import ChannelParams, Location, Region, TimingParams

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    region: Region
    anchors: tuple[Location, ...]
    target: Optional[Location] = None     # None: uniform over the region
    audible_zone: Optional[int] = None


@dataclass(frozen=True)
class DatasetConfig:
    anchor_ids: tuple[int, ...]
    lambda_override: float
    positions_csv: Optional[str] = None
    measurements_csv: Optional[str] = None
    directory: Optional[str] = None
    target_ids: Optional[tuple[int, ...]] = None
    n_attack_draws: int = 5
    grid_margin: float = 0.0


@dataclass(frozen=True)
class SweepConfig:
    mu_delta: tuple[float, ...] = ()
    sigma_eps_sq: tuple[float, ...] = ()
    sigma_w_sq: tuple[float, ...] = ()
    anchor_sets: tuple[tuple[Location, ...], ...] = ()

    def __bool__(self):
        return bool(self.mu_delta or self.sigma_eps_sq or self.sigma_w_sq or self.anchor_sets)


@dataclass(frozen=True)
class CertifyConfig:
    n_samples: int = 10_000
    seed: int = 0
    spread: float = 4.0
    negate_shift: bool = False   # mutation hook: must make certification fail


@dataclass(frozen=True)
class ExperimentConfig:
    params: ScenarioParams
    grid_step: float
    n_trials: int
    root_seed: int
    output_dir: str
    scenario: Optional[ScenarioConfig] = None
    dataset: Optional[DatasetConfig] = None
    sweeps: SweepConfig = field(default_factory=SweepConfig)
    certify: CertifyConfig = field(default_factory=CertifyConfig)
    threads: int = 1
    base_dir: str = "."

    def campaign_scenario(self, params: Optional[ScenarioParams] = None,
                          anchors: Optional[tuple[Location, ...]] = None) -> Scenario:
        sc = self.scenario
        return Scenario(anchors or sc.anchors, GridSpec(sc.region, self.grid_step), params or self.params,
                        sc.target, sc.audible_zone)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p


def _get(d: dict, key: str, where: str, default=...):
    if key in d:
        return d[key]
    if default is ...:
        raise ConfigError(f"missing key {where}.{key}")
    return default


def _num(d, key, where, default=..., positive=False, finite=True):
    v = _get(d, key, where, default)
    if not finite and v in ("Infinity", "-Infinity"):
        v = float(v)    # strict-JSON spelling, as written back by the summary echo
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    v = float(v)
    if finite and not math.isfinite(v):
        raise ConfigError(f"{where}.{key} must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key} must be positive")
    return v


def _int(d, key, where, default=..., minimum=None):
    v = _get(d, key, where, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key} must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where}.{key} must be >= {minimum}")
    return v


def _points(raw, where) -> tuple[Location, ...]:
    try:
        pts = tuple(Location(float(x), float(y)) for x, y in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} must be a list of [x, y] pairs: {exc}") from None
    if not pts:
        raise ConfigError(f"{where} must not be empty")
    return pts


def _positive_list(d, key, where):
    vals = tuple(float(v) for v in d.get(key, []))
    if any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise ConfigError(f"sweeps.{key} values must be positive")
    return vals


def parse_config(raw: dict, base_dir: str = ".") -> ExperimentConfig:
    try:
        return _parse(raw, base_dir)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError, AttributeError) as exc:
        raise ConfigError(str(exc)) from None


def _parse(raw: dict, base_dir: str) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    if ("scenario" in raw) == ("dataset" in raw):
        raise ConfigError("exactly one of 'scenario' or 'dataset' must be present")

    c = raw.get("channel", {})
    channel = ChannelParams(
        _num(c, "p_t_dbm", "channel", -40.0), _num(c, "alpha", "channel", 3.2, positive=True),
        _num(c, "d_0_m", "channel", 1.0, positive=True),
        _num(c, "sigma_eps_db", "channel", math.sqrt(10.0), positive=True),
        _num(c, "lambda_dbm", "channel", -102.0, finite=False),
    )
    t = raw.get("timing", {})
    timing = TimingParams(_num(t, "v_p_m_per_s", "timing", 3e8, positive=True),
                          _num(t, "sigma_w_s", "timing", 1e-8, positive=True))
    a = raw.get("attack", {})
    attack = AttackParams(_num(a, "mu_delta_s", "attack", 4e-8), _num(a, "sigma_delta_s", "attack", 4e-8),
                          bool(a.get("positive_only", True)))
    if attack.sigma_delta < 0:
        raise ConfigError("attack.sigma_delta_s must be non-negative")
    det = raw.get("detector", {})
    params = ScenarioParams(channel, timing, attack, bool(det.get("h1_audibility_shift", False)))

    g = raw.get("grid", {})
    camp = raw.get("campaign", {})
    out = raw.get("outputs", {})

    scenario = dataset = None
    if "scenario" in raw:
        s = raw["scenario"]
        r = _get(s, "region", "scenario")
        region = Region(_num(r, "x_min_m", "region"), _num(r, "x_max_m", "region"),
                        _num(r, "y_min_m", "region"), _num(r, "y_max_m", "region"))
        tgt = s.get("target", {"policy": "uniform"})
        policy = tgt.get("policy")
        if policy == "uniform":
            target = None
        elif policy == "fixed":
            target = Location(_num(tgt, "x_m", "target"), _num(tgt, "y_m", "target"))
        else:
            raise ConfigError("scenario.target.policy must be 'uniform' or 'fixed'")
        zone = s.get("audible_zone")
        if zone is not None:
            zone = _int(s, "audible_zone", "scenario", minimum=0)
        scenario = ScenarioConfig(region, _points(_get(s, "anchors_m", "scenario"), "scenario.anchors_m"), target, zone)
    else:
        d = raw["dataset"]
        ids = tuple(int(i) for i in _get(d, "anchor_ids", "dataset"))
        targets = d.get("target_ids")
        if not ("directory" in d or ("positions_csv" in d and "measurements_csv" in d)):
            raise ConfigError("dataset needs 'directory' or both 'positions_csv' and 'measurements_csv'")
        dataset = DatasetConfig(
            ids, _num(d, "lambda_override_dbm", "dataset", finite=False),
            d.get("positions_csv"), d.get("measurements_csv"), d.get("directory"),
            None if targets is None else tuple(int(i) for i in targets),
            _int(d, "n_attack_draws", "dataset", 5, minimum=1), _num(d, "grid_margin_m", "dataset", 0.0),
        )

    sw = raw.get("sweeps", {}) or {}
    sweeps = SweepConfig(
        _positive_list(sw, "mu_delta_s", "sweeps"), _positive_list(sw, "sigma_eps_sq_db2", "sweeps"),
        _positive_list(sw, "sigma_w_sq_s2", "sweeps"),
        tuple(_points(p, "sweeps.anchor_sets_m") for p in sw.get("anchor_sets_m", [])),
    )
    if sweeps.anchor_sets and dataset is not None:
        raise ConfigError("anchor_sets_m sweeps need a synthetic scenario")
    cf = raw.get("certify", {})
    certify = CertifyConfig(_int(cf, "n_samples", "certify", 10_000, minimum=1), _int(cf, "seed", "certify", 0),
                            _num(cf, "spread", "certify", 4.0, positive=True), bool(cf.get("negate_shift", False)))
    return ExperimentConfig(
        params=params,
        grid_step=_num(g, "step_m", "grid", 1.0, positive=True),
        n_trials=_int(camp, "n_trials", "campaign", 1000, minimum=1),
        root_seed=_int(camp, "root_seed", "campaign", 0, minimum=0),
        output_dir=str(out.get("directory", "out")),
        scenario=scenario, dataset=dataset, sweeps=sweeps, certify=certify,
        threads=_int(camp, "threads", "campaign", 1, minimum=1),
        base_dir=base_dir,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(raw, str(path.parent))


def _pt(p: Location) -> list[float]:
    return [p.x, p.y]


def to_dict(cfg: ExperimentConfig) -> dict:
    """Complete, normalised config; ``parse_config(to_dict(cfg))`` reproduces ``cfg``."""
    ch, tm, atk = cfg.params.channel, cfg.params.timing, cfg.params.attack
    out = {
        "schema_version": SCHEMA_VERSION,
        "channel": {"p_t_dbm": ch.p_t, "alpha": ch.alpha, "d_0_m": ch.d_0, "sigma_eps_db": ch.sigma_eps,
                    "lambda_dbm": ch.lam},
        "timing": {"v_p_m_per_s": tm.v_p, "sigma_w_s": tm.sigma_w},
        "attack": {"mu_delta_s": atk.mu_delta, "sigma_delta_s": atk.sigma_delta,
                   "positive_only": atk.positive_only},
        "detector": {"h1_audibility_shift": cfg.params.h1_audibility_shift},
        "grid": {"step_m": cfg.grid_step},
        "campaign": {"n_trials": cfg.n_trials, "root_seed": cfg.root_seed, "threads": cfg.threads},
        "sweeps": {"mu_delta_s": list(cfg.sweeps.mu_delta), "sigma_eps_sq_db2": list(cfg.sweeps.sigma_eps_sq),
                   "sigma_w_sq_s2": list(cfg.sweeps.sigma_w_sq),
                   "anchor_sets_m": [[_pt(p) for p in s] for s in cfg.sweeps.anchor_sets]},
        "certify": asdict(cfg.certify),
        "outputs": {"directory": cfg.output_dir},
    }
    if cfg.scenario is not None:
        sc = cfg.scenario
        r = sc.region
        out["scenario"] = {
            "region": {"x_min_m": r.x_min, "x_max_m": r.x_max, "y_min_m": r.y_min, "y_max_m": r.y_max},
            "anchors_m": [_pt(p) for p in sc.anchors],
            "target": {"policy": "uniform"} if sc.target is None
            else {"policy": "fixed", "x_m": sc.target.x, "y_m": sc.target.y},
            "audible_zone": sc.audible_zone,
        }
    else:
        d = cfg.dataset
        entry = {"anchor_ids": list(d.anchor_ids), "lambda_override_dbm": d.lambda_override,
                 "target_ids": None if d.target_ids is None else list(d.target_ids),
                 "n_attack_draws": d.n_attack_draws, "grid_margin_m": d.grid_margin}
        # Paths are echoed resolved so the echo runs from any directory.
        for key in ("directory", "positions_csv", "measurements_csv"):
            v = getattr(d, key)
            if v is not None:
                entry[key] = str(cfg.resolve(v).resolve())
        out["dataset"] = entry
    return out


def with_overrides(cfg: ExperimentConfig, out: Optional[str] = None, seed: Optional[int] = None,
                   threads: Optional[int] = None) -> ExperimentConfig:
    if out is not None:
        cfg = replace(cfg, output_dir=out)
    if seed is not None:
        cfg = replace(cfg, root_seed=seed, certify=replace(cfg.certify, seed=seed))
    if threads is not None:
        cfg = replace(cfg, threads=threads)
    return cfg
