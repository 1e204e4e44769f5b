"""Command-line experiment runner.

    elsa run --config cfg.json [--out DIR] [--seed N] [--threads N|auto]
    elsa certify-theorem --config cfg.json [--out DIR] [--seed N]
    elsa convert-dataset --out DIR (--synthetic | --positions-txt P --toa-txt T --rss-txt R)

Exit codes: 0 success, 1 certification/validation failure, 2 config error,
3 I/O error. Failures print one JSON error record on stderr.

Output schemas (column order is fixed):

    trials.csv        trial_id,seed,attacked,x_m,y_m,n_audible,audible_pattern,
                      log_lambda_elsa,log_lambda_conventional
    roc_<det>.csv     false_alarm_rate,detection_rate,log_eta
    xi_report.csv     trial_id,attacked,n_anchors,n_audible,xi,xi_log_sum,certificate
    sweeps.csv        sweep,value,detector,auc,pd_at_pf_0.02,pd_at_pf_0.05
    certify xi_report sample_id,n_anchors,n_audible,xi,xi_log_sum,certificate
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from elsa.analysis import (
    DETECTORS, XI_TOLERANCE, build_roc, certify, roc_summary, run_campaign, xi_term,
)
from elsa.config import ConfigError, ExperimentConfig, load_config, to_dict, with_overrides
from elsa.dataset import (
    DatasetError, convert_matrices, dataset_campaign, load_measurements, save_measurements, synthetic_replica,
)
from elsa.inference import GridSpec
from elsa.model import ChannelParams, TimingParams
from elsa.rng import derive_seed

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

TRIAL_COLUMNS = ["trial_id", "seed", "attacked", "x_m", "y_m", "n_audible", "audible_pattern",
                 "log_lambda_elsa", "log_lambda_conventional"]
ROC_COLUMNS = ["false_alarm_rate", "detection_rate", "log_eta"]
XI_COLUMNS = ["trial_id", "attacked", "n_anchors", "n_audible", "xi", "xi_log_sum", "certificate"]
SWEEP_COLUMNS = ["sweep", "value", "detector", "auc", "pd_at_pf_0.02", "pd_at_pf_0.05"]
CERT_COLUMNS = ["sample_id", "n_anchors", "n_audible", "xi", "xi_log_sum", "certificate"]


class _Failure(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _json_safe(obj):
    # JSON has no inf/nan; keep them as the strings Python's parser accepts back.
    if isinstance(obj, float) and not math.isfinite(obj):
        return "NaN" if math.isnan(obj) else ("Infinity" if obj > 0 else "-Infinity")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------- run

def _campaigns(cfg: ExperimentConfig, params=None, anchors=None):
    """(honest, attacked) trial records for the configured scenario or dataset."""
    params = params or cfg.params
    if cfg.scenario is not None:
        sc = cfg.campaign_scenario(params, anchors)
        honest = run_campaign(sc, cfg.n_trials, False, derive_seed(cfg.root_seed, 0), cfg.threads)
        attacked = run_campaign(sc, cfg.n_trials, True, derive_seed(cfg.root_seed, 1), cfg.threads)
        return honest, attacked, sc.anchors
    d = cfg.dataset
    if d.directory is not None:
        ms = load_measurements(cfg.resolve(d.directory))
    else:
        ms = load_measurements(cfg.resolve(d.positions_csv), cfg.resolve(d.measurements_csv))
    missing = [i for i in d.anchor_ids if i not in ms.index]
    if missing:
        raise ConfigError(f"dataset.anchor_ids not in the measurement set: {missing}")
    grid = GridSpec(ms.bounding_region(d.grid_margin), cfg.grid_step)
    kw = dict(grid=grid, params=params, seed=cfg.root_seed, target_ids=d.target_ids)
    honest = dataset_campaign(ms, d.anchor_ids, d.lambda_override, attacked=False, **kw)
    attacked = dataset_campaign(ms, d.anchor_ids, d.lambda_override, attacked=True,
                                n_attack_draws=d.n_attack_draws, **kw)
    if not honest:
        raise _Failure(EXIT_FAILED, "validation", "dataset yields no usable target")
    return honest, attacked, tuple(ms.position(i) for i in d.anchor_ids)


def _sweep_points(cfg: ExperimentConfig):
    p = cfg.params
    for v in cfg.sweeps.mu_delta:
        yield "mu_delta_s", v, replace(p, attack=replace(p.attack, mu_delta=v)), None
    for v in cfg.sweeps.sigma_eps_sq:
        yield "sigma_eps_sq_db2", v, replace(p, channel=replace(p.channel, sigma_eps=math.sqrt(v))), None
    for v in cfg.sweeps.sigma_w_sq:
        yield "sigma_w_sq_s2", v, replace(p, timing=replace(p.timing, sigma_w=math.sqrt(v))), None
    for anchors in cfg.sweeps.anchor_sets:
        yield "n_anchors", len(anchors), p, anchors


def run(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _Failure(EXIT_IO, "io", str(exc)) from None
    honest, attacked, anchors = _campaigns(cfg)
    records = honest + attacked

    _write_csv(out / "trials.csv", TRIAL_COLUMNS, (
        [r.trial_id, r.seed, r.attacked, r.true_location.x, r.true_location.y, r.n_audible,
         "".join("1" if a else "0" for a in r.audible), r.log_lambda_elsa, r.log_lambda_conventional]
        for r in records))
    for det in DETECTORS:
        c = build_roc(honest, attacked, det)
        _write_csv(out / f"roc_{det}.csv", ROC_COLUMNS, c.points)

    # Xi evaluated at the true location with each trial's realised audibility.
    xi_rows, xi_max = [], -math.inf
    for r in records:
        rep = xi_term(r.true_location, anchors, r.audible, cfg.params)
        xi_max = max(xi_max, rep.log_sum)
        xi_rows.append([r.trial_id, r.attacked, len(anchors), r.n_audible, rep.xi, rep.log_sum, rep.certificate])
    _write_csv(out / "xi_report.csv", XI_COLUMNS, xi_rows)

    sweep_rows, sweeps = [], []
    for name, value, params, sweep_anchors in _sweep_points(cfg):
        h, a, _ = _campaigns(cfg, params, sweep_anchors)
        s = roc_summary(h, a)
        sweeps.append({"sweep": name, "value": value, "roc": s})
        for det in DETECTORS:
            sweep_rows.append([name, value, det, s[det]["auc"], s[det]["pd_at_pf_0.02"], s[det]["pd_at_pf_0.05"]])
    if sweeps:
        _write_csv(out / "sweeps.csv", SWEEP_COLUMNS, sweep_rows)

    roc = roc_summary(honest, attacked)
    atk, tm = cfg.params.attack, cfg.params.timing
    summary = {
        "seed": cfg.root_seed,
        "config": to_dict(cfg),
        "n_honest": len(honest),
        "n_attacked": len(attacked),
        "auc_elsa": roc["elsa"]["auc"],
        "auc_conventional": roc["conventional"]["auc"],
        "roc": roc,
        "mu_delta_s": atk.mu_delta,
        "mu_delta_equivalent_m": atk.equivalent_distance(tm.v_p),
        "audible_count_histogram": _histogram(records),
        "xi": {"max_log_sum": xi_max, "all_certified": xi_max <= XI_TOLERANCE},
        "sweeps": sweeps,
    }
    _write_json(out / "summary.json", _json_safe(summary))
    return EXIT_OK


def _histogram(records) -> dict:
    h = {}
    for r in records:
        h[str(r.n_audible)] = h.get(str(r.n_audible), 0) + 1
    return dict(sorted(h.items(), key=lambda kv: int(kv[0])))


# --------------------------------------------------------------------------- certify-theorem

def certify_theorem(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _Failure(EXIT_IO, "io", str(exc)) from None
    c = cfg.certify
    if cfg.params.attack.mu_delta < 0:
        raise ConfigError("certify-theorem needs mu_delta_s >= 0")
    results = certify(c.n_samples, c.seed, cfg.params, c.spread, c.negate_shift)
    _write_csv(out / "xi_report.csv", CERT_COLUMNS, (
        [k, len(cf[1]), rep.n_audible, rep.xi, rep.log_sum, rep.certificate] for k, (rep, cf) in enumerate(results)))
    failures = [_config_record(k, rep, cf) for k, (rep, cf) in enumerate(results) if not rep.certificate]
    _write_json(out / "certify_summary.json", _json_safe({
        "n_samples": len(results), "n_failures": len(failures), "tolerance": XI_TOLERANCE,
        "max_log_sum": max(rep.log_sum for rep, _ in results), "seed": c.seed, "config": to_dict(cfg)}))
    if failures:
        _write_json(out / "xi_failures.json", _json_safe(failures))
        _error("certification", f"{len(failures)} of {len(results)} samples exceed tolerance",
               first=_json_safe(failures[0]))
        return EXIT_FAILED
    return EXIT_OK


def _config_record(k, rep, cf) -> dict:
    theta, anchors, audible, p = cf
    return {
        "sample_id": k, "xi": rep.xi, "xi_log_sum": rep.log_sum, "terms": list(rep.terms),
        "theta_m": [theta.x, theta.y], "anchors_m": [[a.x, a.y] for a in anchors], "audible": list(audible),
        "p_t_dbm": p.channel.p_t, "alpha": p.channel.alpha, "d_0_m": p.channel.d_0,
        "sigma_eps_db": p.channel.sigma_eps, "lambda_dbm": p.channel.lam,
        "v_p_m_per_s": p.timing.v_p, "sigma_w_s": p.timing.sigma_w,
        "mu_delta_s": p.attack.mu_delta, "sigma_delta_s": p.attack.sigma_delta,
    }


# --------------------------------------------------------------------------- convert-dataset

def convert_dataset(args, cfg: Optional[ExperimentConfig]) -> int:
    if args.out is None:
        raise ConfigError("convert-dataset needs --out")
    if args.synthetic:
        channel = cfg.params.channel if cfg else ChannelParams()
        timing = cfg.params.timing if cfg else TimingParams()
        seed = args.seed if args.seed is not None else (cfg.root_seed if cfg else 0)
        ms = synthetic_replica(seed, channel, timing, args.nodes, args.width_m, args.height_m)
    else:
        if not (args.positions_txt and args.toa_txt and args.rss_txt):
            raise ConfigError("give --synthetic or all of --positions-txt, --toa-txt, --rss-txt")
        ms = convert_matrices(args.positions_txt, args.toa_txt, args.rss_txt, toa_scale=args.toa_scale)
    save_measurements(ms, args.out)
    # Reload as the validation step: the written files must parse.
    load_measurements(args.out)
    return EXIT_OK


# --------------------------------------------------------------------------- entry point

def _error(kind: str, message: str, **extra):
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


def _threads(value: str) -> int:
    if value == "auto":
        return os.cpu_count() or 1
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("--threads takes a positive integer or 'auto'") from None
    if n < 1:
        raise argparse.ArgumentTypeError("--threads takes a positive integer or 'auto'")
    return n


def _seed(value: str) -> int:
    n = int(value)
    if not 0 <= n < 2 ** 64:
        raise argparse.ArgumentTypeError("--seed must fit in an unsigned 64-bit integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--out", help="output directory (overrides outputs.directory)")
    common.add_argument("--seed", type=_seed, help="root seed override")
    common.add_argument("--threads", type=_threads, help="worker threads, or 'auto'")

    p = argparse.ArgumentParser(prog="elsa", description="Audibility-aware TOA spoofing detection experiments")
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("run", parents=[common], help="Monte Carlo or dataset campaign")
    sub.add_parser("certify-theorem", parents=[common], help="numerical check that Xi <= 0")
    conv = sub.add_parser("convert-dataset", parents=[common], help="write the canonical two-CSV dataset")
    conv.add_argument("--synthetic", action="store_true", help="generate an office-scale replica instead")
    conv.add_argument("--nodes", type=int, default=44)
    conv.add_argument("--width-m", type=float, default=6.0)
    conv.add_argument("--height-m", type=float, default=6.0)
    conv.add_argument("--positions-txt")
    conv.add_argument("--toa-txt")
    conv.add_argument("--rss-txt")
    conv.add_argument("--toa-scale", type=float, default=1.0, help="multiply TOA cells by this to get seconds")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = None
        if args.config is not None:
            cfg = with_overrides(load_config(args.config), args.out, args.seed, args.threads)
        elif args.verb != "convert-dataset":
            raise ConfigError(f"{args.verb} needs --config")
        if args.verb == "run":
            return run(cfg)
        if args.verb == "certify-theorem":
            return certify_theorem(cfg)
        return convert_dataset(args, cfg)
    except _Failure as exc:
        _error(exc.kind, str(exc))
        return exc.code
    except (ConfigError, DatasetError, KeyError) as exc:
        _error("config" if not isinstance(exc, DatasetError) else "dataset", str(exc))
        return EXIT_CONFIG if not isinstance(exc, DatasetError) else EXIT_FAILED
    except OSError as exc:
        _error("io", str(exc))
        return EXIT_IO
    except ValueError as exc:
        _error("validation", str(exc))
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
