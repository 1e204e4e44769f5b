"""Pairwise TOA/RSS measurement sets and their conversion into observation vectors.

On-disk format is two UTF-8 CSV files with header rows:

    positions.csv      node_id,x_m,y_m
    measurements.csv   tx_id,rx_id,toa_s,rss_dbm

An empty ``toa_s`` or ``rss_dbm`` field, or a pair with no row at all, means the
measurement is missing. Entry ``[tx, rx]`` of a matrix is the measurement made
on the tx -> rx link; observations use the anchor -> target direction.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from elsa.adversary import AttackParams, inject_attack
from elsa.analysis import evaluate
from elsa.inference import GridSpec, ScenarioParams
from elsa.model import (
    ChannelParams, Location, Observation, ObservationVector, Region, TimingParams, distance, mean_rss,
)
from elsa.rng import derive_seed

POSITIONS_FILE = "positions.csv"
MEASUREMENTS_FILE = "measurements.csv"
POSITION_COLUMNS = ["node_id", "x_m", "y_m"]
MEASUREMENT_COLUMNS = ["tx_id", "rx_id", "toa_s", "rss_dbm"]


class DatasetError(ValueError):
    pass


class DimensionMismatchError(DatasetError):
    pass


class NonNumericCellError(DatasetError):
    pass


class DuplicateNodeError(DatasetError):
    pass


class EmptyObservationError(DatasetError):
    pass


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    node_ids: tuple[int, ...]
    node_positions: tuple[Location, ...]
    toa: np.ndarray   # seconds, NaN where missing
    rss: np.ndarray   # dBm, NaN where missing

    def __post_init__(self):
        n = len(self.node_ids)
        if len(set(self.node_ids)) != n:
            raise DuplicateNodeError("duplicate node ids")
        if len(self.node_positions) != n or self.toa.shape != (n, n) or self.rss.shape != (n, n):
            raise DimensionMismatchError("matrices must be square and match the node count")

    @property
    def index(self) -> dict[int, int]:
        return {nid: k for k, nid in enumerate(self.node_ids)}

    def position(self, node_id: int) -> Location:
        return self.node_positions[self.index[node_id]]

    def present(self) -> np.ndarray:
        """Off-diagonal pairs with at least one measurement."""
        m = ~(np.isnan(self.toa) & np.isnan(self.rss))
        np.fill_diagonal(m, False)
        return m

    def bounding_region(self, margin: float = 0.0) -> Region:
        xs = [p.x for p in self.node_positions]
        ys = [p.y for p in self.node_positions]
        return Region(min(xs) - margin, max(xs) + margin, min(ys) - margin, max(ys) + margin)


@dataclass(frozen=True)
class DatasetScenario:
    anchor_ids: tuple[int, ...]
    target_id: int
    lambda_override: float

    def __post_init__(self):
        if len(set(self.anchor_ids)) != len(self.anchor_ids):
            raise ValueError("anchor ids must be distinct")
        if self.target_id in self.anchor_ids:
            raise ValueError("target cannot also be an anchor")


def _number(cell: str, where: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise NonNumericCellError(f"non-numeric cell {cell!r} at {where}") from None
    if math.isnan(v):
        raise NonNumericCellError(f"NaN cell at {where}; leave the field empty for missing values")
    return v


def _node_id(cell: str, where: str) -> int:
    v = _number(cell, where)
    if v != int(v):
        raise NonNumericCellError(f"node id {cell!r} at {where} is not an integer")
    return int(v)


def _rows(path: Path, columns: list[str]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != columns:
            raise DimensionMismatchError(f"{path.name}: expected header {','.join(columns)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(columns):
                raise DimensionMismatchError(f"{path.name}:{lineno}: expected {len(columns)} fields, got {len(row)}")
            yield lineno, [c.strip() for c in row]


def _resolve(path, measurements=None) -> tuple[Path, Path]:
    path = Path(path)
    if measurements is not None:
        return path, Path(measurements)
    return path / POSITIONS_FILE, path / MEASUREMENTS_FILE


def load_measurements(path, measurements=None) -> MeasurementSet:
    """Load a measurement set from a directory holding both CSVs, or from two explicit paths."""
    pos_path, meas_path = _resolve(path, measurements)
    ids, positions = [], []
    for lineno, (nid, x, y) in _rows(pos_path, POSITION_COLUMNS):
        where = f"{pos_path.name}:{lineno}"
        node = _node_id(nid, where)
        if node in ids:
            raise DuplicateNodeError(f"{where}: node id {node} repeated")
        ids.append(node)
        positions.append(Location(_number(x, where), _number(y, where)))
    index = {nid: k for k, nid in enumerate(ids)}
    n = len(ids)
    toa = np.full((n, n), np.nan)
    rss = np.full((n, n), np.nan)
    seen = set()
    for lineno, (tx, rx, t, p) in _rows(meas_path, MEASUREMENT_COLUMNS):
        where = f"{meas_path.name}:{lineno}"
        tx, rx = _node_id(tx, where), _node_id(rx, where)
        if tx not in index or rx not in index:
            raise DimensionMismatchError(f"{where}: pair ({tx}, {rx}) references an unknown node")
        if (tx, rx) in seen:
            raise DuplicateNodeError(f"{where}: pair ({tx}, {rx}) repeated")
        seen.add((tx, rx))
        i, j = index[tx], index[rx]
        if t:
            toa[i, j] = _number(t, where)
        if p:
            rss[i, j] = _number(p, where)
    return MeasurementSet(tuple(ids), tuple(positions), toa, rss)


def save_measurements(ms: MeasurementSet, directory) -> tuple[Path, Path]:
    """Write the two canonical CSVs; floats use repr so a reload is bit-exact."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pos_path, meas_path = directory / POSITIONS_FILE, directory / MEASUREMENTS_FILE

    def cell(v):
        return "" if math.isnan(v) else repr(float(v))

    with open(pos_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POSITION_COLUMNS)
        for nid, p in zip(ms.node_ids, ms.node_positions):
            w.writerow([nid, repr(float(p.x)), repr(float(p.y))])
    present = ms.present()
    with open(meas_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEASUREMENT_COLUMNS)
        for i, tx in enumerate(ms.node_ids):
            for j, rx in enumerate(ms.node_ids):
                if present[i, j]:
                    w.writerow([tx, rx, cell(ms.toa[i, j]), cell(ms.rss[i, j])])
    return pos_path, meas_path


def to_observation(ms: MeasurementSet, sc: DatasetScenario) -> ObservationVector:
    """Threshold the anchor -> target RSS at ``lambda_override`` to decide audibility.

    An anchor is audible only when both its RSS (>= lambda) and TOA are present.
    """
    idx = ms.index
    for nid in (*sc.anchor_ids, sc.target_id):
        if nid not in idx:
            raise KeyError(f"unknown node id {nid}")
    j = idx[sc.target_id]
    anchor_rows = [idx[a] for a in sc.anchor_ids]
    if all(np.isnan(ms.toa[i, j]) and np.isnan(ms.rss[i, j]) for i in anchor_rows):
        raise EmptyObservationError(f"no anchor has any measurement of target {sc.target_id}")
    obs = []
    for i in anchor_rows:
        p, t = ms.rss[i, j], ms.toa[i, j]
        if not np.isnan(p) and not np.isnan(t) and p >= sc.lambda_override:
            obs.append(Observation(True, float(t), float(p)))
        else:
            obs.append(Observation(False))
    return ObservationVector(tuple(ms.node_positions[i] for i in anchor_rows), tuple(obs))


def attack_dataset_observation(obs: ObservationVector, atk: AttackParams, seed: int) -> ObservationVector:
    return inject_attack(obs, atk, seed)


def convert_matrices(positions_txt, toa_txt, rss_txt, node_ids: Optional[Sequence[int]] = None,
                     toa_scale: float = 1.0) -> MeasurementSet:
    """Build a measurement set from whitespace-separated matrix files.

    This covers archives distributed as an ``n x 2`` position table plus two
    ``n x n`` matrices (row = transmitter, column = receiver). Missing cells
    must be ``nan``. ``toa_scale`` converts the TOA unit to seconds (1e-9 for ns).
    Node ids default to 1..n, the numbering used when naming anchors.
    """
    pos = np.atleast_2d(np.loadtxt(positions_txt, dtype=float))
    toa = np.atleast_2d(np.loadtxt(toa_txt, dtype=float)) * toa_scale
    rss = np.atleast_2d(np.loadtxt(rss_txt, dtype=float))
    n = pos.shape[0]
    if pos.shape[1] < 2:
        raise DimensionMismatchError("positions need x and y columns")
    ids = tuple(range(1, n + 1)) if node_ids is None else tuple(int(i) for i in node_ids)
    return MeasurementSet(ids, tuple(Location(float(x), float(y)) for x, y in pos[:, :2]), toa, rss)


def synthetic_replica(seed: int, channel: ChannelParams = ChannelParams(), timing: TimingParams = TimingParams(),
                      n_nodes: int = 44, width: float = 6.0, height: float = 6.0,
                      corner_ids: Sequence[int] = (10, 35, 44, 1)) -> MeasurementSet:
    """Office-scale stand-in for a measured testbed, generated by the forward model.

    The ``corner_ids`` nodes sit at the corners; the rest are scattered
    uniformly. Every ordered pair gets an independent RSS and TOA draw.
    """
    rng = np.random.default_rng(seed)
    corners = [(0.0, 0.0), (width, 0.0), (0.0, height), (width, height)]
    pos = {nid: Location(*xy) for nid, xy in zip(corner_ids, corners)}
    for nid in range(1, n_nodes + 1):
        if nid not in pos:
            pos[nid] = Location(float(rng.uniform(0, width)), float(rng.uniform(0, height)))
    ids = tuple(range(1, n_nodes + 1))
    locs = tuple(pos[i] for i in ids)
    d = np.array([[distance(a, b) for b in locs] for a in locs])
    rss = mean_rss(d, channel) + channel.sigma_eps * rng.standard_normal((n_nodes, n_nodes))
    toa = d / timing.v_p + timing.sigma_w * rng.standard_normal((n_nodes, n_nodes))
    np.fill_diagonal(rss, np.nan)
    np.fill_diagonal(toa, np.nan)
    return MeasurementSet(ids, locs, toa, rss)


def dataset_campaign(ms: MeasurementSet, anchor_ids: Sequence[int], lambda_override: float, grid: GridSpec,
                     params: ScenarioParams, attacked: bool, n_attack_draws: int = 1, seed: int = 0,
                     target_ids: Optional[Sequence[int]] = None):
    """Trial records for every (target, attack draw); honest runs use each target once.

    Targets whose observation would be empty are skipped.
    """
    targets = [i for i in (target_ids or ms.node_ids) if i not in anchor_ids]
    records = []
    for tid in targets:
        try:
            obs = to_observation(ms, DatasetScenario(tuple(anchor_ids), tid, lambda_override))
        except EmptyObservationError:
            continue
        draws = range(n_attack_draws) if attacked else range(1)
        for k in draws:
            s = derive_seed(seed, tid, k)
            o = attack_dataset_observation(obs, params.attack, s) if attacked else obs
            records.append(evaluate(o, grid, params, len(records), s, ms.position(tid), attacked))
    return records
