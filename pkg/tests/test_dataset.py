import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from elsa.adversary import AttackParams
from elsa.dataset import (
    DatasetScenario, DimensionMismatchError, DuplicateNodeError, EmptyObservationError, MeasurementSet,
    NonNumericCellError, attack_dataset_observation, convert_matrices, dataset_campaign, load_measurements,
    save_measurements, synthetic_replica, to_observation,
)
from elsa.detector import NoMeasurementsError, conventional_detect, elsa_detect
from elsa.inference import GridSpec, ScenarioParams
from elsa.model import Location


def write(tmp_path, positions, measurements):
    (tmp_path / "positions.csv").write_text(positions)
    (tmp_path / "measurements.csv").write_text(measurements)
    return tmp_path


def test_two_node_toy(tmp_path):
    d = write(tmp_path, "node_id,x_m,y_m\n1,0,0\n2,3.5,1e0\n",
              "tx_id,rx_id,toa_s,rss_dbm\n1,2,1.2e-8,-55.5\n2,1,1.3e-8,-56\n")
    ms = load_measurements(d)
    assert ms.node_ids == (1, 2) and ms.position(2) == Location(3.5, 1.0)
    assert ms.present().sum() == 2
    assert ms.toa[1, 0] == 1.3e-8 and ms.rss[0, 1] == -55.5


def test_absent_cell_is_missing_not_zero(tmp_path):
    d = write(tmp_path, "node_id,x_m,y_m\n1,0,0\n2,1,1\n", "tx_id,rx_id,toa_s,rss_dbm\n1,2,,-50\n")
    ms = load_measurements(d)
    assert np.isnan(ms.toa[0, 1]) and ms.rss[0, 1] == -50
    assert np.isnan(ms.toa[1, 0]) and np.isnan(ms.rss[1, 0])


@pytest.mark.parametrize("pos, meas, err", [
    ("node_id,x_m,y_m\n1,0,0\n1,1,1\n", "tx_id,rx_id,toa_s,rss_dbm\n", DuplicateNodeError),
    ("node_id,x_m,y_m\n1,0,0\n2,1,1\n", "tx_id,rx_id,toa_s,rss_dbm\n1,2,abc,-50\n", NonNumericCellError),
    ("node_id,x_m,y_m\n1,0,zero\n", "tx_id,rx_id,toa_s,rss_dbm\n", NonNumericCellError),
    ("node_id,x_m,y_m\n1,0,0\n2,1,1\n", "tx_id,rx_id,toa_s,rss_dbm\n1,2,1e-8\n", DimensionMismatchError),
    ("node_id,x_m,y_m\n1,0,0\n2,1,1\n", "tx_id,rx_id,toa_s,rss_dbm\n1,3,1e-8,-50\n", DimensionMismatchError),
    ("id,x,y\n1,0,0\n", "tx_id,rx_id,toa_s,rss_dbm\n", DimensionMismatchError),
    ("node_id,x_m,y_m\n1,0,0\n2,1,1\n", "tx_id,rx_id,toa_s,rss_dbm\n1,2,1e-8,-50\n1,2,1e-8,-50\n", DuplicateNodeError),
])
def test_parse_errors_are_distinct(tmp_path, pos, meas, err):
    with pytest.raises(err):
        load_measurements(write(tmp_path, pos, meas))


def test_measurement_set_shape_checks():
    with pytest.raises(DimensionMismatchError):
        MeasurementSet((1, 2), (Location(0, 0), Location(1, 1)), np.zeros((3, 3)), np.zeros((2, 2)))


def test_synthetic_round_trip_is_bit_exact(tmp_path):
    ms = synthetic_replica(4)
    assert len(ms.node_ids) == 44
    save_measurements(ms, tmp_path)
    back = load_measurements(tmp_path)
    assert back.node_ids == ms.node_ids and back.node_positions == ms.node_positions
    for a, b in ((ms.toa, back.toa), (ms.rss, back.rss)):
        assert np.array_equal(np.isnan(a), np.isnan(b))
        assert np.array_equal(a[~np.isnan(a)], b[~np.isnan(b)])


def _fixture():
    # Target 4; anchors 1-3 hear it at -60, -70, -70 dBm.
    n = 4
    toa, rss = np.full((n, n), np.nan), np.full((n, n), np.nan)
    for i, p in zip(range(3), (-60.0, -70.0, -70.0)):
        rss[i, 3], toa[i, 3] = p, 1e-8 * (i + 1)
    rss[3, 0] = -10.0  # reverse direction must be ignored
    pos = (Location(0, 0), Location(6, 0), Location(0, 6), Location(2, 2))
    return MeasurementSet((1, 2, 3, 4), pos, toa, rss)


def test_threshold_examples():
    ms = _fixture()
    one = to_observation(ms, DatasetScenario((1, 2, 3), 4, -61.0))
    assert list(one.audible) == [True, False, False]
    assert one.obs[0].delay == 1e-8 and one.obs[0].rss == -60.0
    assert to_observation(ms, DatasetScenario((1, 2, 3), 4, -math.inf)).n_audible == 3
    none = to_observation(ms, DatasetScenario((1, 2, 3), 4, math.inf))
    assert none.n_audible == 0
    grid, p = GridSpec(ms.bounding_region(), 0.5), ScenarioParams()
    assert math.isfinite(elsa_detect(none, 0.0, grid, p).log_lambda)
    with pytest.raises(NoMeasurementsError):
        conventional_detect(none, 0.0, grid, p)


def test_audible_needs_toa_and_rss():
    ms = _fixture()
    ms.toa[1, 3] = np.nan
    obs = to_observation(ms, DatasetScenario((1, 2, 3), 4, -math.inf))
    assert list(obs.audible) == [True, False, True]


def test_empty_target_row():
    ms = _fixture()
    with pytest.raises(EmptyObservationError):
        to_observation(ms, DatasetScenario((2, 3), 1, -61.0))
    with pytest.raises(ValueError):
        DatasetScenario((1, 2), 2, -61.0)
    with pytest.raises(ValueError):
        DatasetScenario((1, 1), 2, -61.0)


@given(st.floats(-120, -30), st.floats(0, 40), st.integers(0, 50))
def test_lowering_lambda_never_removes_audible_anchors(lam, drop, seed):
    ms = synthetic_replica(seed % 5)
    sc_hi = DatasetScenario((10, 35, 44), 1 + seed % 9, lam)
    sc_lo = DatasetScenario((10, 35, 44), 1 + seed % 9, lam - drop)
    assert to_observation(ms, sc_lo).n_audible >= to_observation(ms, sc_hi).n_audible


def test_attack_delegates_to_injection():
    obs = to_observation(_fixture(), DatasetScenario((1, 2, 3), 4, -80.0))
    out = attack_dataset_observation(obs, AttackParams(1.5e-8, 0.0), 1)
    assert [o.delay - h.delay for o, h in zip(out.obs, obs.obs)] == pytest.approx([1.5e-8] * 3)
    assert np.array_equal(out.audible, obs.audible)


def test_convert_matrices(tmp_path):
    np.savetxt(tmp_path / "pos.txt", [[0, 0], [4, 0], [0, 3]])
    toa = np.array([[np.nan, 13.3, 10.0], [13.4, np.nan, 16.7], [10.1, 16.6, np.nan]])
    rss = np.array([[np.nan, -50, -48], [-51, np.nan, -55], [-47, -56, np.nan]])
    np.savetxt(tmp_path / "toa.txt", toa)
    np.savetxt(tmp_path / "rss.txt", rss)
    ms = convert_matrices(tmp_path / "pos.txt", tmp_path / "toa.txt", tmp_path / "rss.txt", toa_scale=1e-9)
    assert ms.node_ids == (1, 2, 3) and ms.toa[0, 1] == pytest.approx(13.3e-9)
    save_measurements(ms, tmp_path / "out")
    assert load_measurements(tmp_path / "out").present().sum() == 6


def test_replica_pipeline_runs_and_mixes_audibility(tmp_path):
    save_measurements(synthetic_replica(2), tmp_path)
    ms = load_measurements(tmp_path)
    counts = [to_observation(ms, DatasetScenario((10, 35, 44), t, -61.0)).n_audible
              for t in ms.node_ids if t not in (10, 35, 44)]
    assert len(set(counts)) >= 3
    p = ScenarioParams(attack=AttackParams(1.5e-8, 4e-8))
    grid = GridSpec(ms.bounding_region(), 0.25)
    recs = dataset_campaign(ms, (10, 35, 44), -61.0, grid, p, attacked=True, n_attack_draws=2, seed=1)
    assert len(recs) == 2 * len(counts)
    assert all(math.isfinite(r.log_lambda_elsa) for r in recs)
