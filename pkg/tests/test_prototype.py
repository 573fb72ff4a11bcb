import numpy as np
import pytest

from fdiab.prototype import (
    PAPER_MEAN_SUPPRESSION_DB,
    PROTOTYPE_PATTERN,
    compare_prototype,
    reference_dataset,
    simulate_suppression_db,
)


def test_dataset_means_match_measured_values_exactly():
    ref = reference_dataset()
    for sep, mean_db in PAPER_MEAN_SUPPRESSION_DB.items():
        assert ref.mean_suppression_db(sep) == pytest.approx(mean_db, abs=1e-9)
        assert abs(ref.mean_suppression_db(sep) - mean_db) <= 0.01


def test_dataset_shape_and_flags():
    ref = reference_dataset()
    assert ref.separations() == [0.1, 1.0, 2.0]
    for sep in ref.separations():
        rows = [r for r in ref.rows if r.separation_m == sep]
        assert len(rows) == 36
        assert all(r.reconstructed for r in rows)
        spreads = [abs(r.suppression_db - PAPER_MEAN_SUPPRESSION_DB[sep]) for r in rows]
        assert max(spreads) <= 8.0


def test_dataset_deterministic():
    assert reference_dataset() == reference_dataset()


def test_prototype_pattern_values():
    assert PROTOTYPE_PATTERN.boresight_gain_dbi == 19.86
    assert PROTOTYPE_PATTERN.beamwidth_3db_deg == 13.4


def test_simulated_suppression_monotone_in_separation():
    sims = [
        np.mean([simulate_suppression_db(sep, az, seed=1) for az in range(-180, 180, 30)])
        for sep in (0.1, 1.0, 2.0)
    ]
    assert sims[0] < sims[1] < sims[2]


def test_compare_report_structure():
    rows, summary = compare_prototype(seed=0)
    assert len(rows) == 3 * 36
    assert set(summary) == {0.1, 1.0, 2.0}
    for sep, s in summary.items():
        assert s["measured_mean_db"] == pytest.approx(PAPER_MEAN_SUPPRESSION_DB[sep], abs=1e-9)
        assert s["delta_db"] == pytest.approx(s["simulated_mean_db"] - s["measured_mean_db"])
    sim_means = [summary[sep]["simulated_mean_db"] for sep in (0.1, 1.0, 2.0)]
    assert sim_means[0] < sim_means[1] < sim_means[2]
