import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from panoflow.epof import (
    EpofSample,
    HeadSample,
    epof,
    epof_trace,
    hold_orientation,
    overlap_weighted_mean,
    session_summary,
)
from panoflow.errors import GridMatrixMismatchError, ValidationError
from panoflow.flow import FlowMatrix
from panoflow.grid import build_grid, overlapping_windows

GRID = build_grid(107, 107, 15, 7.5)


def make_matrix(values=None, n_frames=10, fill=0.0, grid=GRID):
    if values is None:
        values = np.full((grid.n_windows, n_frames), fill, dtype=np.float32)
    return FlowMatrix(values=values, grid_hash=grid.spec_hash, fps=60.0)


def matrix_with_window_values(assignments: dict[int, float], n_frames=4, grid=GRID):
    values = np.zeros((grid.n_windows, n_frames), dtype=np.float32)
    for wid, val in assignments.items():
        values[wid] = val
    return make_matrix(values, grid=grid)


class TestOverlapWeightedMean:
    def test_worked_four_window_example(self):
        est = overlap_weighted_mean([16.0, 15.5, 16.8, 17.0], [0.90, 0.88, 0.85, 0.80])
        assert est == pytest.approx(16.3, abs=0.05)

    def test_single_value(self):
        assert overlap_weighted_mean([5.0], [0.3]) == 5.0

    @given(st.lists(st.floats(0, 100), min_size=1, max_size=8))
    def test_constant_values_ignore_weights(self, weights):
        weights = [w + 0.01 for w in weights]
        values = [7.25] * len(weights)
        assert overlap_weighted_mean(values, weights) == pytest.approx(7.25)

    def test_zero_weights_rejected(self):
        with pytest.raises(ValidationError):
            overlap_weighted_mean([1.0], [0.0])


class TestEpof:
    def test_matches_definitional_average(self):
        rng = np.random.default_rng(8)
        values = rng.uniform(0, 20, (GRID.n_windows, 6)).astype(np.float32)
        m = make_matrix(values)
        for _ in range(50):
            yaw = float(rng.uniform(-180, 180))
            pitch = float(rng.uniform(-60, 60))
            frame = int(rng.integers(6))
            sample = epof((yaw, pitch), frame, m, GRID)
            pairs = overlapping_windows((yaw, pitch), GRID, 4)
            expected = overlap_weighted_mean(
                [float(values[w, frame]) for w, f in pairs if f > 0],
                [f for _, f in pairs if f > 0],
            )
            assert sample.epof == pytest.approx(expected, rel=1e-12)
            assert sample.window_ids == tuple(w for w, f in pairs if f > 0)

    def test_single_window_k1(self):
        m = matrix_with_window_values({GRID.centers.index((0.0, 0.0)): 5.0})
        sample = epof((0.0, 0.0), 1, m, GRID, k=1)
        assert sample.epof == 5.0
        assert sample.weights == (1.0,)

    def test_constant_windows_any_weights(self):
        m = make_matrix(fill=3.5)
        for yaw, pitch in [(-10.0, 5.0), (100.0, 37.0), (0.0, -60.0)]:
            assert epof((yaw, pitch), 0, m, GRID).epof == pytest.approx(3.5)

    def test_grid_mismatch_rejected(self):
        other = build_grid(107, 107, 30, 7.5)
        m = make_matrix(
            np.zeros((other.n_windows, 4), dtype=np.float32), grid=other
        )
        with pytest.raises(GridMatrixMismatchError):
            epof((0, 0), 0, m, GRID)

    def test_frame_out_of_range_is_error_not_clamp(self):
        m = make_matrix(n_frames=10)
        with pytest.raises(ValidationError):
            epof((0, 0), 10, m, GRID)
        with pytest.raises(ValidationError):
            epof((0, 0), -1, m, GRID)

    @given(st.floats(-180, 180), st.floats(-90, 90), st.integers(0, 5))
    def test_bounded_by_contributions(self, yaw, pitch, frame):
        rng = np.random.default_rng(abs(hash((yaw, pitch))) % 2**32)
        values = rng.uniform(0, 50, (GRID.n_windows, 6)).astype(np.float32)
        m = make_matrix(values)
        sample = epof((yaw, pitch), frame, m, GRID)
        contrib = [float(values[w, frame]) for w in sample.window_ids]
        assert min(contrib) - 1e-6 <= sample.epof <= max(contrib) + 1e-6
        assert all(0.0 < w <= 1.0 for w in sample.weights)
        assert len(sample.window_ids) <= 4

    def test_continuity_under_yaw_sweep(self):
        # Sweeping yaw never jumps by more than the largest value
        # difference between adjacent windows (one step apart).
        rng = np.random.default_rng(15)
        values = rng.uniform(0, 10, (GRID.n_windows, 3)).astype(np.float32)
        m = make_matrix(values)
        max_adjacent = 0.0
        v = values[:, 1]
        for i, (cy, cp) in enumerate(GRID.centers):
            for j, (cy2, cp2) in enumerate(GRID.centers):
                if i >= j:
                    continue
                dy = abs((cy - cy2 + 180.0) % 360.0 - 180.0)
                if dy <= GRID.h_step_deg + 1e-9 and abs(cp - cp2) <= GRID.v_step_deg + 1e-9:
                    max_adjacent = max(max_adjacent, abs(float(v[i]) - float(v[j])))
        for pitch in (0.0, 3.75, 20.0, 37.5):
            series = [
                epof((yaw, pitch), 1, m, GRID).epof
                for yaw in np.arange(-180.0, 180.0, 0.25)
            ]
            jumps = np.abs(np.diff(series))
            assert jumps.max() < max_adjacent


class TestHoldOrientation:
    def test_sixty_hertz_trace_consumes_one_sample_per_frame(self):
        trace = [HeadSample(t=i / 60.0, yaw_deg=float(i), pitch_deg=0.0) for i in range(30)]
        held = hold_orientation(trace, 30, 60.0)
        np.testing.assert_allclose(held[:, 1], np.arange(30.0))

    def test_gap_holds_last_sample(self):
        trace = [
            HeadSample(t=0.0, yaw_deg=10.0, pitch_deg=1.0),
            HeadSample(t=1.0, yaw_deg=50.0, pitch_deg=2.0),
        ]
        held = hold_orientation(trace, 90, 60.0)
        # Brute-force oracle: scan the trace per frame.
        for i in range(90):
            t = i / 60.0
            expect = trace[0] if t < 1.0 else trace[1]
            assert held[i, 1] == expect.yaw_deg
            assert held[i, 2] == expect.pitch_deg

    def test_frames_before_first_sample_use_first(self):
        trace = [HeadSample(t=0.5, yaw_deg=33.0, pitch_deg=-4.0)]
        held = hold_orientation(trace, 10, 60.0)
        assert (held[:, 1] == 33.0).all()

    def test_empty_trace_rejected(self):
        with pytest.raises(ValidationError):
            hold_orientation([], 10, 60.0)

    def test_decreasing_timestamps_rejected(self):
        trace = [HeadSample(t=1.0, yaw_deg=0, pitch_deg=0), HeadSample(t=0.5, yaw_deg=0, pitch_deg=0)]
        with pytest.raises(ValidationError):
            hold_orientation(trace, 10, 60.0)


class TestEpofTrace:
    def test_static_matrix_gives_zero_everywhere(self):
        m = make_matrix(fill=0.0, n_frames=20)
        trace = [HeadSample(t=i / 60.0, yaw_deg=5.0, pitch_deg=5.0) for i in range(20)]
        samples = epof_trace(trace, m, GRID, 60.0)
        assert len(samples) == 20
        assert all(s.epof == 0.0 for s in samples)

    def test_replay_deterministic(self):
        rng = np.random.default_rng(21)
        values = rng.uniform(0, 9, (GRID.n_windows, 40)).astype(np.float32)
        m = make_matrix(values)
        trace = [
            HeadSample(t=i / 60.0, yaw_deg=float(rng.uniform(-180, 180)), pitch_deg=float(rng.uniform(-80, 80)))
            for i in range(40)
        ]
        a = epof_trace(trace, m, GRID, 60.0)
        b = epof_trace(trace, m, GRID, 60.0)
        assert a == b

    def test_bad_fps_rejected(self):
        m = make_matrix(n_frames=5)
        trace = [HeadSample(t=0.0, yaw_deg=0, pitch_deg=0)]
        with pytest.raises(ValidationError):
            epof_trace(trace, m, GRID, 0.0)


class TestSessionSummary:
    def test_constant_samples(self):
        samples = [EpofSample(i, 4.0, (0,), (1.0,)) for i in range(8)]
        summary = session_summary(samples)
        assert summary["mean"] == 4.0
        assert summary["sum"] == 32.0
        assert summary["min"] == summary["max"] == 4.0

    def test_small_arithmetic_example(self):
        samples = [EpofSample(i, float(v), (0,), (1.0,)) for i, v in enumerate([1, 2, 3, 4])]
        summary = session_summary(samples)
        assert summary["mean"] == 2.5
        assert summary["sum"] == 10.0

    @given(st.lists(st.floats(0, 1000), min_size=1, max_size=60))
    def test_matches_brute_force_recomputation(self, values):
        samples = [EpofSample(i, v, (0,), (1.0,)) for i, v in enumerate(values)]
        summary = session_summary(samples)
        assert summary["mean"] == pytest.approx(sum(values) / len(values), rel=1e-12, abs=1e-12)
        assert summary["sum"] == pytest.approx(sum(values), rel=1e-12, abs=1e-12)
        assert summary["min"] == min(values)
        assert summary["max"] == max(values)
        assert summary["p10"] <= summary["p90"]

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            session_summary([])
