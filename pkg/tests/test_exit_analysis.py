import numpy as np
import pytest
import torch

from turbolab.exit_analysis import (
    DEFAULT_IA_GRID,
    ExitCurve,
    RepetitionSiso,
    ZeroSiso,
    curve_from_csv,
    curve_to_csv,
    estimate_mi,
    exit_slope,
    find_intersection,
    measure_exit_curve,
    mu_of_ia,
    sample_prior_llrs,
    simulate_trajectory,
    trajectory_to_csv,
)
from turbolab.signals import LLR_MAX


def identity_curve(component_id="ident", snr_db=2.0):
    grid = np.linspace(0, 0.95, 20)
    return ExitCurve(grid, grid, snr_db, component_id)


def constant_curve(value, component_id="const", snr_db=2.0):
    grid = np.linspace(0, 0.95, 20)
    return ExitCurve(grid, np.full_like(grid, value), snr_db, component_id)


class TestMuOfIa:
    def test_zero(self):
        assert mu_of_ia(0.0) == 0.0

    def test_half(self):
        # Closed form with H1=0.3073, H2=0.8935, H3=1.1064; cross-checked by
        # the MI round trip below.
        assert mu_of_ia(0.5) == pytest.approx(2.09, abs=0.01)

    def test_diverges_towards_one(self):
        assert mu_of_ia(0.999) > mu_of_ia(0.99) > mu_of_ia(0.9)

    def test_strictly_increasing_on_fine_grid(self):
        grid = np.linspace(0.0, 0.999, 1000)
        values = [mu_of_ia(v) for v in grid]
        assert all(b > a for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("ia", [-0.1, 1.0, 1.5])
    def test_domain(self, ia):
        with pytest.raises(ValueError):
            mu_of_ia(ia)


class TestSamplePriorLlrs:
    def test_zero_information_is_exactly_zero(self):
        u = torch.ones(1000, dtype=torch.int64)
        la = sample_prior_llrs(u, 0.0, np.random.default_rng(0))
        assert la.abs().sum() == 0

    def test_moments(self):
        rng = np.random.default_rng(1)
        u = torch.ones(1_000_000, dtype=torch.int64)
        la = sample_prior_llrs(u, 0.7, rng)
        mu = mu_of_ia(0.7)
        assert float(la.mean()) == pytest.approx(mu, rel=0.01)
        assert float(la.var()) == pytest.approx(2 * mu, rel=0.02)

    def test_sign_follows_bit(self):
        rng = np.random.default_rng(2)
        u = torch.zeros(100_000, dtype=torch.int64)
        la = sample_prior_llrs(u, 0.7, rng)
        assert float(la.mean()) == pytest.approx(-mu_of_ia(0.7), rel=0.01)

    def test_mi_round_trip(self):
        rng = np.random.default_rng(3)
        for ia in np.arange(0.1, 0.95, 0.1):
            u = torch.from_numpy(rng.integers(0, 2, 100_000))
            mi = estimate_mi(sample_prior_llrs(u, float(ia), rng), u)
            assert mi == pytest.approx(float(ia), abs=0.01)


class TestEstimateMi:
    def test_zero_llrs(self):
        assert estimate_mi(torch.zeros(100), torch.ones(100)) == 0.0

    def test_certainty(self):
        u = torch.tensor([1, 0, 1, 0])
        llr = torch.tensor([LLR_MAX, -LLR_MAX, LLR_MAX, -LLR_MAX])
        assert estimate_mi(llr, u) == pytest.approx(1.0, abs=1e-8)

    def test_clamped_to_unit_interval(self):
        u = torch.tensor([1, 0])
        wrong = torch.tensor([-LLR_MAX, LLR_MAX])
        assert estimate_mi(wrong, u) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            estimate_mi(torch.ones(3), torch.ones(4))

    def test_permutation_invariant(self):
        rng = np.random.default_rng(4)
        u = torch.from_numpy(rng.integers(0, 2, 5000))
        llr = sample_prior_llrs(u, 0.6, rng)
        perm = rng.permutation(5000)
        assert estimate_mi(llr, u) == pytest.approx(estimate_mi(llr[perm], u[perm]), abs=1e-12)


class TestMeasureExitCurve:
    def test_repetition_oracle_is_identity(self):
        curve = measure_exit_curve(
            RepetitionSiso(64), snr_db=2.0, blocks=200, rng=np.random.default_rng(3)
        )
        assert np.max(np.abs(curve.ie_values - curve.ia_grid)) < 0.01

    def test_zero_component_gives_zero(self):
        curve = measure_exit_curve(
            ZeroSiso(64), snr_db=2.0, blocks=20, rng=np.random.default_rng(6)
        )
        assert np.all(curve.ie_values == 0.0)

    def test_default_grid(self):
        curve = measure_exit_curve(
            ZeroSiso(16), snr_db=1.0, blocks=5, rng=np.random.default_rng(7)
        )
        assert np.array_equal(curve.ia_grid, DEFAULT_IA_GRID)
        assert curve.ia_grid[0] == 0.0 and curve.ia_grid[-1] == pytest.approx(0.95)

    def test_adapter_length_mismatch_detected(self):
        class BadSiso(ZeroSiso):
            def soft_pass(self, y, la):
                return torch.zeros(la.shape[0], la.shape[1] - 1)

        with pytest.raises(ValueError, match="mismatch"):
            measure_exit_curve(BadSiso(16), 1.0, blocks=4, rng=np.random.default_rng(8))


class TestTrajectory:
    def test_identity_pair_stalls_at_start(self):
        traj = simulate_trajectory(identity_curve(), identity_curve())
        assert len(traj.points) == 2
        assert traj.final_mi == pytest.approx(0.0)
        assert not traj.converged

    def test_strong_inner_converges_immediately(self):
        grid = np.linspace(0, 0.95, 20)
        outer = ExitCurve(grid, np.minimum(grid + 0.3, 1.0), 2.0, "outer")
        traj = simulate_trajectory(constant_curve(1.0), outer)
        assert traj.converged
        assert traj.points[1][1] > 1.0 - 1e-3  # full MI within the first iteration

    def test_monotone_progress_for_monotone_curves(self):
        grid = np.linspace(0, 0.95, 20)
        inner = ExitCurve(grid, np.minimum(grid + 0.15, 1.0), 2.0, "inner")
        outer = ExitCurve(grid, np.minimum(grid + 0.15, 1.0), 2.0, "outer")
        traj = simulate_trajectory(inner, outer)
        mis = [p[1] for p in traj.points]
        assert all(b >= a - 1e-12 for a, b in zip(mis, mis[1:]))
        assert traj.converged

    def test_points_alternate_roles(self):
        traj = simulate_trajectory(constant_curve(0.4), constant_curve(0.3))
        # even entries are inner half-iterations: their output feeds the odd ones
        assert traj.points[0][0] == 0.0
        assert traj.points[1][0] == traj.points[0][1]


class TestIntersection:
    def test_identical_curves_intersect_at_start(self):
        assert find_intersection(identity_curve(), identity_curve()) == (0.0, 0.0)

    def test_open_tunnel_returns_one_one(self):
        grid = np.linspace(0, 0.95, 20)
        inner = ExitCurve(grid, np.full_like(grid, 0.99), 2.0, "inner")
        outer = ExitCurve(grid, np.minimum(grid + 0.5, 1.0), 2.0, "outer")
        assert find_intersection(inner, outer) == (1.0, 1.0)

    def test_trajectory_respects_intersection(self):
        grid = np.linspace(0, 0.95, 20)
        inner = ExitCurve(grid, np.minimum(grid + 0.2, 0.8), 2.0, "inner")
        outer = ExitCurve(grid, np.minimum(grid + 0.2, 0.8), 2.0, "outer")
        traj = simulate_trajectory(inner, outer)
        ix, _ = find_intersection(inner, outer)
        assert traj.final_mi <= ix + 0.01


class TestExitSlope:
    def test_identity_slope_one(self):
        assert exit_slope(identity_curve(), (0.0, 0.95)) == pytest.approx(1.0)

    def test_constant_slope_zero(self):
        assert exit_slope(constant_curve(0.5), (0.2, 0.9)) == pytest.approx(0.0, abs=1e-12)

    def test_window_needs_two_points(self):
        with pytest.raises(ValueError):
            exit_slope(identity_curve(), (0.51, 0.54))


class TestCsv:
    def test_curve_round_trip(self, tmp_path):
        curve = measure_exit_curve(
            RepetitionSiso(8), snr_db=1.5, blocks=10, rng=np.random.default_rng(9)
        )
        path = curve_to_csv(curve, tmp_path / "curve.csv")
        loaded = curve_from_csv(path)
        assert np.array_equal(loaded.ia_grid, curve.ia_grid)
        assert np.array_equal(loaded.ie_values, curve.ie_values)
        assert loaded.snr_db == curve.snr_db
        assert loaded.component_id == curve.component_id

    def test_trajectory_csv(self, tmp_path):
        traj = simulate_trajectory(constant_curve(0.5), identity_curve())
        path = trajectory_to_csv(traj, tmp_path / "traj.csv", snr_db=2.0)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "ia,ie,snr_db,component_id"
        assert len(lines) == 1 + len(traj.points)
        assert lines[1].endswith("inner") and lines[2].endswith("outer")


class TestExitCurveValidation:
    def test_unsorted_grid_rejected(self):
        with pytest.raises(ValueError):
            ExitCurve(np.array([0.0, 0.5, 0.3]), np.zeros(3), 2.0, "bad")

    def test_out_of_range_values_rejected(self):
        with pytest.raises(ValueError):
            ExitCurve(np.array([0.0, 0.5]), np.array([0.2, 1.2]), 2.0, "bad")

    def test_interp_holds_edges(self):
        curve = ExitCurve(np.array([0.1, 0.9]), np.array([0.3, 0.7]), 2.0, "c")
        assert curve.interp(0.0) == pytest.approx(0.3)
        assert curve.interp(1.0) == pytest.approx(0.7)
        assert curve.interp(0.5) == pytest.approx(0.5)
