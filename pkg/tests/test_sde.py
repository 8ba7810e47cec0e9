import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from fpmb import boundary_positions, coefficients
from fpmb.sde import (
    PathEnsemble,
    StepSizeError,
    histogram_distance,
    histogram_table,
    init_ensemble,
    propagate,
    step_ensemble,
)


class TestInit:
    def test_positions_inside_domain(self, built_presets):
        for name in ("fig1", "fig3", "fig5"):
            sol = built_presets[name]
            ens = init_ensemble(sol, 5000, 0.3, seed=3)
            lo, hi = boundary_positions(sol, 0.3)
            assert ens.positions.min() >= lo
            assert ens.positions.max() <= hi
            assert ens.t == 0.3
            assert ens.n_reflections == 0

    def test_sampling_self_consistency(self, built_presets):
        # histogram straight after inverse-CDF sampling: multinomial noise only
        sol = built_presets["fig1"]
        ens = init_ensemble(sol, 100_000, 0.3, seed=11)
        assert histogram_distance(ens, sol, 60) <= 3.0 * 0.8 * math.sqrt(60 / 100_000)

    def test_validation(self, built_presets):
        with pytest.raises(ValueError):
            init_ensemble(built_presets["fig1"], 0, 0.3, seed=1)
        with pytest.raises(ValueError):
            init_ensemble(built_presets["fig1"], 10, 0.0, seed=1)


class TestStep:
    def test_containment_and_count_invariant(self, built_presets):
        sol = built_presets["fig1"]
        ens = init_ensemble(sol, 20_000, 0.3, seed=5)
        n0 = ens.positions.size
        for _ in range(50):
            ens = step_ensemble(ens, sol, 5e-4)
            lo, hi = boundary_positions(sol, ens.t)
            assert ens.positions.size == n0
            assert ens.positions.min() >= lo
            assert ens.positions.max() <= hi

    def test_reflection_counter_monotone(self, built_presets):
        sol = built_presets["fig2"]  # shrinking domain forces reflections
        ens = init_ensemble(sol, 5000, 1.0, seed=6)
        counts = [ens.n_reflections]
        for _ in range(40):
            ens = step_ensemble(ens, sol, 2e-3)
            counts.append(ens.n_reflections)
        assert all(a <= b for a, b in zip(counts, counts[1:]))
        assert counts[-1] > 0

    def test_particle_at_boundary_moves_inward(self, built_presets):
        sol = built_presets["fig1"]
        lo, hi = boundary_positions(sol, 0.3)
        ens = PathEnsemble(
            positions=np.array([lo, hi]),
            t=0.3,
            n_reflections=0,
            seed=0,
            rng=np.random.default_rng(0),
        )
        # relative drift at the endpoints points into the domain for this family
        d1_lo, d2_lo = coefficients(sol, lo, 0.3)
        assert d2_lo == 0.0
        assert d1_lo - sol.alpha * lo / 0.3 > 0.0
        d1_hi, _ = coefficients(sol, hi, 0.3)
        assert d1_hi - sol.alpha * hi / 0.3 < 0.0
        stepped = step_ensemble(ens, sol, 1e-4)
        lo2, hi2 = boundary_positions(sol, stepped.t)
        assert stepped.positions[0] >= lo2
        assert stepped.positions[1] <= hi2

    def test_zero_noise_matches_ode_oracle(self, built_presets):
        sol = built_presets["fig1"]
        x0 = np.array([0.15, 0.225, 0.32])
        ens = PathEnsemble(
            positions=x0.copy(), t=0.3, n_reflections=0, seed=0,
            rng=np.random.default_rng(0),
        )
        n_steps = 2000
        dt = (0.5 - 0.3) / n_steps
        for _ in range(n_steps):
            ens = step_ensemble(ens, sol, dt, noise_scale=0.0)

        def rhs(t, x):
            d1, _ = coefficients(sol, x, t)
            return d1

        ref = solve_ivp(rhs, (0.3, 0.5), x0, rtol=1e-11, atol=1e-13).y[:, -1]
        assert float(np.abs(ens.positions - ref).max()) <= 2e-4

    def test_oversized_step_rejected(self, built_presets):
        sol = built_presets["fig2"]
        ens = PathEnsemble(
            positions=np.array([3.9]), t=1.0, n_reflections=0, seed=0,
            rng=np.random.default_rng(0),
        )
        with pytest.raises(StepSizeError):
            step_ensemble(ens, sol, 1.0, noise_scale=0.0)

    def test_rejects_nonpositive_dt(self, built_presets):
        ens = init_ensemble(built_presets["fig1"], 10, 0.3, seed=1)
        with pytest.raises(ValueError):
            step_ensemble(ens, built_presets["fig1"], 0.0)


class TestReproducibility:
    def test_identical_seed_identical_trajectory(self, built_presets):
        sol = built_presets["fig1"]
        runs = []
        for _ in range(2):
            ens = init_ensemble(sol, 2000, 0.3, seed=77)
            ens = propagate(ens, sol, 0.45, dt_max=1e-3)
            runs.append(ens)
        assert np.array_equal(runs[0].positions, runs[1].positions)
        assert runs[0].n_reflections == runs[1].n_reflections

    def test_different_seeds_differ(self, built_presets):
        sol = built_presets["fig1"]
        a = init_ensemble(sol, 2000, 0.3, seed=1)
        b = init_ensemble(sol, 2000, 0.3, seed=2)
        assert not np.array_equal(a.positions, b.positions)


class TestHistogram:
    def test_propagated_ensemble_matches_analytic_density(self, built_presets):
        sol = built_presets["fig1"]
        ens = init_ensemble(sol, 50_000, 0.3, seed=9)
        ens = propagate(ens, sol, 0.5, dt_max=5e-4)
        assert histogram_distance(ens, sol, 60) <= 0.05

    def test_quadrupling_paths_halves_distance(self, built_presets):
        sol = built_presets["fig1"]
        dists = {}
        for n in (4000, 16000):
            vals = []
            for seed in range(5):
                ens = init_ensemble(sol, n, 0.3, seed=seed)
                ens = propagate(ens, sol, 0.5, dt_max=1e-3)
                vals.append(histogram_distance(ens, sol, 40))
            dists[n] = float(np.mean(vals))
        ratio = dists[4000] / dists[16000]
        assert 1.5 <= ratio <= 2.6

    def test_table_columns_consistent(self, built_presets):
        sol = built_presets["fig1"]
        ens = init_ensemble(sol, 5000, 0.3, seed=4)
        centers, empirical, analytic = histogram_table(ens, sol, 20)
        assert centers.shape == empirical.shape == analytic.shape == (20,)
        lo, hi = boundary_positions(sol, 0.3)
        width = (hi - lo) / 20
        assert float(empirical.sum() * width) == pytest.approx(1.0, abs=1e-12)
        assert float(analytic.sum() * width) == pytest.approx(1.0, abs=1e-6)

    def test_half_line_histogram(self, built_presets):
        sol = built_presets["fig5"]
        ens = init_ensemble(sol, 20_000, 0.5, seed=8)
        ens = propagate(ens, sol, 0.7, dt_max=1e-3)
        assert histogram_distance(ens, sol, 40) <= 0.08

    def test_validation(self, built_presets):
        sol = built_presets["fig1"]
        ens = init_ensemble(sol, 100, 0.3, seed=1)
        with pytest.raises(ValueError):
            histogram_distance(ens, sol, 5)
        empty = PathEnsemble(
            positions=np.array([]), t=0.3, n_reflections=0, seed=0,
            rng=np.random.default_rng(0),
        )
        with pytest.raises(ValueError):
            histogram_distance(empty, sol, 20)
