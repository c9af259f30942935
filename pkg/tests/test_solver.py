import numpy as np
import pytest

from sketchsolve.linalg import psd_inv_sqrt, psd_sqrt
from sketchsolve.matgen import LinearSystem, gen_gaussian_unit_rows, make_system
from sketchsolve.sketch import SketchSpec, build_less_distribution, draw_sketch
from sketchsolve.solver import (
    SolverConfig,
    eigencomponent_decay,
    estimate_rate,
    project_step,
    solve,
    write_iter_logs,
)


def _random_system(m=40, n=8, seed=0, metric=None):
    A = gen_gaussian_unit_rows(m, n, seed=seed)
    return make_system(A, seed=seed + 1, metric=metric)


def _all_family_sketches(system, k, seed):
    p = build_less_distribution(system.A).probabilities
    specs = [
        SketchSpec("gaussian", k=k, seed_stream=seed),
        SketchSpec("rademacher", k=k, seed_stream=seed + 1),
        SketchSpec("less", k=k, s=5, sampling=p, seed_stream=seed + 2),
        SketchSpec("less_uniform", k=k, s=4, seed_stream=seed + 3),
        SketchSpec("row_sampling", k=k, sampling=p, seed_stream=seed + 4),
    ]
    return [draw_sketch(s, system.m, trial=t) for t, s in enumerate(specs)]


class TestProjectStep:
    def test_fixed_point_all_families(self):
        system = _random_system()
        for S in _all_family_sketches(system, 3, seed=10):
            x_new, _ = project_step(system.x_star.copy(), system, S)
            assert np.linalg.norm(x_new - system.x_star) <= 1e-10

    def test_full_rank_sketch_one_step(self):
        system = _random_system(m=30, n=6, seed=1)
        S = draw_sketch(SketchSpec("gaussian", k=6, seed_stream=2), 30, trial=0)
        x_new, _ = project_step(np.zeros(6), system, S)
        assert np.linalg.norm(x_new - system.x_star) <= 1e-8 * np.linalg.norm(system.x_star)

    def test_metric_projection_hand_example(self):
        # B = diag(4, 1), A = I2, constraint x_1 = 0 from S = e_1^T:
        # minimize 4 (x1-1)^2 + (x2-1)^2 over x1 = 0  ->  (0, 1)
        system = LinearSystem(
            A=np.eye(2), b=np.zeros(2), x_star=np.zeros(2),
            metric=np.diag([4.0, 1.0]),
        )
        x_new, _ = project_step(np.array([1.0, 1.0]), system, np.array([[1.0, 0.0]]))
        np.testing.assert_allclose(x_new, [0.0, 1.0], atol=1e-12)

    def test_constraint_satisfied_after_step(self):
        system = _random_system(m=50, n=10, seed=3)
        rng = np.random.default_rng(4)
        for t in range(20):
            S = draw_sketch(SketchSpec("gaussian", k=4, seed_stream=5), 50, trial=t)
            x = rng.standard_normal(10)
            x_new, _ = project_step(x, system, S)
            SA = S @ system.A
            resid = np.linalg.norm(SA @ x_new - S @ system.b)
            bound = 1e-8 * (np.linalg.norm(SA) * np.linalg.norm(x_new)
                            + np.linalg.norm(S @ system.b))
            assert resid <= bound

    def test_monotone_in_metric_norm(self):
        B = np.diag([5.0, 2.0, 1.0, 0.5, 3.0, 1.5, 2.5, 0.8])
        system = _random_system(seed=6, metric=B)
        rng = np.random.default_rng(107)
        for S in _all_family_sketches(system, 3, seed=20):
            x = rng.standard_normal(8)
            before = system.metric_norm(x - system.x_star)
            x_new, _ = project_step(x, system, S)
            after = system.metric_norm(x_new - system.x_star)
            assert after <= before * (1.0 + 1e-10)

    def test_singular_subproblem_takes_fallback(self):
        system = _random_system(m=30, n=6, seed=8)
        row = np.zeros(30)
        row[3] = 1.0
        S = np.vstack([row, row])  # duplicated constraint: singular k x k system
        x_new, fallback = project_step(np.ones(6), system, S)
        assert fallback
        before = np.linalg.norm(np.ones(6) - system.x_star)
        assert np.linalg.norm(x_new - system.x_star) <= before * (1.0 + 1e-10)

    def test_metric_reduction_equivalence(self):
        # B-metric projection == Euclidean projection on A B^{-1/2} after the
        # change of variables x_tilde = B^{1/2} x
        rng = np.random.default_rng(9)
        G = rng.standard_normal((8, 8))
        B = G @ G.T + 8 * np.eye(8)
        system_b = _random_system(m=40, n=8, seed=10, metric=B)
        B_half, B_inv_half = psd_sqrt(B), psd_inv_sqrt(B)
        system_i = LinearSystem(
            A=system_b.A @ B_inv_half, b=system_b.b,
            x_star=B_half @ system_b.x_star,
        )
        x = rng.standard_normal(8)
        S = draw_sketch(SketchSpec("gaussian", k=3, seed_stream=11), 40, trial=0)
        x_b, _ = project_step(x, system_b, S)
        x_i, _ = project_step(B_half @ x, system_i, S)
        np.testing.assert_allclose(B_half @ x_b, x_i, atol=1e-8)

    def test_expected_one_step_contraction_identity(self):
        # over a batch of sketches the mean contraction equals
        # 1 - d^T mean_P d / ||d||^2 exactly (same sketches on both sides)
        from sketchsolve.spectral import projection_matrix

        system = _random_system(m=60, n=9, seed=12)
        spec = SketchSpec("gaussian", k=3, seed_stream=13)
        d = np.random.default_rng(14).standard_normal(9)
        x = system.x_star + d
        ratios, mean_P = [], np.zeros((9, 9))
        for t in range(500):
            S = draw_sketch(spec, 60, trial=t)
            x_new, _ = project_step(x, system, S)
            ratios.append(np.sum((x_new - system.x_star) ** 2) / np.sum(d**2))
            mean_P += projection_matrix(S, system.A)
        mean_P /= 500
        expected = 1.0 - d @ mean_P @ d / (d @ d)
        assert np.mean(ratios) == pytest.approx(expected, abs=1e-10)


class TestSolve:
    def test_zero_solution_converges_immediately(self):
        A = gen_gaussian_unit_rows(20, 4, seed=15)
        system = LinearSystem(A=A, b=np.zeros(20), x_star=np.zeros(4))
        cfg = SolverConfig(sketch=SketchSpec("gaussian", k=2, seed_stream=16))
        x, log = solve(system, cfg)
        assert log.dist.size == 1
        np.testing.assert_allclose(x, 0.0)

    def test_full_sketch_converges_in_one_iteration(self):
        system = _random_system(m=1000, n=50, seed=17)
        cfg = SolverConfig(sketch=SketchSpec("gaussian", k=50, seed_stream=18))
        _, log = solve(system, cfg)
        assert log.iterations == 1
        assert log.rel_err[-1] <= 1e-5

    def test_determinism(self):
        system = _random_system(seed=19)
        cfg = SolverConfig(sketch=SketchSpec("less_uniform", k=3, s=4, seed_stream=20),
                           max_iters=30)
        _, log1 = solve(system, cfg, trial=7)
        _, log2 = solve(system, cfg, trial=7)
        assert np.array_equal(log1.dist, log2.dist)
        _, log3 = solve(system, cfg, trial=8)
        assert not np.array_equal(log1.dist, log3.dist)

    def test_distances_non_increasing(self):
        system = _random_system(seed=21)
        cfg = SolverConfig(sketch=SketchSpec("rademacher", k=2, seed_stream=22), max_iters=80)
        _, log = solve(system, cfg)
        assert np.all(np.diff(log.dist) <= 1e-10 * log.dist[:-1] + 1e-300)

    def test_x0_override(self):
        system = _random_system(seed=23)
        cfg = SolverConfig(sketch=SketchSpec("gaussian", k=2, seed_stream=24),
                           max_iters=5, x0=system.x_star)
        _, log = solve(system, cfg)
        assert log.dist.size == 1  # starts converged


class TestEstimateRate:
    def test_full_rank_sketch_rate_one(self):
        system = _random_system(m=30, n=5, seed=25)
        cfg = SolverConfig(sketch=SketchSpec("gaussian", k=5, seed_stream=26))
        report = estimate_rate(system, cfg, runs=3, tail=10)
        assert report.empirical_rate == pytest.approx(1.0, abs=1e-10)
        assert report.short_tail  # single-step runs cannot fill a 10-step tail

    def test_identity_symmetry_oracle(self):
        # E[P] = (k/n) I so the contraction factor is k/n in every direction
        n, k = 100, 10
        system = make_system(np.eye(n), seed=27)
        cfg = SolverConfig(sketch=SketchSpec("gaussian", k=k, seed_stream=28))
        report = estimate_rate(system, cfg, runs=100, tail=50)
        assert report.empirical_rate == pytest.approx(k / n, abs=0.02)

    def test_insufficient_iterations(self):
        A = gen_gaussian_unit_rows(20, 4, seed=29)
        system = LinearSystem(A=A, b=np.zeros(20), x_star=np.zeros(4))
        cfg = SolverConfig(sketch=SketchSpec("gaussian", k=2, seed_stream=30))
        with pytest.raises(ValueError, match="fewer than 2"):
            estimate_rate(system, cfg, runs=1, tail=5)

    def test_pools_all_available_when_tail_exceeds_run(self):
        system = _random_system(m=30, n=5, seed=31)
        cfg = SolverConfig(sketch=SketchSpec("gaussian", k=4, seed_stream=32), max_iters=6,
                           stop_tol=1e-12)
        report = estimate_rate(system, cfg, runs=1, tail=500)
        assert report.short_tail
        assert report.samples <= 6


class TestEigencomponentDecay:
    def test_identity_uniform_contraction(self):
        n, k = 40, 8
        system = make_system(np.eye(n), seed=33)
        cfg = SolverConfig(sketch=SketchSpec("gaussian", k=k, seed_stream=34), max_iters=40,
                           stop_tol=1e-12)
        contraction = eigencomponent_decay(system, cfg, np.eye(n), runs=40)
        np.testing.assert_allclose(contraction, 1.0 - k / n, atol=0.1)

    def test_matches_expected_projection_eigenbasis(self):
        from sketchsolve.spectral import expected_projection

        system = _random_system(m=60, n=6, seed=35)
        spec = SketchSpec("gaussian", k=2, seed_stream=36)
        est = expected_projection(system.A, spec.with_seed(99), trials=3000)
        eigvals, eigvecs = np.linalg.eigh(est.mean_P)
        cfg = SolverConfig(sketch=spec, max_iters=60, stop_tol=1e-10)
        contraction = eigencomponent_decay(system, cfg, eigvecs, runs=60)
        np.testing.assert_allclose(contraction, 1.0 - eigvals, atol=0.06)

    def test_non_orthonormal_basis_rejected(self):
        system = _random_system(seed=37)
        cfg = SolverConfig(sketch=SketchSpec("gaussian", k=2, seed_stream=38))
        with pytest.raises(ValueError, match="orthonormal"):
            eigencomponent_decay(system, cfg, np.ones((8, 2)), runs=2)


class TestIterLogCsv:
    def test_schema_and_roundtrip(self, tmp_path):
        system = _random_system(seed=39)
        cfg = SolverConfig(sketch=SketchSpec("gaussian", k=2, seed_stream=40), max_iters=10)
        logs = [solve(system, cfg, trial=r)[1] for r in range(2)]
        path = tmp_path / "runs.csv"
        write_iter_logs(path, logs)
        lines = path.read_text().splitlines()
        assert lines[0] == "run,t,dist,rel_err,fallback_flag"
        first = lines[1].split(",")
        assert first[0] == "0" and first[1] == "0"
        assert float(first[2]) == logs[0].dist[0]
