import numpy as np
import pytest

from conftest import make_k3, mixed_inequality_problem, random_graph
from specbundle.bundle import (
    AggregateStats,
    FingerprintMismatch,
    Mapping,
    SolverConfig,
    candidate_iterate,
    cold_start,
    compute_residuals,
    descent_test,
    load_state,
    model_update,
    penalized_obj,
    save_state,
    solve,
    state_from_record,
    warm_start_pad,
)
from specbundle.problem import build_maxcut
from specbundle.subqp import assemble_eval_coeffs, ipm_eval


class TestPenalizedObj:
    def test_zero_cost_zero_dual(self):
        from conftest import mixed_inequality_problem
        from specbundle.problem import build_from_families

        n = 5
        idx = np.arange(n)
        prob = build_from_families(
            n, np.zeros((n, n)), (idx, idx, idx, np.ones(n)), np.ones(n), [False] * n
        )
        cfg = SolverConfig(k_c=2, k_p=0)
        f, eig = penalized_obj(prob, np.zeros(n), cfg)
        assert f == pytest.approx(0.0, abs=1e-12)

    def test_negative_slack_branch(self):
        # all-ones dual on diagonal constraints with zero cost: the slack
        # matrix is -I, the bracket clips to zero, f equals <b, y>
        from specbundle.problem import build_from_families

        n = 4
        idx = np.arange(n)
        prob = build_from_families(
            n, np.zeros((n, n)), (idx, idx, idx, np.ones(n)), np.ones(n), [False] * n
        )
        cfg = SolverConfig(k_c=2, k_p=0)
        y = np.ones(n)
        f, eig = penalized_obj(prob, y, cfg)
        assert eig.eigenvalues[0] == pytest.approx(-1.0, abs=1e-9)
        assert f == pytest.approx(float(prob.b @ y), abs=1e-9)

    def test_infeasible_sentinel(self):
        prob, _ = mixed_inequality_problem(6, 1)
        cfg = SolverConfig(k_c=2, k_p=0)
        y = np.zeros(prob.m)
        y[prob.ineq_idx[0]] = -1e-3
        f, eig = penalized_obj(prob, y, cfg)
        assert f == np.inf and eig is None


class TestCandidateIterate:
    def test_fixed_point(self):
        y = np.array([1.0, -2.0, 0.5])
        b = np.array([0.3, 0.1, -0.2])
        out = candidate_iterate(y, np.zeros(3), b.copy(), b, 0.7, np.array([], dtype=int))
        np.testing.assert_allclose(out, y)

    def test_equality_only_formula(self):
        rng = np.random.default_rng(0)
        y, b, ax = rng.standard_normal((3, 5))
        out = candidate_iterate(y, np.zeros(5), ax, b, 2.0, np.array([], dtype=int))
        np.testing.assert_allclose(out, y - (b - ax) / 2.0)

    def test_clipping_on_inequality_rows(self):
        y = np.zeros(2)
        b = np.array([1.0, 1.0])
        ax = np.array([0.0, 2.0])
        ineq = np.array([0, 1])
        rho = 1.0
        nu = np.minimum(ax + rho * y - b, 0.0)
        out = candidate_iterate(y, nu, ax, b, rho, ineq)
        # row 0 would go negative and clips to zero; row 1 stays positive
        np.testing.assert_allclose(out, [0.0, 1.0])
        assert out @ nu == 0.0

    def test_matches_slack_form(self):
        rng = np.random.default_rng(1)
        m = 12
        ineq = np.arange(4, m)
        y = np.abs(rng.standard_normal(m))
        b, ax = rng.standard_normal((2, m))
        rho = 0.3
        w = ax + rho * y - b
        nu = np.zeros(m)
        nu[ineq] = np.minimum(w[ineq], 0.0)
        out = candidate_iterate(y, nu, ax, b, rho, ineq)
        direct = y - (b + nu - ax) / rho
        np.testing.assert_allclose(out, direct, atol=1e-12)
        assert np.min(out[ineq]) >= 0.0


class TestDescentTest:
    def test_candidate_matches_model(self):
        assert descent_test(1.0, 0.5, 0.5, 0.99)

    def test_boundary_zero_zero(self):
        assert descent_test(1.0, 1.0, 1.0, 0.25)

    def test_null_step(self):
        assert not descent_test(1.0, 1.1, 0.5, 0.25)


class TestModelUpdate:
    def setup_model(self, n=10, k_c=3, k_p=2, seed=0):
        g = random_graph(n, 0.4, seed)
        prob = build_maxcut(g)
        cfg = SolverConfig(k_c=k_c, k_p=k_p, sketch_rank=0)
        state = cold_start(prob, cfg)
        return prob, cfg, state.model

    def test_no_past_block_replaces_basis(self):
        prob, cfg, model = self.setup_model(k_c=3, k_p=0)
        rng = np.random.default_rng(1)
        vecs, _ = np.linalg.qr(rng.standard_normal((prob.n, 3)))
        s = np.diag([0.5, 0.2, 0.1])
        new = model_update(model, 0.0, s, vecs, prob)
        np.testing.assert_array_equal(new.basis, vecs)
        # aggregate equals the full block solution when no past block exists
        assert new.stats.trace == pytest.approx(0.8)

    def test_identity_weight_zero_block(self):
        prob, cfg, model = self.setup_model()
        model.stats = AggregateStats(0.3, 0.1, np.full(prob.m, 0.01))
        model.store.xbar = 0.3 / prob.n * np.eye(prob.n)
        rng = np.random.default_rng(2)
        vecs, _ = np.linalg.qr(rng.standard_normal((prob.n, model.k_c)))
        before = model.stats.copy()
        new = model_update(model, 1.0, np.zeros((model.k, model.k)), vecs, prob)
        assert new.stats.trace == pytest.approx(before.trace)
        assert new.stats.cost_ip == pytest.approx(before.cost_ip)
        np.testing.assert_allclose(new.stats.constr_image, before.constr_image)

    def test_stats_match_dense_shadow(self):
        prob, cfg, model = self.setup_model(n=20, k_c=4, k_p=2, seed=3)
        rng = np.random.default_rng(4)
        shadow = np.zeros((prob.n, prob.n))
        cost = prob.cost.toarray()
        for t in range(12):
            eta = float(rng.random())
            s = rng.standard_normal((model.k, model.k))
            s = s @ s.T / model.k
            vecs, _ = np.linalg.qr(rng.standard_normal((prob.n, model.k_c)))
            basis = model.basis
            model = model_update(model, eta, s, vecs, prob, seed=0, tag=t)
            eta_u, factor, lams = model.last_update
            shadow = eta * shadow + (factor * lams[None, :]) @ factor.T
            assert abs(model.stats.trace - np.trace(shadow)) <= 1e-9
            assert abs(model.stats.cost_ip - np.sum(cost * shadow)) <= 1e-9
            np.testing.assert_allclose(
                model.stats.constr_image, np.diag(shadow), atol=1e-9
            )
            np.testing.assert_allclose(shadow, model.store.xbar, atol=1e-9)

    def test_trace_update_identity(self):
        prob, cfg, model = self.setup_model(n=15, k_c=3, k_p=2, seed=5)
        rng = np.random.default_rng(6)
        s = rng.standard_normal((model.k, model.k))
        s = s @ s.T
        vecs, _ = np.linalg.qr(rng.standard_normal((prob.n, model.k_c)))
        eta = 0.4
        tr_before = model.stats.trace
        new = model_update(model, eta, s, vecs, prob)
        vals = np.sort(np.linalg.eigvalsh(s))[::-1]
        lam_c = np.maximum(vals[model.k_p :], 0.0)
        assert new.stats.trace == pytest.approx(eta * tr_before + lam_c.sum(), abs=1e-12)

    def test_basis_spans_new_eigvecs(self):
        prob, cfg, model = self.setup_model(n=12, k_c=3, k_p=2, seed=7)
        rng = np.random.default_rng(8)
        s = rng.standard_normal((model.k, model.k))
        s = s @ s.T
        vecs, _ = np.linalg.qr(rng.standard_normal((prob.n, model.k_c)))
        new = model_update(model, 0.5, s, vecs, prob)
        assert new.basis.shape == model.basis.shape
        np.testing.assert_allclose(
            new.basis.T @ new.basis, np.eye(new.k), atol=1e-10
        )
        proj = new.basis @ (new.basis.T @ vecs)
        np.testing.assert_allclose(proj, vecs, atol=1e-8)

    def test_rank_deficient_padded(self):
        prob, cfg, model = self.setup_model(n=12, k_c=3, k_p=2, seed=9)
        # new vectors duplicate the kept past directions
        s = np.diag([1.0, 0.8, 0.0, 0.0, 0.0])
        vecs = model.basis[:, : model.k_c]
        new = model_update(model, 0.1, s, vecs, prob, seed=3, tag=5)
        assert new.basis.shape[1] == model.k
        np.testing.assert_allclose(
            new.basis.T @ new.basis, np.eye(model.k), atol=1e-10
        )


class TestResiduals:
    def test_feasible_point_zero_infeas(self):
        prob = build_maxcut(make_k3())
        stats = AggregateStats(1.0, 0.5, prob.b.copy())
        r = compute_residuals(prob, np.zeros(3), 0.7, 0.0, stats)
        assert r.rel_infeas == 0.0 and r.linf_infeas == 0.0

    def test_upper_bound_property_after_solve(self):
        g = random_graph(20, 0.3, 10)
        prob = build_maxcut(g)
        cfg = SolverConfig(k_c=8, k_p=1, eps=1e-5, max_iters=2000, seed=0)
        state, _ = solve(prob, cfg)
        assert state.status == "converged"
        p_star = state.last_primal.cost_ip
        # any dual value bounds the optimum from above
        for seed in range(5):
            rng = np.random.default_rng(seed)
            y = state.y + 0.01 * rng.standard_normal(prob.m)
            f, _ = penalized_obj(prob, y, cfg)
            assert f >= p_star - 1e-4


class TestSolveEndToEnd:
    def test_k3_analytic(self, k3):
        prob = build_maxcut(k3)
        cfg = SolverConfig(eps=1e-3, max_iters=200, seed=0)
        state, out = solve(prob, cfg)
        assert state.status == "converged"
        obj = prob.unscale_objective(state.last_primal.cost_ip)
        assert obj == pytest.approx(9 / 4, abs=1e-2)

    def test_dual_feasibility_dense_check(self):
        g = random_graph(10, 0.5, 20)
        prob = build_maxcut(g)
        cfg = SolverConfig(eps=1e-3, max_iters=1000, seed=1)
        state, _ = solve(prob, cfg)
        assert state.status == "converged"
        z = prob.cost.toarray() - np.diag(state.y)
        assert np.linalg.eigvalsh(z).max() <= cfg.eps + 1e-9

    def test_monotone_objective_and_feasible_duals(self):
        prob, _ = mixed_inequality_problem(10, 3)
        cfg = SolverConfig(rho=0.1, k_c=5, k_p=1, eps=1e-3, max_iters=300, seed=0)
        f_values = []

        def cb(info):
            f_values.append(info.f_y)
            assert np.min(info.y[prob.ineq_idx], initial=0.0) >= 0.0

        state, _ = solve(prob, cfg, callback=cb)
        assert all(b <= a + 1e-12 for a, b in zip(f_values, f_values[1:]))

    def test_minorant_and_subgradient_bounds(self):
        g = random_graph(15, 0.4, 30)
        prob = build_maxcut(g)
        cfg = SolverConfig(k_c=5, k_p=1, eps=1e-4, max_iters=500, seed=2)
        checks = []

        def cb(info):
            # model minorant at the candidate
            checks.append(info.model_val <= info.f_cand + 1e-8 * (1 + abs(info.f_cand)))
            # the refreshed model supports the candidate from below
            ev = ipm_eval(assemble_eval_coeffs(prob, info.model, info.y_cand))
            new_model_val = float(prob.b @ info.y_cand) - ev.value
            checks.append(
                new_model_val >= info.f_cand - 1e-8 * (1 + abs(info.f_cand))
            )

        state, _ = solve(prob, cfg, callback=cb)
        assert state.status == "converged"
        assert all(checks)

    def test_trace_budget_every_iteration(self):
        g = random_graph(12, 0.4, 40)
        prob = build_maxcut(g)
        cfg = SolverConfig(k_c=4, k_p=1, eps=1e-3, max_iters=300, seed=3)
        traces = []
        state, _ = solve(prob, cfg, callback=lambda info: traces.append(info.primal.trace))
        assert all(t <= prob.alpha + 1e-9 for t in traces)

    def test_warm_start_fixed_point(self, k3):
        prob = build_maxcut(k3)
        cfg = SolverConfig(eps=1e-3, max_iters=200, seed=0)
        state, _ = solve(prob, cfg)
        descent_before = state.descent_steps
        state2, _ = solve(prob, cfg, init=state)
        assert state2.status == "converged"
        assert state2.descent_steps == descent_before  # zero new descent steps

    def test_budget_exhaustion_flagged(self):
        prob = build_maxcut(random_graph(40, 0.3, 77))
        cfg = SolverConfig(eps=1e-10, max_iters=3, seed=0)
        state, _ = solve(prob, cfg)
        assert state.status == "budget"
        assert state.iterations == 3

    def test_sketch_and_explicit_agree(self):
        # the sketch changes only the primal store: the dual path is
        # identical, and the reconstruction approximates the exact aggregate
        # up to the tail beyond the sketch rank
        g = random_graph(30, 0.3, 50)
        prob = build_maxcut(g)
        cfg_e = SolverConfig(k_c=6, k_p=1, eps=1e-3, max_iters=500, seed=4, sketch_rank=0)
        cfg_s = SolverConfig(k_c=6, k_p=1, eps=1e-3, max_iters=500, seed=4, sketch_rank=10)
        se, oe = solve(prob, cfg_e)
        ss, os_ = solve(prob, cfg_s)
        assert se.iterations == ss.iterations
        np.testing.assert_allclose(se.y, ss.y, atol=1e-12)
        assert ss.last_primal.trace == pytest.approx(se.last_primal.trace, abs=1e-12)
        assert ss.last_primal.cost_ip == pytest.approx(se.last_primal.cost_ip, abs=1e-12)
        xe = oe.dense
        xs = (os_.factor * os_.lams[None, :]) @ os_.factor.T
        assert np.linalg.norm(xe - xs) <= 0.1 * np.linalg.norm(xe)


class TestStateFile:
    def test_round_trip(self, tmp_path, k3):
        prob = build_maxcut(k3)
        cfg = SolverConfig(eps=1e-3, max_iters=200, seed=0, sketch_rank=2)
        state, _ = solve(prob, cfg)
        path = tmp_path / "s.bin"
        save_state(path, state, prob)
        rec = load_state(path)
        state2 = state_from_record(rec, prob)
        np.testing.assert_array_equal(state2.y, state.y)
        np.testing.assert_array_equal(state2.nu, state.nu)
        np.testing.assert_array_equal(state2.model.basis, state.model.basis)
        assert state2.f_y == state.f_y
        assert state2.model.stats.trace == state.model.stats.trace
        np.testing.assert_array_equal(
            state2.model.store.sk.sketch_mat, state.model.store.sk.sketch_mat
        )

    def test_fingerprint_rejects_other_problem(self, tmp_path, k3):
        prob = build_maxcut(k3)
        cfg = SolverConfig(eps=1e-3, max_iters=50, seed=0)
        state, _ = solve(prob, cfg)
        path = tmp_path / "s.bin"
        save_state(path, state, prob)
        other = build_maxcut(random_graph(4, 0.9, 0))
        with pytest.raises(FingerprintMismatch):
            state_from_record(load_state(path), other)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\0" * 200)
        with pytest.raises(ValueError):
            load_state(path)


class TestWarmStartPad:
    def test_identity_mapping_same_problem(self, k3):
        prob = build_maxcut(k3)
        cfg = SolverConfig(eps=1e-3, max_iters=200, seed=0, sketch_rank=0)
        state, _ = solve(prob, cfg)
        mapping = Mapping(np.arange(3), np.arange(3))
        padded = warm_start_pad(state, prob, mapping)
        np.testing.assert_allclose(padded.y, state.y)
        np.testing.assert_allclose(padded.nu, state.nu)
        assert padded.model.stats.trace == pytest.approx(state.model.stats.trace, rel=1e-10)
        np.testing.assert_allclose(
            padded.model.stats.constr_image, state.model.stats.constr_image, atol=1e-10
        )

    def test_new_vertex_gets_zero(self):
        g_small = random_graph(9, 0.5, 60)
        prob_small = build_maxcut(g_small)
        cfg = SolverConfig(k_c=4, k_p=1, eps=1e-3, max_iters=500, seed=0)
        state, _ = solve(prob_small, cfg)
        edges = list(zip(g_small.edges_u, g_small.edges_v, g_small.edges_w))
        edges.append((0, 9, 1.0))
        from specbundle.problem import GraphInstance

        g_big = GraphInstance.from_edges(10, [(int(a), int(b), float(c)) for a, b, c in edges])
        prob_big = build_maxcut(g_big)
        mapping = Mapping(np.arange(9), np.arange(9))
        padded = warm_start_pad(state, prob_big, mapping)
        assert padded.y[9] == 0.0
        assert padded.model.basis.shape == (10, state.model.k)
        # rescale ratio: old trace normalization over new
        assert padded.model.stats.trace == pytest.approx(
            state.model.stats.trace * 9 / 10, rel=1e-9
        )
        state2, _ = solve(prob_big, cfg, init=padded)
        assert state2.status == "converged"

    def test_out_of_range_mapping(self, k3):
        prob = build_maxcut(k3)
        cfg = SolverConfig(eps=1e-3, max_iters=50, seed=0)
        state, _ = solve(prob, cfg)
        with pytest.raises(ValueError):
            warm_start_pad(state, prob, Mapping(np.array([0, 1, 7]), np.arange(3)))


class TestConvergenceGates:
    def test_linf_check_gates_convergence(self):
        g = random_graph(25, 0.3, 90)
        prob = build_maxcut(g)
        loose = SolverConfig(k_c=5, k_p=1, eps=1e-2, max_iters=400, seed=0)
        state, _ = solve(prob, loose)
        assert state.status == "converged"
        strict = SolverConfig(
            k_c=5, k_p=1, eps=1e-2, max_iters=state.iterations, seed=0, linf_check=True
        )
        state2, _ = solve(prob, strict)
        if state2.status == "converged":
            assert state2.residuals.linf_infeas <= 1e-2
        else:
            # the extra gate withheld convergence within the same budget
            assert state2.residuals.linf_infeas > 1e-2 or state2.iterations == state.iterations

    def test_weighted_graph_end_to_end(self):
        rng = np.random.default_rng(91)
        edges = [
            (i, j, float(rng.integers(1, 6)))
            for i in range(12)
            for j in range(i + 1, 12)
            if rng.random() < 0.4
        ]
        from specbundle.problem import GraphInstance
        from specbundle.rounding import maxcut_round
        from _oracles import brute_force_maxcut

        g = GraphInstance.from_edges(12, edges)
        prob = build_maxcut(g)
        cfg = SolverConfig(k_c=6, k_p=1, eps=1e-4, max_iters=1000, seed=0)
        state, out = solve(prob, cfg)
        assert state.status == "converged"
        best = brute_force_maxcut(g)
        relax = prob.unscale_objective(state.last_primal.cost_ip)
        assert relax >= best - 1e-2  # relaxation upper-bounds the cut
        cut = maxcut_round(out.factor, g)
        assert cut.value <= best + 1e-9

    def test_disconnected_graph(self):
        from specbundle.problem import GraphInstance

        g = GraphInstance.from_edges(6, [(0, 1, 1.0), (2, 3, 1.0)])
        prob = build_maxcut(g)
        cfg = SolverConfig(k_c=4, k_p=1, eps=1e-3, max_iters=500, seed=0)
        state, _ = solve(prob, cfg)
        assert state.status == "converged"
        # both edges are cut in the optimum; unscaled value is 2
        assert prob.unscale_objective(state.last_primal.cost_ip) == pytest.approx(
            2.0, abs=1e-2
        )
