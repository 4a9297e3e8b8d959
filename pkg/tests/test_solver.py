import warnings

import numpy as np
import pytest

from proxmkl.duality import primal_objective
from proxmkl.inner import newton_inner
from proxmkl.kernels import (BankConfig, GramStack, KernelSpec, build_kernel_bank,
                             compute_gram, k_norm)
from proxmkl.losses import LossSpec
from proxmkl.prox import soft_threshold
from proxmkl.solver import (Diagnostics, MklModel, c_correspondence,
                            outer_update, predict, predict_on_data, train)
from proxmkl.state import GammaSchedule, SolverConfig, SolverState

from conftest import rand_stack
from instances import classification_instance
from test_inner import make_spec, make_state


class TestOuterUpdate:
    def test_zero_rho(self, rng):
        stack = rand_stack(rng, 8, 4)
        spec = make_spec(rng, 8, "hinge")
        state = make_state(rng, stack, "hinge", n_nonzero=2)
        cfg = SolverConfig(C=0.1)
        new = outer_update(state, np.zeros(8), spec, stack, cfg)
        assert new.b == state.b
        for m, a in state.alpha.items():
            expected = soft_threshold(a, stack.matrices[m],
                                      state.gamma.kernel[m] * cfg.C)
            if np.any(expected != 0):
                assert np.allclose(new.alpha[m], expected, atol=1e-14)
            else:
                assert m not in new.alpha
        assert np.allclose(new.xi, np.maximum(0.0, state.xi - state.gamma.xi))
        assert np.allclose(new.zeta, state.zeta)

    def test_annihilation_is_bitwise_zero(self, rng):
        stack = rand_stack(rng, 6, 3)
        spec = make_spec(rng, 6, "squared")
        state = make_state(rng, stack, "squared", n_nonzero=3, alpha_scale=0.01)
        cfg = SolverConfig(C=100.0)        # threshold kills every block
        new = outer_update(state, rng.normal(scale=0.01, size=6), spec, stack, cfg)
        assert new.alpha == {}

    def test_matches_direct_formula(self, rng):
        stack = rand_stack(rng, 9, 5)
        spec = make_spec(rng, 9, "squared")
        state = make_state(rng, stack, "squared", n_nonzero=3)
        cfg = SolverConfig(C=0.2)
        rho = rng.normal(size=9)
        new = outer_update(state, rho, spec, stack, cfg)
        for m in range(5):
            gm = state.gamma.kernel[m]
            v = state.alpha.get(m, np.zeros(9)) + gm * rho
            expected = soft_threshold(v, stack.matrices[m], gm * cfg.C)
            got = new.alpha.get(m, np.zeros(9))
            assert np.allclose(got, expected, atol=1e-12)
        assert new.b == pytest.approx(state.b + state.gamma.bias * rho.sum())

    def test_gamma_grows_and_caps(self, rng):
        stack = rand_stack(rng, 5, 2)
        spec = make_spec(rng, 5, "squared")
        state = make_state(rng, stack, "squared")
        cfg = SolverConfig(C=0.1, gamma_growth=2.0, gamma_cap=3.0)
        new = outer_update(state, np.zeros(5), spec, stack, cfg)
        assert np.all(new.gamma.kernel == np.minimum(state.gamma.kernel * 2.0, 3.0))
        assert new.gamma.bias == min(state.gamma.bias * 2.0, 3.0)
        assert new.outer_iter == state.outer_iter + 1
        assert np.all(new.gamma.kernel >= state.gamma.kernel * 0)  # positive


def linear_toy():
    X = np.array([[1.0], [-1.0]])
    y = np.array([1.0, -1.0])
    cfg = BankConfig(bandwidths=(), degrees=(1,), subset_policy="joint_only")
    stack = build_kernel_bank(X, cfg)
    return X, y, stack


class TestTrain:
    def test_toy_separable(self):
        X, y, stack = linear_toy()
        spec = LossSpec("logistic", y)
        model = train(stack, y, spec, SolverConfig(C=1e-3, outer_tol=0.01))
        assert model.diagnostics.converged
        rows = {m: stack.values(m) for m in model.active}
        scores = predict(model, rows)
        assert np.all(np.sign(scores) == y)
        assert np.all(y * scores >= 0)

    def test_sparsity_recovery_small(self):
        from proxmkl.data import synth_sparse_mkl
        ds, stack, informative = synth_sparse_mkl(50, 20, 2, seed=1)
        model = train(stack, ds.y, LossSpec("logistic", ds.y),
                      SolverConfig(C=0.5, outer_tol=0.01))
        assert set(informative) <= set(model.active)
        assert model.n_active <= len(informative) + 3

    def test_agrees_with_ist(self, rng):
        from proxmkl.ist import ist_solve
        stack, spec = classification_instance(50, 6, 8, 0, 1, loss="squared")
        C = 0.3
        model = train(stack, spec.y, spec, SolverConfig(C=C, outer_tol=1e-6))
        ist_model = ist_solve(stack, spec.y, spec, C, tol=1e-11, max_iter=40000)
        p1 = primal_objective(_as_state(model, stack), stack, spec, C)
        p2 = primal_objective(_as_state(ist_model, stack), stack, spec, C)
        assert abs(p1 - p2) / abs(p1) <= 1e-4

    def test_unconverged_partial_model(self, rng):
        stack, spec = classification_instance(40, 5, 6, 2, 3)
        model = train(stack, spec.y, spec, SolverConfig(C=0.05, max_outer=2))
        assert not model.diagnostics.converged
        assert model.diagnostics.outer_iters == 2
        assert any("without reaching" in w for w in model.diagnostics.warnings)

    def test_huge_C_zero_model_warns(self, rng):
        stack, spec = classification_instance(30, 4, 5, 4, 5)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            model = train(stack, spec.y, spec, SolverConfig(C=50.0))
        assert model.active == []
        assert any("no active kernels" in str(w.message) for w in caught)

    def test_weights_sum_to_one(self, rng):
        stack, spec = classification_instance(60, 6, 10, 6, 7)
        model = train(stack, spec.y, spec, SolverConfig(C=0.1))
        assert model.active
        assert sum(model.weights.values()) == pytest.approx(1.0, abs=1e-8)
        assert all(w >= 0 for w in model.weights.values())
        for m, a in model.alpha.items():
            assert np.any(a != 0.0)

    def test_iterate_sparsity_is_exact(self, rng):
        # blocks at or below threshold never appear in the state dict
        stack, spec = classification_instance(40, 5, 8, 8, 9)
        cfg = SolverConfig(C=0.2)
        state = SolverState.initial(8, 40, hinge=False, config=cfg)
        rho_prev = None
        for _ in range(6):
            res = newton_inner(state, spec, stack, cfg, rho_prev)
            gam = state.gamma.kernel
            expected_active = [m for m in range(8) if np.sqrt(
                stack.quad(m, state.alpha.get(m, np.zeros(40)) + gam[m] * res.rho)
            ) > gam[m] * cfg.C]
            state = outer_update(state, res.rho, spec, stack, cfg)
            assert sorted(state.alpha) == expected_active
            rho_prev = res.rho

    def test_proximal_descent(self, rng):
        # the proximal subproblem value at the new iterate does not exceed
        # its value at the old iterate (= the primal there)
        stack, spec = classification_instance(50, 6, 10, 10, 11)
        cfg = SolverConfig(C=0.1)
        state = SolverState.initial(10, 50, hinge=False, config=cfg)
        rho_prev = None
        for _ in range(8):
            res = newton_inner(state, spec, stack, cfg, rho_prev)
            new = outer_update(state, res.rho, spec, stack, cfg)
            p_old = primal_objective(state, stack, spec, cfg.C)
            p_new = primal_objective(new, stack, spec, cfg.C)
            prox = 0.0
            for m in set(state.alpha) | set(new.alpha):
                d = (new.alpha.get(m, np.zeros(50))
                     - state.alpha.get(m, np.zeros(50)))
                prox += stack.quad(m, d) / (2 * state.gamma.kernel[m])
            prox += (new.b - state.b) ** 2 / (2 * state.gamma.bias)
            assert p_new + prox <= p_old + 1e-8 * max(1.0, abs(p_old))
            state = new
            rho_prev = res.rho


def _as_state(model, stack):
    return SolverState(alpha=model.alpha, b=model.b,
                       gamma=GammaSchedule.constant(stack.n_kernels, 1.0),
                       outer_iter=0, n_kernels=stack.n_kernels,
                       n_samples=stack.n_samples)


def _manual_model(alpha, b, stack, loss="logistic", train_X=None):
    norms = {m: k_norm(stack.matrices[m], a) for m, a in alpha.items()}
    total = sum(norms.values())
    return MklModel(
        alpha=alpha, b=b, active=sorted(alpha),
        weights={m: n / total if total else 0.0 for m, n in norms.items()},
        block_norms=norms, loss=loss, C=0.1,
        kernel_specs={m: stack.spec(m) for m in alpha},
        scales={m: stack.scale(m) for m in alpha},
        diagnostics=Diagnostics(), train_X=train_X)


class TestPredict:
    def test_zero_model_constant(self, rng):
        X = rng.normal(size=(6, 2))
        stack = build_kernel_bank(X, BankConfig(bandwidths=(1.0,), degrees=(),
                                                subset_policy="joint_only"))
        model = _manual_model({}, 0.7, stack, train_X=X)
        out = predict_on_data(model, rng.normal(size=(4, 2)))
        assert np.allclose(out, 0.7)

    def test_unit_coefficient_column_slice(self, rng):
        stack = rand_stack(rng, 7, 2)
        e2 = np.zeros(7)
        e2[2] = 1.0
        model = _manual_model({0: e2}, 0.0, stack)
        G = rng.normal(size=(5, 7))
        out = predict(model, {0: G})
        assert np.allclose(out, G[:, 2])

    def test_missing_gram_rows(self, rng):
        stack = rand_stack(rng, 5, 2)
        model = _manual_model({0: rng.normal(size=5), 1: rng.normal(size=5)},
                              0.0, stack)
        with pytest.raises(Exception):
            predict(model, {0: rng.normal(size=(3, 5))})

    def test_predict_on_data_matches_train_gram(self, rng):
        # scoring the training points through stored specs reproduces the
        # training decision values up to the diagonal jitter
        X = rng.normal(size=(20, 3))
        spec_k = KernelSpec("gaussian", bandwidth=1.0)
        G = compute_gram(spec_k, X)
        stack = GramStack([G])
        y = np.where(rng.random(20) < 0.5, 1.0, -1.0)
        model = train(stack, y, LossSpec("logistic", y), SolverConfig(C=0.01))
        model.train_X = X
        if not model.active:
            pytest.skip("degenerate draw")
        direct = predict(model, {m: stack.values(m) for m in model.active})
        via_specs = predict_on_data(model, X)
        assert np.max(np.abs(direct - via_specs)) <= 1e-6


class TestCorrespondence:
    def test_arithmetic(self, rng):
        stack = rand_stack(rng, 4, 2)
        a0 = rng.normal(size=4)
        a0 *= 1.2 / k_norm(stack.matrices[0], a0)
        a1 = rng.normal(size=4)
        a1 *= 0.8 / k_norm(stack.matrices[1], a1)
        model = _manual_model({0: a0, 1: a1}, 0.0, stack)
        assert c_correspondence(model, 0.05) == pytest.approx(0.1, abs=1e-12)

    def test_zero_model_warns(self, rng):
        stack = rand_stack(rng, 4, 1)
        model = _manual_model({}, 0.0, stack)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            assert c_correspondence(model, 0.05) == 0.0
        assert caught
