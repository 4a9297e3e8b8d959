import numpy as np
import pytest
from scipy.optimize import brentq

from proxmkl.errors import ContractError
from proxmkl.ist import IstState, ist_init, ist_solve, ist_step
from proxmkl.kernels import GramStack
from proxmkl.losses import LossSpec
from proxmkl.prox import soft_threshold

from conftest import rand_pd_gram, rand_stack
from instances import classification_instance
from test_inner import make_spec


class TestIstStep:
    def test_zero_gradient_applies_pure_shrinkage(self, rng):
        stack = GramStack([rand_pd_gram(rng, 8)])
        a = rng.normal(size=8)
        b = 0.3
        y = stack.values(0) @ a + b        # squared loss is exactly minimized
        spec = LossSpec("squared", y)
        st = ist_init(stack, spec)
        st = IstState(alpha={0: a}, b=b, step=st.step, step0=st.step0, it=0,
                      objective=0.0, z=y.copy())
        new = ist_step(st, stack, spec, 0.05)
        assert new.b == st.b
        expected = soft_threshold(a, stack.matrices[0], st.step * 0.05)
        assert np.allclose(new.alpha.get(0, np.zeros(8)), expected, atol=1e-12)

    def test_annihilation(self, rng):
        stack = rand_stack(rng, 6, 2)
        spec = make_spec(rng, 6, "squared")
        st = ist_init(stack, spec)
        new = ist_step(st, stack, spec, 1e4)      # threshold kills all blocks
        assert new.alpha == {}

    def test_matches_displayed_update(self, rng):
        stack = rand_stack(rng, 7, 3)
        spec = make_spec(rng, 7, "logistic")
        st = ist_init(stack, spec)
        # a conservative step is accepted on the first try, so the update is
        # exactly one shrinkage of alpha_m - s * grad
        s = st.step / 10
        alpha = {0: rng.normal(scale=0.2, size=7)}
        z = stack.values(0) @ alpha[0] + 0.1
        st = IstState(alpha=alpha, b=0.1, step=s, step0=st.step0, it=0,
                      objective=0.0, z=z)
        new = ist_step(st, stack, spec, 0.05)
        g = -spec.y / (1 + np.exp(spec.y * z))
        for m in range(3):
            cand = alpha.get(m, np.zeros(7)) - s * g
            expected = soft_threshold(cand, stack.matrices[m], s * 0.05)
            got = new.alpha.get(m, np.zeros(7))
            assert np.allclose(got, expected, atol=1e-12)
        assert new.b == pytest.approx(0.1 - s * g.sum())

    def test_hinge_rejected(self, rng):
        stack = rand_stack(rng, 5, 1)
        spec = make_spec(rng, 5, "hinge")
        st = ist_init(stack, LossSpec("squared", np.zeros(5)))
        with pytest.raises(ContractError):
            ist_step(st, stack, spec, 0.1)


def single_kernel_ridge_oracle(K, y, C):
    """Direct solution of the smooth region of the one-kernel squared-loss
    problem: stationarity gives (K + tI) alpha + b 1 = y with t = C/(2||a||_K)
    and sum(K alpha + b - y) = 0; solve the scalar fixed point in t."""
    n = len(y)

    def alpha_b(t):
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = K + t * np.eye(n)
        A[:n, n] = 1.0
        A[n, :n] = K.sum(axis=0)
        A[n, n] = n
        rhs = np.concatenate([y, [y.sum()]])
        sol = np.linalg.solve(A, rhs)
        return sol[:n], sol[n]

    def resid(t):
        a, _ = alpha_b(t)
        return t - C / (2 * np.sqrt(a @ K @ a))

    t_star = brentq(resid, 1e-10, 1e6, xtol=1e-14)
    a, b = alpha_b(t_star)
    z = K @ a + b
    return float(np.sum((y - z) ** 2)) + C * np.sqrt(a @ K @ a)


class TestIstSolve:
    def test_single_kernel_matches_direct_solution(self, rng):
        stack = GramStack([rand_pd_gram(rng, 15)])
        y = rng.normal(size=15)
        spec = LossSpec("squared", y)
        C = 0.1
        model = ist_solve(stack, y, spec, C, tol=1e-13, max_iter=50000)
        assert model.active == [0]
        z = stack.values(0) @ model.alpha[0] + model.b
        obj = float(np.sum((y - z) ** 2)) + C * model.block_norms[0]
        oracle = single_kernel_ridge_oracle(stack.values(0), y, C)
        assert abs(obj - oracle) <= 1e-4 * max(1.0, abs(oracle))

    def test_huge_C_gives_zero_model(self, rng):
        stack, spec = classification_instance(30, 4, 5, 0, 1)
        with pytest.warns(UserWarning):
            model = ist_solve(stack, spec.y, spec, 1e4, max_iter=200)
        assert model.active == []

    def test_monotone_descent(self, rng):
        stack, spec = classification_instance(40, 5, 8, 2, 3)
        st = ist_init(stack, spec)
        objs = [st.objective]
        for _ in range(60):
            st = ist_step(st, stack, spec, 0.1)
            objs.append(st.objective)
        diffs = np.diff(objs)
        assert np.all(diffs <= 1e-10)

    def test_gap_stopping_mode(self, rng):
        stack, spec = classification_instance(40, 5, 8, 4, 5)
        model = ist_solve(stack, spec.y, spec, 0.3, gap_tol=0.05, gap_every=10,
                          max_iter=20000)
        assert model.diagnostics.converged
        assert model.diagnostics.final_gap <= 0.05
        assert model.diagnostics.trace          # gap rows were recorded

    def test_determinism(self, rng):
        stack, spec = classification_instance(30, 4, 6, 6, 7)
        m1 = ist_solve(stack, spec.y, spec, 0.2, tol=1e-8, max_iter=3000)
        m2 = ist_solve(stack, spec.y, spec, 0.2, tol=1e-8, max_iter=3000)
        assert m1.active == m2.active
        for m in m1.active:
            assert np.array_equal(m1.alpha[m], m2.alpha[m])
