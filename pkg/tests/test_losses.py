import numpy as np
import pytest

from proxmkl.errors import ConjugateDomainError, ContractError, InputError
from proxmkl.losses import (LossSpec, conjugate_eval,
                            conjugate_feasible, hinge_conjugate_linear,
                            loss_grad, loss_value)


def grid_sup_conjugate(y, rho, loss, lo=-60.0, hi=60.0, num=2_000_001):
    """sup_f (-rho*f - loss(y, f)) on a fine grid; independent oracle."""
    f = np.linspace(lo, hi, num)
    if loss == "squared":
        vals = -rho * f - (y - f) ** 2
    else:
        vals = -rho * f - np.log1p(np.exp(-y * f))
    return float(vals.max())


class TestLossValues:
    def test_hinge_margin_one(self):
        spec = LossSpec("hinge", [1.0])
        assert loss_value(spec, [1.0]) == 0.0

    def test_logistic_at_zero(self):
        spec = LossSpec("logistic", [1.0])
        assert loss_value(spec, [0.0]) == pytest.approx(np.log(2), abs=1e-12)

    def test_squared(self):
        spec = LossSpec("squared", [2.0])
        assert loss_value(spec, [0.5]) == pytest.approx(2.25)

    def test_bad_classification_labels(self):
        with pytest.raises(InputError):
            LossSpec("logistic", [0.0, 1.0])

    def test_hinge_grad_unavailable(self):
        spec = LossSpec("hinge", [1.0, -1.0])
        with pytest.raises(ContractError):
            loss_grad(spec, np.zeros(2))


class TestConjugate:
    def test_logistic_symmetric_point(self):
        spec = LossSpec("logistic", [1.0])
        ce = conjugate_eval(spec, np.array([0.5]))
        assert ce.value == pytest.approx(-np.log(2), abs=1e-12)
        assert ce.gradient[0] == pytest.approx(0.0, abs=1e-12)

    def test_squared_value_against_grid_sup(self):
        spec = LossSpec("squared", [1.0])
        ce = conjugate_eval(spec, np.array([2.0]))
        assert ce.value == pytest.approx(-1.0, abs=1e-12)
        assert ce.value == pytest.approx(grid_sup_conjugate(1.0, 2.0, "squared"),
                                         abs=1e-6)

    def test_logistic_value_against_grid_sup(self, rng):
        y, rho = 1.0, 0.3
        spec = LossSpec("logistic", [y])
        ce = conjugate_eval(spec, np.array([rho]))
        assert ce.value == pytest.approx(grid_sup_conjugate(y, rho, "logistic"),
                                         abs=1e-6)

    def test_gradient_hessian_match_finite_differences(self, rng):
        n = 8
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        for kind in ("logistic", "squared"):
            spec = LossSpec(kind, y)
            for _ in range(25):
                u = rng.uniform(0.1, 0.9, size=n)
                rho = y * u if kind == "logistic" else rng.normal(size=n)
                ce = conjugate_eval(spec, rho)
                h = 1e-5
                for i in range(n):
                    e = np.zeros(n)
                    e[i] = h
                    vp = conjugate_eval(spec, rho + e).value
                    vm = conjugate_eval(spec, rho - e).value
                    gfd = (vp - vm) / (2 * h)
                    assert abs(ce.gradient[i] - gfd) <= 1e-5 * max(1.0, abs(gfd))
                    gp = conjugate_eval(spec, rho + e).gradient[i]
                    gm = conjugate_eval(spec, rho - e).gradient[i]
                    hfd = (gp - gm) / (2 * h)
                    assert abs(ce.hessian_diag[i] - hfd) <= 1e-5 * max(1.0, abs(hfd))

    def test_logistic_domain_error_carries_indices(self):
        y = np.array([1.0, -1.0, 1.0])
        spec = LossSpec("logistic", y)
        rho = np.array([0.5, 0.5, 0.5])      # u = (0.5, -0.5, 0.5)
        with pytest.raises(ConjugateDomainError) as exc:
            conjugate_eval(spec, rho)
        assert exc.value.indices == [1]
        assert not conjugate_feasible(spec, rho)

    def test_logistic_hessian_strictly_positive(self, rng):
        n = 12
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        spec = LossSpec("logistic", y)
        for _ in range(20):
            u = rng.uniform(1e-4, 1 - 1e-4, size=n)
            ce = conjugate_eval(spec, y * u)
            assert np.all(ce.hessian_diag > 0)

    def test_hinge_conjugate_linear(self, rng):
        spec = LossSpec("hinge", [1.0, -1.0])
        assert hinge_conjugate_linear(spec, np.array([0.3, 0.3])) == pytest.approx(0.0)
        assert hinge_conjugate_linear(spec, np.zeros(2)) == 0.0
        n = 15
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        rho = rng.normal(size=n)
        spec = LossSpec("hinge", y)
        assert hinge_conjugate_linear(spec, rho) == pytest.approx(-float(y @ rho))

    def test_hinge_has_no_smooth_conjugate(self):
        spec = LossSpec("hinge", [1.0])
        assert not spec.smooth_conjugate
        with pytest.raises(ContractError):
            conjugate_eval(spec, np.array([0.5]))


class TestFenchelYoung:
    def test_inequality_and_equality_at_matching_point(self, rng):
        n = 6
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        for kind in ("logistic", "squared"):
            spec = LossSpec(kind, y if kind == "logistic" else rng.normal(size=n))
            for _ in range(30):
                z = rng.normal(scale=2.0, size=n)
                # feasible dual points
                if kind == "logistic":
                    rho = spec.y * rng.uniform(0.05, 0.95, size=n)
                else:
                    rho = rng.normal(size=n)
                fy = loss_value(spec, z) + conjugate_eval(spec, rho).value
                assert fy >= -float(rho @ z) - 1e-8
                rho_star = -loss_grad(spec, z)
                fy_star = loss_value(spec, z) + conjugate_eval(spec, rho_star).value
                assert fy_star == pytest.approx(-float(rho_star @ z), abs=1e-8)
