"""The (x, u, s) coordinates, moment coordinates, and the zero set."""

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adjbic.errors import DomainError
from adjbic.geometry import (
    TransformedPoint,
    ZeroSetComponent,
    p_poly,
    t1_forward,
    t1_inverse,
    t1_jacobian,
    t2_forward,
    theta_at,
    write_points_csv,
    zero_set_components,
    zero_set_sample,
)
from adjbic.model import ModelParams, ProbTable, joint_from_params, marginals, product_table


def random_params(rng, n):
    return ModelParams(rng.uniform(0.02, 0.98, n), rng.uniform(0.02, 0.98, n), rng.uniform(0.02, 0.98))


def theta_from_moments(q: TransformedPoint) -> np.ndarray:
    """Rebuild the joint table from central moments.

    P(X = d) = E prod_i [P_i(d_i) + (2 d_i - 1)(X_i - x_i)], expanded over
    subsets I with E prod_{i in I}(X_i - x_i) = z_I (zero for singletons).
    """
    z = t2_forward(q)
    n = q.n
    out = np.zeros(2**n)
    for k in range(2**n):
        d = [(k >> (n - 1 - i)) & 1 for i in range(n)]
        base = [q.x[i] if d[i] else 1 - q.x[i] for i in range(n)]
        total = np.prod(base)
        for r in range(2, n + 1):
            for I in itertools.combinations(range(n), r):
                rest = np.prod([base[i] for i in range(n) if i not in I])
                sign = np.prod([2 * d[i] - 1 for i in I])
                total += rest * sign * z[I]
        out[k] = total
    return out


class TestT1:
    def test_equal_components(self):
        q = t1_forward(ModelParams([0.3, 0.8], [0.3, 0.8], 0.5))
        assert q.s == 0.0
        np.testing.assert_array_equal(q.u, 0.0)
        np.testing.assert_allclose(q.x, [0.3, 0.8])

    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        for n in range(1, 7):
            p = random_params(rng, n)
            back = t1_inverse(t1_forward(p))
            np.testing.assert_allclose(back.as_vector(), p.as_vector(), atol=1e-14)

    def test_inverse_at_independence_point(self):
        p = t1_inverse(TransformedPoint([0.2, 0.6], [0.0, 0.0], 0.0))
        np.testing.assert_allclose(p.a, [0.2, 0.6])
        np.testing.assert_allclose(p.b, [0.2, 0.6])
        assert p.t == 0.5

    def test_inverse_rejects_boundary(self):
        g = np.array([0.3, 0.6])
        q = TransformedPoint(g, (g - 1) / 2 + 0.1, 1.0)
        with pytest.raises(DomainError):
            t1_inverse(q)

    def test_s_out_of_range(self):
        with pytest.raises(DomainError):
            TransformedPoint([0.5], [0.0], 1.5)

    @pytest.mark.parametrize("n", range(1, 7))
    def test_jacobian_determinant(self, n):
        rng = np.random.default_rng(n)
        target = 2.0 ** (-n + 1)
        for _ in range(100):
            det = abs(np.linalg.det(t1_jacobian(random_params(rng, n))))
            assert abs(det - target) / target <= 1e-6

    def test_singleton_moments_are_marginals(self):
        rng = np.random.default_rng(5)
        for n in (2, 3, 4):
            p = random_params(rng, n)
            z = t2_forward(t1_forward(p))
            np.testing.assert_allclose(
                [z[(i,)] for i in range(n)], marginals(joint_from_params(p)), atol=1e-14
            )


class TestPPoly:
    @pytest.mark.parametrize("s", [-0.5, 0.0, 0.9])
    def test_p2(self, s):
        assert p_poly(2, s) == pytest.approx(1 - s * s, abs=1e-15)

    @pytest.mark.parametrize("r", range(2, 8))
    def test_vanishes_at_ends(self, r):
        assert p_poly(r, 1.0) == 0.0
        assert p_poly(r, -1.0) == 0.0

    @given(st.floats(-1, 1))
    def test_p3(self, s):
        assert p_poly(3, s) == pytest.approx(-2 * s * (1 - s * s), abs=1e-14)

    def test_r_too_small(self):
        with pytest.raises(DomainError):
            p_poly(1, 0.0)


class TestT2:
    def test_zero_u(self):
        z = t2_forward(TransformedPoint([0.2, 0.4, 0.6], [0, 0, 0], 0.3))
        for key, val in z.items():
            if len(key) == 1:
                assert val == [0.2, 0.4, 0.6][key[0]]
            else:
                assert val == 0.0

    @pytest.mark.parametrize("s", [-1.0, 1.0])
    def test_boundary_s(self, s):
        z = t2_forward(TransformedPoint([0.5, 0.5, 0.5], [0.1, -0.2, 0.05], s))
        assert all(v == 0.0 for k, v in z.items() if len(k) >= 2)

    def test_pair_value(self):
        z = t2_forward(TransformedPoint([0.5, 0.5], [0.1, 0.2], 0.0))
        assert z[(0, 1)] == pytest.approx(0.02, abs=1e-16)

    def test_moments_rebuild_theta(self):
        rng = np.random.default_rng(11)
        for n in (2, 3, 4, 5):
            for _ in range(5):
                p = random_params(rng, n)
                q = t1_forward(p)
                np.testing.assert_allclose(
                    theta_from_moments(q), joint_from_params(p).cells, atol=1e-14
                )


class TestZeroSet:
    gammas = [(0.3, 0.5, 0.7), (0.15, 0.8, 0.45, 0.6), (0.55, 0.25)]

    def test_components(self):
        assert zero_set_components(3) == ["U0-", "U0+", "U01", "U02", "U03"]

    def test_bad_component(self):
        with pytest.raises(DomainError):
            ZeroSetComponent("U04", (0.5, 0.5, 0.5))
        with pytest.raises(DomainError):
            ZeroSetComponent("U0x", (0.5,))

    def test_plus_samples(self):
        g = np.array([0.3, 0.5, 0.7])
        for q in zero_set_sample(g, "U0+", 200, seed=1):
            assert q.s == 1.0
            np.testing.assert_array_equal(q.x, g)
            assert ZeroSetComponent("U0+", tuple(g)).contains(q)

    def test_uj_with_zero_u_is_independence_point(self):
        g = np.array([0.3, 0.5, 0.7])
        q = TransformedPoint(g, np.zeros(3), 0.2)
        assert ZeroSetComponent("U02", tuple(g)).contains(q)
        np.testing.assert_allclose(theta_at(q).cells, product_table(g).cells, atol=1e-15)

    @pytest.mark.parametrize("gamma", gammas)
    def test_samples_lie_in_component(self, gamma):
        for label in zero_set_components(len(gamma)):
            comp = ZeroSetComponent(label, gamma)
            for q in zero_set_sample(gamma, label, 100, seed=7):
                assert comp.contains(q)

    @pytest.mark.parametrize("gamma", gammas)
    def test_zero_loss(self, gamma):
        y = product_table(gamma)
        f_max = float(y.cells @ np.log(y.cells))
        for label in zero_set_components(len(gamma)):
            for q in zero_set_sample(gamma, label, 200, seed=3):
                th = theta_at(q).cells
                assert abs(f_max - float(y.cells @ np.log(th))) <= 1e-10

    def test_deterministic(self):
        a = zero_set_sample((0.3, 0.6), "U01", 20, seed=9)
        b = zero_set_sample((0.3, 0.6), "U01", 20, seed=9)
        np.testing.assert_array_equal([q.as_vector() for q in a], [q.as_vector() for q in b])

    def test_csv(self, tmp_path):
        pts = zero_set_sample((0.3, 0.6), "U0-", 5, seed=0)
        path = tmp_path / "pts.csv"
        write_points_csv(pts, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x1,x2,u1,u2,s"
        assert len(lines) == 6


class TestPrincipalPart:
    """Near x = gamma, u = 0 with s inside (-1, 1) the loss behaves like
    sum x~^2 + sum_{l != k} u_l^2 u_k^2."""

    @pytest.mark.parametrize("s0", [-0.6, 0.0, 0.4])
    def test_ratio_bounded(self, s0):
        gamma = np.array([0.3, 0.5, 0.7])
        y = product_table(gamma).cells
        rng = np.random.default_rng(2)
        ratios = []
        for _ in range(10_000):
            dx = rng.uniform(-1e-2, 1e-2, 3)
            u = rng.uniform(-1e-2, 1e-2, 3)
            s = s0 + rng.uniform(-1e-2, 1e-2)
            th = theta_at(TransformedPoint(gamma + dx, u, s)).cells
            loss = float(y @ np.log(y / th))
            u2 = u * u
            principal = float(dx @ dx + (u2.sum() ** 2 - u2 @ u2))
            ratios.append(loss / principal)
        ratios = np.array(ratios)
        assert ratios.min() > 0.05
        assert ratios.max() < 20.0


class TestThetaAt:
    def test_matches_joint_interior(self):
        rng = np.random.default_rng(4)
        p = random_params(rng, 3)
        np.testing.assert_allclose(
            theta_at(t1_forward(p)).cells, joint_from_params(p).cells, atol=1e-15
        )

    def test_outside_closed_cube(self):
        with pytest.raises(DomainError):
            theta_at(TransformedPoint([0.5], [0.6], 0.0))

    def test_returns_table(self):
        assert isinstance(theta_at(TransformedPoint([0.5], [0.1], 1.0)), ProbTable)
