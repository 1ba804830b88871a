"""Estimators of the marginal likelihood and of the toy integral."""

import itertools
import math

import numpy as np
import pytest
from scipy import integrate as spi

from adjbic.errors import DomainError, IntegrationError
from adjbic.integrate import METHODS, EvidenceEstimate, default_method, marginal_likelihood, toy_integral
from adjbic.integrate.quadrature import covariance_density_n2, mixing_density_n1
from adjbic.integrate.sampling import pareto_khat
from adjbic.mle import em_fit
from adjbic.model import ProbTable, loglik_batch

Y1 = ProbTable([0.7, 0.3])
Y2 = ProbTable.normalized([0.1, 0.2, 0.3, 0.4])
U2 = ProbTable(np.full(4, 0.25))
SMALL = {"quasi-mc": 1 << 14, "importance": 1 << 14, "thermo": 8 * 1281 * 16}


def estimate_or_none(y, N, method, seed=1):
    try:
        return marginal_likelihood(y, N, method, seed=seed)
    except IntegrationError:
        return None


class TestEvidenceEstimate:
    def test_negative_stderr(self):
        with pytest.raises(DomainError):
            EvidenceEstimate(0.0, -1.0, "thermo", 1, 0)

    def test_default_method(self):
        assert default_method(1) == default_method(2) == "quadrature"
        assert default_method(3) == "thermo"

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            marginal_likelihood(Y1, 10, "simpson")

    def test_quadrature_needs_small_dimension(self):
        with pytest.raises(DomainError):
            marginal_likelihood(ProbTable(np.full(8, 1 / 8)), 10, "quadrature")

    def test_rejects_zero_cells(self):
        with pytest.raises(DomainError):
            marginal_likelihood(ProbTable([1.0, 0.0]), 10)

    def test_negative_N(self):
        with pytest.raises(DomainError):
            marginal_likelihood(Y1, -1.0)


class TestMarginalLikelihood:
    @pytest.mark.parametrize("method", METHODS)
    def test_zero_N(self, method):
        y = ProbTable(np.full(8, 1 / 8)) if method != "quadrature" else Y2
        est = marginal_likelihood(y, 0, method)
        assert est.ln_I == 0.0 and est.stderr == 0.0

    @pytest.mark.parametrize("y", [Y1, Y2])
    def test_decreasing_in_N(self, y):
        vals = [marginal_likelihood(y, N).ln_I for N in (1, 10, 100, 1000)]
        assert np.all(np.diff(vals) < 0)

    def test_n1_nquad_oracle(self):
        N = 5.0

        def f(a, b, t):
            x = t * a + (1 - t) * b
            return x ** (N * 0.3) * (1 - x) ** (N * 0.7)

        val, _ = spi.nquad(f, [[0, 1]] * 3, opts={"epsabs": 1e-13})
        est = marginal_likelihood(Y1, N, "quadrature")
        assert est.ln_I == pytest.approx(math.log(val), abs=1e-7)

    def test_n2_monte_carlo_oracle(self):
        # at N = 2 the integrand is bounded away from 0, so plain MC is accurate
        rng = np.random.default_rng(0)
        omega = rng.uniform(size=(2_000_000, 5))
        w = np.exp(2.0 * loglik_batch(omega, Y2.cells))
        mc, se = w.mean(), w.std(ddof=1) / math.sqrt(w.size)
        est = marginal_likelihood(Y2, 2.0, "quadrature")
        assert abs(math.exp(est.ln_I) - mc) <= 4 * se

    def test_n1_qmc_matches_quadrature(self):
        y = ProbTable([0.5, 0.5])
        q = marginal_likelihood(y, 100, "quadrature")
        s = marginal_likelihood(y, 100, "quasi-mc", seed=3)
        assert abs(q.ln_I - s.ln_I) <= 3 * math.hypot(q.stderr, s.stderr)

    @pytest.mark.parametrize("y", [Y1, Y2, U2], ids=["n1", "n2", "n2-uniform"])
    @pytest.mark.parametrize("N", [10.0, 1e3, 1e5])
    def test_cross_method_agreement(self, y, N):
        ests = {m: estimate_or_none(y, N, m) for m in METHODS}
        # quadrature and thermo must always deliver; samplers may refuse heavy tails
        assert ests["quadrature"] is not None and ests["thermo"] is not None
        got = {m: e for m, e in ests.items() if e is not None}
        for a, b in itertools.combinations(got.values(), 2):
            assert abs(a.ln_I - b.ln_I) <= 3 * math.hypot(a.stderr, b.stderr), (a.method, b.method)

    @pytest.mark.parametrize("method", ["quasi-mc", "importance"])
    def test_heavy_tails_refused(self, method):
        with pytest.raises(IntegrationError, match="heavy-tailed"):
            marginal_likelihood(Y2, 1e5, method, seed=1)

    @pytest.mark.parametrize("method", ["quasi-mc", "importance", "thermo"])
    def test_worker_count_invariance(self, method):
        a = marginal_likelihood(Y1, 50, method, SMALL[method], seed=7, workers=1)
        b = marginal_likelihood(Y1, 50, method, SMALL[method], seed=7, workers=4)
        assert a.ln_I == b.ln_I and a.stderr == b.stderr

    @pytest.mark.parametrize("method", ["quasi-mc", "importance", "thermo"])
    def test_seed_changes_estimate(self, method):
        a = marginal_likelihood(Y1, 50, method, SMALL[method], seed=7)
        b = marginal_likelihood(Y1, 50, method, SMALL[method], seed=8)
        assert a.ln_I != b.ln_I

    @pytest.mark.parametrize("method", ["quasi-mc", "importance", "thermo"])
    def test_tiny_budget_fails(self, method):
        with pytest.raises(IntegrationError):
            marginal_likelihood(Y1, 50, method, budget=10)

    @pytest.mark.parametrize("y", [Y1, Y2])
    def test_jensen_and_maximum_bounds(self, y):
        rng = np.random.default_rng(6)
        ell = loglik_batch(rng.uniform(size=(200_000, 2 * y.n + 1)), y.cells)
        mean, se = ell.mean(), ell.std(ddof=1) / math.sqrt(ell.size)
        f_Y = em_fit(y).f_Y
        for N in (10.0, 1e3, 1e5):
            est = marginal_likelihood(y, N)
            assert est.ln_I + 3 * est.stderr >= N * (mean - 3 * se)
            assert est.ln_I - 3 * est.stderr <= N * f_Y


class TestPushforwardDensities:
    def test_n1_mass(self):
        mass, _ = spi.quad(mixing_density_n1, 0, 1)
        assert mass == pytest.approx(1.0, abs=1e-10)

    def test_n1_histogram(self):
        rng = np.random.default_rng(1)
        a, b, t = rng.uniform(size=(3, 1_000_000))
        x = t * a + (1 - t) * b
        for lo, hi in [(0.0, 0.1), (0.3, 0.5), (0.45, 0.55), (0.9, 1.0)]:
            p = np.mean((x > lo) & (x < hi))
            expect, _ = spi.quad(mixing_density_n1, lo, hi)
            assert abs(p - expect) <= 4 * math.sqrt(expect * (1 - expect) / x.size)

    @pytest.mark.parametrize(
        "box",
        [((0.3, 0.5), (0.4, 0.7), (0.005, 0.03)), ((0.1, 0.6), (0.2, 0.5), (-0.02, -0.001)),
         ((0.4, 0.6), (0.4, 0.6), (-0.002, 0.002))],
    )
    def test_n2_box_probability(self, box):
        rng = np.random.default_rng(2)
        a1, a2, b1, b2, t = rng.uniform(size=(5, 2_000_000))
        x1 = t * a1 + (1 - t) * b1
        x2 = t * a2 + (1 - t) * b2
        c = t * (1 - t) * (a1 - b1) * (a2 - b2)
        (l1, h1), (l2, h2), (lc, hc) = box
        hit = (x1 > l1) & (x1 < h1) & (x2 > l2) & (x2 < h2) & (c > lc) & (c < hc)
        p = hit.mean()
        inner = {"limit": 200, **({"points": [0.0]} if lc < 0 < hc else {})}
        expect, _ = spi.nquad(
            lambda cc, u, v: covariance_density_n2(v, u, cc),
            [[lc, hc], [l2, h2], [l1, h1]],
            opts=[inner, {"limit": 100}, {"limit": 100}],
        )
        assert abs(p - expect) <= 4 * math.sqrt(expect * (1 - expect) / c.size) + 1e-6


class TestParetoShape:
    def test_light_tail(self):
        rng = np.random.default_rng(0)
        assert pareto_khat(np.log(rng.uniform(size=100_000))) < 0.0

    def test_heavy_tail(self):
        # Pareto weights with tail index 1 have shape 1
        rng = np.random.default_rng(0)
        logw = np.log(rng.pareto(1.0, size=100_000) + 1.0)
        assert pareto_khat(logw) == pytest.approx(1.0, abs=0.15)

    def test_needs_samples(self):
        with pytest.raises(IntegrationError):
            pareto_khat(np.array([0.0, 1.0, -np.inf]))


class TestToyIntegral:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_zero_N(self, n):
        assert toy_integral(n, 0, eps=0.7).ln_I == pytest.approx(n * math.log(1.4), abs=1e-15)

    @pytest.mark.parametrize("N", [1.0, 1e6])
    def test_n1(self, N):
        assert toy_integral(1, N, eps=0.3).ln_I == pytest.approx(math.log(0.6), abs=1e-15)

    def test_n2_closed_form(self):
        # J = 4 int_0^1 sqrt(pi / (8 N u^2)) erf(sqrt(2N) u) du via dblquad
        N = 50.0
        val, _ = spi.dblquad(lambda v, u: math.exp(-2 * N * u * u * v * v), 0, 1, 0, 1, epsabs=1e-13)
        assert toy_integral(2, N).ln_I == pytest.approx(math.log(4 * val), abs=1e-8)

    def test_qmc_matches_quadrature(self):
        q = toy_integral(3, 1e4, method="quadrature")
        s = toy_integral(3, 1e4, method="quasi-mc", seed=2)
        assert abs(q.ln_I - s.ln_I) <= 3 * math.hypot(q.stderr, s.stderr)

    def test_slope_eps_invariant(self):
        Ns = np.logspace(5, 8, 7)
        slopes = []
        for eps in (0.5, 1.0, 2.0):
            vals = [toy_integral(3, N, eps=eps).ln_I for N in Ns]
            slopes.append(np.polyfit(np.log(Ns), vals, 1)[0])
        assert np.ptp(slopes) <= 0.02

    def test_quadrature_limit(self):
        with pytest.raises(DomainError):
            toy_integral(5, 100.0, method="quadrature")

    def test_bad_arguments(self):
        with pytest.raises(DomainError):
            toy_integral(0, 1.0)
        with pytest.raises(DomainError):
            toy_integral(2, 1.0, eps=0.0)
        with pytest.raises(DomainError):
            toy_integral(2, 1.0, method="importance")

    def test_tiny_budget(self):
        with pytest.raises(IntegrationError):
            toy_integral(3, 10.0, method="quasi-mc", budget=10)
