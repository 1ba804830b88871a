"""Deterministic quadrature for small models and for the toy integral.

For n <= 2 the likelihood depends on the parameters only through a few
coordinates (the feature marginals x, and for n = 2 the covariance
c = (1 - s^2) u_1 u_2), so the integral over the (2n+1)-cube is pushed forward
to those coordinates with an exact density:

* n = 1: x = t a + (1-t) b has density 2 H(x), H the binary entropy in nats.
* n = 2: (x_1, x_2, c) has density 4 [d w + d^2 / 2] with
  d = max(0, H_c - ln|c|); for c > 0,
  H_c = ln min(x_1(1-x_2), (1-x_1)x_2) and w = |logit x_1 - logit x_2| / 2;
  for c < 0, H_c = ln min(x_1 x_2, (1-x_1)(1-x_2)) and
  w = |logit x_1 + logit x_2| / 2.

Both follow from the (x, u, s) coordinates: for fixed (x, s) the u-range is a
box, and with sigma = artanh(s) the measure ds / (1 - s^2) becomes d sigma, in
which ln[(1 - s^2) h_1 h_2] is a trapezoid with slopes +-2.  The double log of
d^2 at c -> 0 is what produces the ln ln N term for independent tables.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import erf, logit, roots_legendre

from ..errors import DomainError, IntegrationError

GRADE_RATIO = 0.5


@lru_cache(maxsize=None)
def _gauss(m: int) -> tuple[np.ndarray, np.ndarray]:
    return roots_legendre(m)


def gl_panels(edges: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite m-point Gauss-Legendre nodes and weights on consecutive edges."""
    x, w = _gauss(m)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = (hi - lo) / 2
    return (half * x + (lo + hi) / 2).ravel(), (half * w).ravel()


def graded_unit_edges(levels: int, core: int) -> np.ndarray:
    """Edges on [0, 1]: geometric toward 0, uniform on [1/2, 1]."""
    g = 0.5 * GRADE_RATIO ** np.arange(levels, 0, -1)
    return np.concatenate([[0.0], g, np.linspace(0.5, 1.0, core + 1)])


def window_edges(lo: float, hi: float, center: float, half_width: float, core: int, levels: int):
    """Uniform panels on the window around ``center``, clipped to [lo, hi].

    The integrand is negligible outside the window.  Where the window reaches an end of [lo, hi] the panels are graded
    geometrically toward that end (endpoint singularities of the density).
    """
    a = max(lo, center - half_width)
    b = min(hi, center + half_width)
    edges = list(np.linspace(a, b, core + 1))
    span = b - a
    if a <= lo:
        edges = [a + span / core * GRADE_RATIO**k for k in range(levels, 0, -1)] + edges
        edges = [lo] + edges
    if b >= hi:
        edges = edges + [b - span / core * GRADE_RATIO**k for k in range(1, levels + 1)] + [hi]
    return np.unique(np.clip(edges, lo, hi))


def _binary_entropy(x):
    return -(x * np.log(x) + (1 - x) * np.log1p(-x))


def mixing_density_n1(x):
    """Density of x = t a + (1-t) b under the uniform prior on (a, b, t)."""
    x = np.asarray(x, dtype=float)
    return 2.0 * _binary_entropy(x)


def covariance_density_n2(x1, x2, c):
    """Density of (x_1, x_2, c) under the uniform prior on (0,1)^5."""
    x1, x2, c = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, c)))
    pos = c > 0
    with np.errstate(divide="ignore"):
        h = np.where(
            pos,
            np.log(np.minimum(x1 * (1 - x2), (1 - x1) * x2)),
            np.log(np.minimum(x1 * x2, (1 - x1) * (1 - x2))),
        )
        w = np.where(pos, 0.5 * np.abs(logit(x1) - logit(x2)), 0.5 * np.abs(logit(x1) + logit(x2)))
        d = np.maximum(h - np.log(np.abs(c)), 0.0)
    d = np.where(np.isfinite(d), d, 0.0)
    return 4.0 * (d * w + 0.5 * d * d)


def _lse(log_terms: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    """(ln sum(weights * exp(log_terms)), max log term)."""
    ok = weights > 0
    if not np.any(ok):
        raise IntegrationError("quadrature grid misses the integrand support")
    m = np.max(log_terms[ok])
    total = np.sum(weights[ok] * np.exp(log_terms[ok] - m))
    if not total > 0:
        raise IntegrationError("quadrature sum underflowed")
    return float(np.log(total) + m), m


def _window(N: float, scale: float) -> float:
    return np.inf if N <= 0 else scale / np.sqrt(N)


def log_evidence_n1(y: np.ndarray, N: float, m: int = 10, core: int = 16, levels: int = 40) -> float:
    """ln I for n = 1 as a one-dimensional integral over x."""
    y0, y1 = float(y[0]), float(y[1])
    edges = window_edges(0.0, 1.0, y1, _window(N, 8.0), core, levels)
    x, w = gl_panels(edges, m)
    logf = N * (y1 * np.log(x) + y0 * np.log1p(-x))
    val, _ = _lse(logf, w * mixing_density_n1(x))
    return val


def _c_nodes(lo, hi, center, half, core, m, grade_t, grade_w):
    """Per-row c nodes: uniform panels on the window, re-split at c = 0.

    The two pieces around zero are graded toward c = 0, where the
    density has a log^2 singularity.
    """
    a = np.maximum(lo, center - half)
    b = np.maximum(a, np.minimum(hi, center + half))
    width = (b - a) / core
    xi, wi = gl_panels(np.linspace(0.0, 1.0, 2), m)
    k = np.arange(core)
    nodes = a[:, None, None] + width[:, None, None] * (k[None, :, None] + xi[None, None, :])
    weights = np.broadcast_to(width[:, None, None] * wi[None, None, :], nodes.shape).copy()
    inside = (a < 0) & (b > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        j = np.where(inside, -a / width, 0.0)
    # edges strictly below and above zero; panels between them are replaced
    kl = np.where(inside, np.ceil(j) - 1, 0).astype(int)
    kr = np.where(inside, np.floor(j) + 1, 0).astype(int)
    swap = inside[:, None] & (k[None, :] >= kl[:, None]) & (k[None, :] < kr[:, None])
    weights[swap] = 0.0
    p_lo = np.where(inside, a + width * kl, 0.0)
    p_hi = np.where(inside, np.minimum(a + width * kr, b), 0.0)
    left = -(-p_lo)[:, None] * grade_t[None, :]
    right = p_hi[:, None] * grade_t[None, :]
    wl = (-p_lo)[:, None] * grade_w[None, :]
    wr = p_hi[:, None] * grade_w[None, :]
    R = a.size
    return (
        np.concatenate([nodes.reshape(R, -1), left, right], axis=1),
        np.concatenate([weights.reshape(R, -1), wl, wr], axis=1),
    )


def _spread_n2(y: np.ndarray, N: float) -> tuple[float, float, float]:
    """Delta-method standard deviations of x_1, x_2 and c under the cell posterior."""
    g1, g2 = y[2] + y[3], y[1] + y[3]
    grad = np.array([0.0, -g1, -g2, 1.0 - g1 - g2])
    var_c = float(y @ grad**2 - (y @ grad) ** 2)
    root = np.sqrt(max(N, 1e-300))
    floor = 1e-3 / root
    return (
        max(np.sqrt(g1 * (1 - g1)) / root, floor),
        max(np.sqrt(g2 * (1 - g2)) / root, floor),
        max(np.sqrt(max(var_c, 0.0)) / root, floor),
    )


def log_evidence_n2(
    y: np.ndarray, N: float, m: int = 6, core: int = 20, levels: int = 30, chunk: int = 64
) -> float:
    """ln I for n = 2 on the (x_1, x_2, c) pushforward."""
    y = np.asarray(y, dtype=float)
    g1, g2 = y[2] + y[3], y[1] + y[3]
    c0 = y[3] - g1 * g2
    s1, s2, sc = _spread_n2(y, N)
    x1, w1 = gl_panels(window_edges(0.0, 1.0, g1, 12 * s1, core, 12), m)
    x2, w2 = gl_panels(window_edges(0.0, 1.0, g2, 12 * s2, core, 12), m)
    grade_t, grade_w = gl_panels(graded_unit_edges(levels, 2), m)

    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    W12 = np.outer(w1, w2)
    X1, X2, W12 = X1.ravel(), X2.ravel(), W12.ravel()
    c_lo = -np.minimum(X1 * X2, (1 - X1) * (1 - X2))
    c_hi = np.minimum(X1 * (1 - X2), (1 - X1) * X2)

    parts = []
    for start in range(0, X1.size, chunk):
        sl = slice(start, start + chunk)
        C, WC = _c_nodes(c_lo[sl], c_hi[sl], c0, 14 * sc, 24, m, grade_t, grade_w)
        a1, a2 = X1[sl, None], X2[sl, None]
        th = np.stack(
            [(1 - a1) * (1 - a2) + C, (1 - a1) * a2 - C, a1 * (1 - a2) - C, a1 * a2 + C]
        )
        ok = np.all(th > 0, axis=0) & (WC > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            L = np.einsum("k,k...->...", y, np.log(np.where(ok, th, 1.0)))
        dens = np.where(ok, covariance_density_n2(a1, a2, C), 0.0)
        weights = W12[sl, None] * WC * dens
        if np.any(weights > 0):
            v, _ = _lse(N * L, weights)
            parts.append(v)
    if not parts:
        raise IntegrationError("quadrature grid misses the integrand support")
    return float(np.logaddexp.reduce(parts))


def log_evidence_quadrature(y: np.ndarray, N: float) -> tuple[float, float, int]:
    """(ln I, error estimate, evaluations) using two Gauss orders."""
    n = int(round(np.log2(len(y))))
    if n == 1:
        lo = log_evidence_n1(y, N, m=8)
        hi = log_evidence_n1(y, N, m=12)
        evals = 2000
    elif n == 2:
        lo = log_evidence_n2(y, N, m=5)
        hi = log_evidence_n2(y, N, m=7)
        evals = int(7**3 * 2 * 44**2 * (24 + 64))
    else:
        raise DomainError(f"quadrature needs 2n+1 <= 5, got n={n}")
    return hi, abs(hi - lo) + 1e-14 * max(1.0, abs(hi)), evals


# -- toy integral J[N] = int_{(-eps, eps)^n} exp(-N sum_{i != k} u_i^2 u_k^2) du ----

def _toy_nodes(eps: float, N: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    smallest = 1e-3 * min(eps, 1.0 / np.sqrt(max(N, 1.0)))
    levels = int(np.ceil(np.log(eps / smallest) / np.log(1 / GRADE_RATIO)))
    edges = np.concatenate([[0.0], eps * GRADE_RATIO ** np.arange(levels, -1, -1)])
    return gl_panels(edges, m)


def toy_inner(u2_sum, eps, N):
    """int_0^eps exp(-2 N S v^2) dv for S = ``u2_sum`` (the last coordinate, analytically)."""
    c = 2.0 * N * u2_sum
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 0.5 * np.sqrt(np.pi / c) * erf(eps * np.sqrt(c))
    return np.where(c > 1e-300, val, eps)


def pair_sum_squares(U2: list[np.ndarray]) -> np.ndarray:
    """sum_{i<k} u_i^2 u_k^2 via ((sum)^2 - sum of squares) / 2."""
    s1 = sum(U2)
    s2 = sum(v * v for v in U2)
    return 0.5 * (s1 * s1 - s2)


def log_toy_quadrature_once(n: int, N: float, eps: float, m: int) -> float:
    if n == 1:
        return float(np.log(2 * eps))
    u, w = _toy_nodes(eps, N, m)
    if n == 2:
        val = np.sum(w * toy_inner(u * u, eps, N))
        return float(n * np.log(2) + np.log(val))
    # outer loop over the first coordinate keeps memory at len(u)**(n-2)
    rest = np.meshgrid(*([u] * (n - 2)), indexing="ij")
    w_rest = np.ones_like(rest[0])
    for g in np.meshgrid(*([w] * (n - 2)), indexing="ij"):
        w_rest = w_rest * g
    U2r = [g * g for g in rest]
    logs = []
    for u0, w0 in zip(u, w):
        U2 = [np.full_like(w_rest, u0 * u0)] + U2r
        R = pair_sum_squares(U2)
        S = sum(U2)
        term = w0 * w_rest * toy_inner(S, eps, N)
        logs.append(np.log(np.sum(term * np.exp(-2.0 * N * R))))
    return float(n * np.log(2) + np.logaddexp.reduce(logs))


def log_toy_quadrature(n: int, N: float, eps: float) -> tuple[float, float, int]:
    if n > 4:
        raise DomainError("toy quadrature is limited to n <= 4; use quasi-mc")
    lo = log_toy_quadrature_once(n, N, eps, 5)
    hi = log_toy_quadrature_once(n, N, eps, 7)
    evals = len(_toy_nodes(eps, N, 7)[0]) ** max(n - 1, 1)
    return hi, abs(hi - lo) + 1e-14 * max(1.0, abs(hi)), evals
