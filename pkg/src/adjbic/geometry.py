"""Coordinate changes around the singular set of the two-state model.

``t1_forward`` moves model parameters (a, b, t) to (x, u, s) with
x = t a + (1-t) b (feature marginals), u = (a - b)/2 and s = 2t - 1.  In these
coordinates the maximum-likelihood set of a fully independent table is a union
of axis-aligned pieces (``zero_set_sample``).  ``t2_forward`` gives the
central-moment coordinates z_I = p_|I|(s) prod_{i in I} u_i.
"""

from __future__ import annotations

import csv
import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .model import ModelParams, ProbTable, outcome_bits, ROLE_JOINT


@dataclass(frozen=True, eq=False)
class TransformedPoint:
    x: np.ndarray
    u: np.ndarray
    s: float

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        u = np.array(self.u, dtype=float)
        if x.ndim != 1 or x.shape != u.shape:
            raise DomainError("x and u must be 1-d sequences of equal length")
        if not -1.0 <= self.s <= 1.0:
            raise DomainError(f"s must lie in [-1, 1], got {self.s}")
        x.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "s", float(self.s))

    @property
    def n(self) -> int:
        return int(self.x.size)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.u, [self.s]])

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "TransformedPoint":
        v = np.asarray(v, dtype=float)
        n = (v.size - 1) // 2
        return cls(v[:n], v[n : 2 * n], float(v[-1]))

    def closed_params(self) -> tuple[np.ndarray, np.ndarray, float]:
        """(a, b, t) without the open-cube check; valid on the closed boundary."""
        t = (self.s + 1.0) / 2.0
        a = self.x + (1.0 - self.s) * self.u
        b = self.x - (1.0 + self.s) * self.u
        return a, b, t


def t1_forward(p: ModelParams) -> TransformedPoint:
    return TransformedPoint(p.t * p.a + (1.0 - p.t) * p.b, (p.a - p.b) / 2.0, 2.0 * p.t - 1.0)


def t1_inverse(q: TransformedPoint) -> ModelParams:
    a, b, t = q.closed_params()
    # ModelParams raises DomainError if the image leaves the open cube
    return ModelParams(a, b, t)


def t1_forward_vector(omega: np.ndarray) -> np.ndarray:
    """t1_forward on a raw (a, b, t) vector, no validation (used for Jacobians)."""
    omega = np.asarray(omega, dtype=float)
    n = (omega.size - 1) // 2
    a, b, t = omega[:n], omega[n : 2 * n], omega[-1]
    return np.concatenate([t * a + (1 - t) * b, (a - b) / 2, [2 * t - 1]])


def t1_jacobian(p: ModelParams, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``t1_forward`` at ``p``."""
    omega = p.as_vector()
    d = omega.size
    jac = np.empty((d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = step
        jac[:, k] = (t1_forward_vector(omega + e) - t1_forward_vector(omega - e)) / (2 * step)
    return jac


def p_poly(r: int, s: float) -> float:
    if r < 2:
        raise DomainError(f"p_r is defined for r >= 2, got r={r}")
    return 0.5 * (1.0 - s * s) * ((1.0 - s) ** (r - 1) + (-1) ** r * (1.0 + s) ** (r - 1))


def t2_forward(q: TransformedPoint) -> dict[tuple[int, ...], float]:
    """Moment coordinates keyed by sorted 0-based index tuples.

    Singletons carry x_i; larger subsets carry p_|I|(s) prod u_i.
    """
    z: dict[tuple[int, ...], float] = {}
    for r in range(1, q.n + 1):
        coeff = 1.0 if r == 1 else p_poly(r, q.s)
        for subset in itertools.combinations(range(q.n), r):
            if r == 1:
                z[subset] = float(q.x[subset[0]])
            else:
                z[subset] = float(coeff * np.prod(q.u[list(subset)]))
    return z


def theta_at(q: TransformedPoint) -> ProbTable:
    """Joint table at an (x, u, s) point, boundary s = +-1 included.

    Uses the mixture formula with t = (s+1)/2 directly so that points with
    t in {0, 1} need not pass through ``ModelParams``.
    """
    a, b, t = q.closed_params()
    if np.any(a < 0) or np.any(a > 1) or np.any(b < 0) or np.any(b > 1):
        raise DomainError("point maps outside the closed parameter cube")
    bits = outcome_bits(q.n)
    pa = np.prod(np.where(bits == 1, a, 1.0 - a), axis=1)
    pb = np.prod(np.where(bits == 1, b, 1.0 - b), axis=1)
    theta = t * pa + (1.0 - t) * pb
    return ProbTable(theta / theta.sum(), ROLE_JOINT)


# -- the maximum-likelihood set of an independent table ----------------------

_LABEL = re.compile(r"^U0(?:(?P<sign>[+-])|(?P<j>[1-9][0-9]*))$")


@dataclass(frozen=True)
class ZeroSetComponent:
    """One piece of the zero set: ``U0-``, ``U0+`` or ``U0j`` (1-based j)."""

    label: str
    gamma: tuple[float, ...]

    def __post_init__(self):
        m = _LABEL.match(self.label)
        if m is None:
            raise DomainError(f"unknown zero-set component {self.label!r}")
        if m.group("j") is not None and int(m.group("j")) > len(self.gamma):
            raise DomainError(f"{self.label} needs j <= n={len(self.gamma)}")
        g = np.asarray(self.gamma, dtype=float)
        if np.any(g <= 0) or np.any(g >= 1):
            raise DomainError("gamma must lie strictly inside (0, 1)")

    @property
    def j(self) -> int | None:
        m = _LABEL.match(self.label)
        return int(m.group("j")) - 1 if m.group("j") is not None else None

    def contains(self, q: TransformedPoint, tol: float = 0.0) -> bool:
        """Membership in the open component (for sanity checks on samples)."""
        g = np.asarray(self.gamma)
        if not np.allclose(q.x, g, atol=tol, rtol=0):
            return False
        u, s = q.u, q.s
        if self.label == "U0-":
            return s == -1.0 and bool(np.all((-g / 2 < u) & (u < (1 - g) / 2)))
        if self.label == "U0+":
            return s == 1.0 and bool(np.all(((g - 1) / 2 < u) & (u < g / 2)))
        j = self.j
        others = np.delete(u, j)
        gj, uj = g[j], u[j]
        return bool(
            np.all(others == 0.0)
            and -0.5 < uj < 0.5
            and -1.0 < s < 1.0
            and -gj < (1 - s) * uj < 1 - gj
            and gj - 1 < (1 + s) * uj < gj
        )


def zero_set_components(n: int) -> list[str]:
    return ["U0-", "U0+"] + [f"U0{j}" for j in range(1, n + 1)]


def zero_set_sample(
    gamma: Sequence[float], component: str, count: int, seed: int
) -> list[TransformedPoint]:
    """Draw ``count`` points uniformly from the open interior of a component."""
    comp = ZeroSetComponent(component, tuple(float(g) for g in gamma))
    g = np.asarray(comp.gamma)
    n = g.size
    rng = np.random.default_rng(seed)
    if comp.label in ("U0-", "U0+"):
        if comp.label == "U0-":
            lo, hi, s = -g / 2, (1 - g) / 2, -1.0
        else:
            lo, hi, s = (g - 1) / 2, g / 2, 1.0
        # open interval: resample the (measure zero) endpoints
        u = rng.uniform(lo, hi, size=(count, n))
        bad = (u <= lo) | (u >= hi)
        while np.any(bad):
            u[bad] = rng.uniform(np.broadcast_to(lo, u.shape)[bad], np.broadcast_to(hi, u.shape)[bad])
            bad = (u <= lo) | (u >= hi)
        return [TransformedPoint(g, row, s) for row in u]

    j = comp.j
    gj = g[j]
    out: list[TransformedPoint] = []
    while len(out) < count:
        m = 2 * (count - len(out)) + 16
        s = rng.uniform(-1.0, 1.0, size=m)
        uj = rng.uniform(-0.5, 0.5, size=m)
        ok = (
            (s > -1) & (s < 1) & (uj > -0.5) & (uj < 0.5)
            & (-gj < (1 - s) * uj) & ((1 - s) * uj < 1 - gj)
            & (gj - 1 < (1 + s) * uj) & ((1 + s) * uj < gj)
        )
        for sv, uv in zip(s[ok], uj[ok]):
            u = np.zeros(n)
            u[j] = uv
            out.append(TransformedPoint(g, u, float(sv)))
            if len(out) == count:
                break
    return out


def write_points_csv(points: Iterable[TransformedPoint], path) -> None:
    """Rows x_1..x_n, u_1..u_n, s."""
    points = list(points)
    if not points:
        raise DomainError("no points to write")
    n = points[0].n
    header = [f"x{i}" for i in range(1, n + 1)] + [f"u{i}" for i in range(1, n + 1)] + ["s"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for q in points:
            w.writerow([repr(float(v)) for v in q.as_vector()])
