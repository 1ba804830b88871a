"""Binary naive Bayes model with two hidden states.

Parameters are ``a`` (P(X_i=1 | h1)), ``b`` (P(X_i=1 | h2)) and the mixing
weight ``t`` (P(h1)).  Joint tables have 2**n cells; the cell of outcome
(d_1, ..., d_n) sits at index sum(d_i * 2**(n-i)), i.e. d_1 is the most
significant bit.

Vectorized helpers work on parameter arrays laid out as
``omega = (a_1..a_n, b_1..b_n, t)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError

SUM_TOL = 1e-12
THETA_FLOOR = 1e-300

ROLE_STATS = "stats"
ROLE_JOINT = "joint"


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _open_unit(name: str, values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)) or np.any(values <= 0.0) or np.any(values >= 1.0):
        raise DomainError(f"{name} must lie strictly inside (0, 1), got {values.tolist()}")


@lru_cache(maxsize=None)
def outcome_bits(n: int) -> np.ndarray:
    """Return the (2**n, n) matrix whose row k holds the bits of outcome k."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
    bits = bits.astype(float)
    bits.setflags(write=False)
    return bits


@dataclass(frozen=True, eq=False)
class ModelParams:
    a: np.ndarray
    b: np.ndarray
    t: float

    def __post_init__(self):
        a = _readonly(self.a)
        b = _readonly(self.b)
        if a.ndim != 1 or a.shape != b.shape or a.size == 0:
            raise DomainError("a and b must be non-empty sequences of equal length")
        _open_unit("a", a)
        _open_unit("b", b)
        _open_unit("t", np.array([self.t], dtype=float))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return int(self.a.size)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, [self.t]])

    @classmethod
    def from_vector(cls, omega: Sequence[float]) -> "ModelParams":
        omega = np.asarray(omega, dtype=float)
        if omega.ndim != 1 or omega.size % 2 != 1 or omega.size < 3:
            raise DomainError(f"parameter vector must have length 2n+1, got {omega.size}")
        n = (omega.size - 1) // 2
        return cls(omega[:n], omega[n : 2 * n], float(omega[-1]))

    def swapped(self) -> "ModelParams":
        """The same distribution with hidden labels exchanged."""
        return ModelParams(self.b, self.a, 1.0 - self.t)

    def to_dict(self) -> dict:
        return {"n": self.n, "a": self.a.tolist(), "b": self.b.tolist(), "t": self.t}

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (
            np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
            and self.t == other.t
        )

    def __repr__(self):
        return f"ModelParams(a={self.a.tolist()}, b={self.b.tolist()}, t={self.t})"


@dataclass(frozen=True, eq=False)
class ProbTable:
    """A probability vector over the 2**n binary outcomes."""

    cells: np.ndarray
    role: str = ROLE_STATS
    n: int = field(init=False)

    def __post_init__(self):
        cells = _readonly(self.cells)
        if cells.ndim != 1 or cells.size < 2:
            raise DomainError("cells must be a 1-d sequence of length 2**n, n >= 1")
        n = int(round(np.log2(cells.size)))
        if 2**n != cells.size:
            raise DomainError(f"table length {cells.size} is not a power of two")
        if not np.all(np.isfinite(cells)) or np.any(cells < 0.0):
            raise DomainError("cells must be finite and non-negative")
        if abs(cells.sum() - 1.0) > SUM_TOL:
            raise DomainError(f"cells sum to {cells.sum()!r}, not 1")
        if self.role not in (ROLE_STATS, ROLE_JOINT):
            raise DomainError(f"unknown role {self.role!r}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "n", n)

    @classmethod
    def normalized(cls, values, role: str = ROLE_STATS) -> "ProbTable":
        values = np.asarray(values, dtype=float)
        return cls(values / values.sum(), role)

    def is_positive(self) -> bool:
        return bool(np.all(self.cells > 0.0))

    def require_positive(self) -> None:
        if not self.is_positive():
            raise DomainError("statistics must be strictly positive in every cell")

    def permuted(self, perm: Sequence[int]) -> "ProbTable":
        """Relabel features so that new feature k is old feature perm[k]."""
        perm = list(perm)
        if sorted(perm) != list(range(self.n)):
            raise DomainError(f"{perm} is not a permutation of range({self.n})")
        bits = outcome_bits(self.n)
        weights = 2 ** (self.n - 1 - np.arange(self.n))
        target = (bits[:, perm] @ weights).astype(int)
        out = np.empty_like(self.cells)
        out[target] = self.cells
        return ProbTable(out, self.role)

    def __eq__(self, other):
        if not isinstance(other, ProbTable):
            return NotImplemented
        return self.role == other.role and np.array_equal(self.cells, other.cells)

    def __repr__(self):
        return f"ProbTable(n={self.n}, role={self.role!r}, cells={self.cells.tolist()})"


def log_theta(omega: np.ndarray, n: int) -> np.ndarray:
    """Log joint probabilities for a batch of parameter vectors.

    ``omega`` has shape (P, 2n+1); the result has shape (P, 2**n).  Entries
    may sit on the closed cube, in which case zero cells come out as -inf.
    """
    omega = np.atleast_2d(omega)
    bits = outcome_bits(n)
    a = omega[:, :n]
    b = omega[:, n : 2 * n]
    t = omega[:, 2 * n]
    with np.errstate(divide="ignore"):
        la = np.log(a) @ bits.T + np.log1p(-a) @ (1.0 - bits).T
        lb = np.log(b) @ bits.T + np.log1p(-b) @ (1.0 - bits).T
        la = la + np.log(t)[:, None]
        lb = lb + np.log1p(-t)[:, None]
    return np.logaddexp(la, lb)


def loglik_batch(omega: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample log-likelihood sum_x y_x ln theta_x(omega) for each row of omega."""
    y = np.asarray(y, dtype=float)
    n = int(round(np.log2(y.size)))
    lt = log_theta(omega, n)
    mask = y > 0
    return lt[:, mask] @ y[mask]


def joint_from_params(p: ModelParams) -> ProbTable:
    n = p.n
    bits = outcome_bits(n)
    la = bits @ np.log(p.a) + (1.0 - bits) @ np.log1p(-p.a)
    lb = bits @ np.log(p.b) + (1.0 - bits) @ np.log1p(-p.b)
    theta = np.exp(np.logaddexp(np.log(p.t) + la, np.log1p(-p.t) + lb))
    return ProbTable(theta, ROLE_JOINT)


def loglik_per_sample(y: ProbTable, theta: ProbTable) -> float:
    """Return sum_x y_x ln theta_x in nats per sample."""
    if y.n != theta.n:
        raise DomainError(f"size mismatch: y has n={y.n}, theta has n={theta.n}")
    mask = y.cells > 0
    if np.any(theta.cells[mask] < THETA_FLOOR):
        raise DomainError("theta has a (numerically) zero cell where y is positive")
    return float(y.cells[mask] @ np.log(theta.cells[mask]))


def normalized_loss(y: ProbTable, theta: ProbTable, f_Y: float) -> float:
    """f_Y minus the log-likelihood of theta; zero exactly at the ML fit."""
    value = f_Y - loglik_per_sample(y, theta)
    if value < -SUM_TOL:
        raise DomainError(
            f"normalized loss {value:.3e} < 0: f_Y={f_Y!r} is not the maximum for these statistics"
        )
    return value


def stats_from_counts(counts: Sequence[int]) -> tuple[ProbTable, int]:
    counts = np.asarray(counts)
    if counts.ndim != 1 or not np.issubdtype(counts.dtype, np.integer):
        if counts.ndim == 1 and np.all(counts == np.round(counts)):
            counts = counts.astype(np.int64)
        else:
            raise DomainError("counts must be a 1-d sequence of integers")
    if np.any(counts < 0):
        raise DomainError("counts must be non-negative")
    total = int(counts.sum())
    if total == 0:
        raise DomainError("counts are all zero")
    return ProbTable(counts / total, ROLE_STATS), total


def marginals(y: ProbTable) -> np.ndarray:
    """P(X_i = 1) for every feature."""
    return outcome_bits(y.n).T @ y.cells


def product_table(gamma: Sequence[float]) -> ProbTable:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 1 or gamma.size == 0:
        raise DomainError("gamma must be a non-empty 1-d sequence")
    _open_unit("gamma", gamma)
    bits = outcome_bits(gamma.size)
    cells = np.exp(bits @ np.log(gamma) + (1.0 - bits) @ np.log1p(-gamma))
    return ProbTable(cells / cells.sum(), ROLE_STATS)


def kl_gap(y: ProbTable, theta: ProbTable) -> float:
    """sum_x y_x ln(y_x / theta_x), clipped at zero."""
    mask = y.cells > 0
    neg_entropy = float(y.cells[mask] @ np.log(y.cells[mask]))
    return max(neg_entropy - loglik_per_sample(y, theta), 0.0)


# -- statistics files --------------------------------------------------------

def load_stats(path: str | Path, renorm_tol: float = 1e-6) -> tuple[ProbTable, int | None]:
    """Read a statistics or counts JSON file.

    Accepts ``{"n": int, "y": [...], "N": int?}`` or ``{"n": int, "counts": [...]}``.
    A ``y`` vector whose sum is within ``renorm_tol`` of one is rescaled to sum
    exactly to one (decimal files rarely sum to 1 at 1e-12).
    """
    with open(path) as fh:
        doc = json.load(fh)
    return stats_from_json(doc, renorm_tol)


def stats_from_json(doc: dict, renorm_tol: float = 1e-6) -> tuple[ProbTable, int | None]:
    if not isinstance(doc, dict) or "n" not in doc:
        raise DomainError('statistics document must be an object with an "n" field')
    n = int(doc["n"])
    if "counts" in doc:
        y, N = stats_from_counts(doc["counts"])
        if "N" in doc and int(doc["N"]) != N:
            raise DomainError(f'"N"={doc["N"]} disagrees with sum of counts {N}')
    elif "y" in doc:
        values = np.asarray(doc["y"], dtype=float)
        if values.ndim != 1:
            raise DomainError('"y" must be a flat list')
        total = values.sum()
        if abs(total - 1.0) > renorm_tol:
            raise DomainError(f'"y" sums to {total!r}, not 1')
        y = ProbTable(values / total, ROLE_STATS)
        N = int(doc["N"]) if doc.get("N") is not None else None
    else:
        raise DomainError('statistics document needs "y" or "counts"')
    if y.n != n:
        raise DomainError(f'"n"={n} but the table has 2**{y.n} cells')
    return y, N


def stats_to_json(y: ProbTable, N: int | None = None) -> dict:
    doc = {"n": y.n, "y": y.cells.tolist()}
    if N is not None:
        doc["N"] = int(N)
    return doc
