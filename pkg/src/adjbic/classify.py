"""Which asymptotic regime a statistics vector falls into.

Decision order (first match wins):

1. EM gap above ``tol``            -> OutsideModel
2. n == 1                          -> Degenerate_n1
3. y is a product table            -> Type2 (Degenerate_n2_S' when n == 2)
4. n == 2                          -> Degenerate_n2_nonS'
5. y = P(X_i, X_j) x prod P(X_k)   -> Type1
6. otherwise                       -> Regular
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .mle import EmConfig, MleResult, em_fit
from .model import ProbTable, marginals, outcome_bits, product_table

DEFAULT_TOL = 1e-6


class Label(str, enum.Enum):
    REGULAR = "Regular"
    TYPE1 = "Type1"
    TYPE2 = "Type2"
    DEGENERATE_N2_NON_SP = "Degenerate_n2_nonS'"
    DEGENERATE_N2_SP = "Degenerate_n2_S'"
    DEGENERATE_N1 = "Degenerate_n1"
    OUTSIDE_MODEL = "OutsideModel"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class SingularityClass:
    label: Label
    witness: tuple | None
    kl_gap: float
    tol: float
    f_Y: float
    mle: MleResult | None = None

    def to_dict(self) -> dict:
        w = self.witness
        if w is not None:
            w = [float(v) if isinstance(v, (float, np.floating)) else int(v) for v in w]
        return {"label": self.label.value, "witness": w, "kl_gap": self.kl_gap, "tol": self.tol}


def is_product(y: ProbTable, tol: float = DEFAULT_TOL) -> np.ndarray | None:
    gamma = marginals(y)
    if np.any(gamma <= 0) or np.any(gamma >= 1):
        return None
    resid = np.max(np.abs(y.cells - product_table(gamma).cells))
    return gamma if resid <= tol else None


def pair_factorization(y: ProbTable, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruct y as P(X_i, X_j) x prod_{k != i,j} P(X_k).

    Returns (reconstructed cells, 2x2 pair table as a length-4 vector with X_i
    as the high bit).
    """
    n = y.n
    bits = outcome_bits(n).astype(int)
    pair_idx = 2 * bits[:, i] + bits[:, j]
    pair = np.bincount(pair_idx, weights=y.cells, minlength=4)
    gamma = marginals(y)
    rest = [k for k in range(n) if k not in (i, j)]
    recon = pair[pair_idx].copy()
    for k in rest:
        recon *= np.where(bits[:, k] == 1, gamma[k], 1.0 - gamma[k])
    return recon, pair


def two_link_split(
    y: ProbTable, tol: float = DEFAULT_TOL, cfg: EmConfig = EmConfig()
) -> tuple[tuple[int, int], MleResult] | None:
    """Smallest pair (i, j) such that only X_i and X_j carry a class link."""
    if y.n < 2:
        raise DomainError("two_link_split needs n >= 2")
    for i, j in itertools.combinations(range(y.n), 2):
        recon, pair = pair_factorization(y, i, j)
        if np.max(np.abs(recon - y.cells)) > tol:
            continue
        if np.any(pair <= 0):
            continue
        sub = em_fit(ProbTable(pair / pair.sum()), cfg)
        if sub.kl_gap <= tol:
            return (i, j), sub
    return None


def classify_stats(
    y: ProbTable, tol: float = DEFAULT_TOL, cfg: EmConfig = EmConfig()
) -> SingularityClass:
    y.require_positive()
    fit = em_fit(y, cfg)

    def make(label, witness=None):
        return SingularityClass(label, witness, fit.kl_gap, tol, fit.f_Y, fit)

    if fit.kl_gap > tol:
        return make(Label.OUTSIDE_MODEL)
    if y.n == 1:
        return make(Label.DEGENERATE_N1)
    gamma = is_product(y, tol)
    if gamma is not None:
        label = Label.DEGENERATE_N2_SP if y.n == 2 else Label.TYPE2
        return make(label, tuple(float(g) for g in gamma))
    if y.n == 2:
        return make(Label.DEGENERATE_N2_NON_SP)
    split = two_link_split(y, tol, cfg)
    if split is not None:
        return make(Label.TYPE1, split[0])
    return make(Label.REGULAR)
