"""Adjusted BIC for the two-state naive Bayes model.

    ln I[N, Y] = N f_Y - lam ln N + c ln ln N + O(1)

with (lam, c) depending on n and the singularity class of Y.  The standard
BIC uses lam = (2n+1)/2 and c = 0 regardless of Y.  The O(1) intercept is not
known in closed form and is never reported as if it were.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

from .classify import DEFAULT_TOL, Label, SingularityClass, classify_stats
from .errors import DomainError, SingularityError
from .mle import EmConfig, laplace_log_evidence
from .model import ProbTable


class NoScoreError(DomainError):
    """Statistics outside the model have no adjusted score."""


def penalty_table(n: int, label: Label) -> tuple[Fraction, int]:
    """(lam, ln ln N coefficient) for a class; lam is the positive ln N penalty."""
    if n < 1:
        raise DomainError("n must be >= 1")
    label = Label(label)
    if label is Label.OUTSIDE_MODEL:
        raise NoScoreError("statistics outside the model have no adjusted score")
    if label is Label.DEGENERATE_N1 and n != 1:
        raise DomainError(f"{label} applies to n == 1 only")
    if label in (Label.DEGENERATE_N2_SP, Label.DEGENERATE_N2_NON_SP) and n != 2:
        raise DomainError(f"{label} applies to n == 2 only")
    if label in (Label.REGULAR, Label.TYPE1, Label.TYPE2) and n < 3:
        raise DomainError(f"{label} applies to n >= 3 only")
    if label is Label.REGULAR:
        return Fraction(2 * n + 1, 2), 0
    if label is Label.TYPE1:
        return Fraction(2 * n - 1, 2), 0
    if label is Label.TYPE2:
        return Fraction(n + 1, 2), 0
    if label in (Label.DEGENERATE_N1, Label.DEGENERATE_N2_NON_SP):
        return Fraction(2 * n - 1, 2), 0
    return Fraction(3, 2), 2


def standard_penalty(n: int) -> Fraction:
    return Fraction(2 * n + 1, 2)


def score_gap(n: int, label: Label) -> Fraction:
    """ln N penalty saved relative to the standard BIC."""
    lam, _ = penalty_table(n, label)
    return standard_penalty(n) - lam


def standard_bic(f_Y: float, N: int, n: int) -> float:
    return N * f_Y - float(standard_penalty(n)) * math.log(N)


@dataclass(frozen=True)
class ScoreReport:
    n: int
    N: int
    label: Label
    f_Y: float
    lam: Fraction | None
    lnln_coeff: int | None
    adjusted: float | None
    standard_bic: float
    laplace: float | None = None
    warning: str | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "class": self.label.value,
            "f_Y": self.f_Y,
            "lam": None if self.lam is None else str(self.lam),
            "lam_value": None if self.lam is None else float(self.lam),
            "lnln_coeff": self.lnln_coeff,
            "adjusted": self.adjusted,
            "standard_bic": self.standard_bic,
            "laplace": self.laplace,
            "intercept": "unknown O(1)",
            "warning": self.warning,
        }


def adjusted_bic(y: ProbTable, N: int, cls: SingularityClass, f_Y: float) -> ScoreReport:
    if N < 1:
        raise DomainError("N must be >= 1")
    lam, lnln = penalty_table(y.n, cls.label)
    if lnln != 0 and N < 3:
        raise DomainError("the ln ln N term needs N >= 3")
    adjusted = N * f_Y - float(lam) * math.log(N)
    if lnln != 0:
        adjusted += lnln * math.log(math.log(N))
    return ScoreReport(
        n=y.n,
        N=int(N),
        label=cls.label,
        f_Y=f_Y,
        lam=lam,
        lnln_coeff=lnln,
        adjusted=adjusted,
        standard_bic=standard_bic(f_Y, N, y.n),
    )


def score_stats(
    y: ProbTable, N: int, tol: float = DEFAULT_TOL, cfg: EmConfig = EmConfig()
) -> ScoreReport:
    """Classify, then score.  Regular tables also get the Laplace value."""
    cls = classify_stats(y, tol, cfg)
    if cls.label is Label.OUTSIDE_MODEL:
        msg = (
            f"statistics are outside the model (KL gap {cls.kl_gap:.3e} > tol {tol:g}); "
            "reporting the standard BIC at the ML point only"
        )
        warnings.warn(msg, stacklevel=2)
        return ScoreReport(
            n=y.n, N=int(N), label=cls.label, f_Y=cls.f_Y, lam=None, lnln_coeff=None,
            adjusted=None, standard_bic=standard_bic(cls.f_Y, N, y.n), warning=msg,
        )
    report = adjusted_bic(y, N, cls, cls.f_Y)
    if cls.label is Label.REGULAR:
        try:
            lap = laplace_log_evidence(y, N, cls.mle)
        except SingularityError:
            lap = None
        report = ScoreReport(**{**report.__dict__, "laplace": lap})
    return report
