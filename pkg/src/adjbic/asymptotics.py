"""Recovering the ln N and ln ln N coefficients from ladders of evidence values.

A ladder is a sequence of (N, ln I, stderr) for one statistics vector.  The
fitted law is

    ln I - N f_Y = intercept + lam ln N + m ln ln N

where ``lam`` is reported with its sign (negative for a penalty).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classify import DEFAULT_TOL, Label, classify_stats
from .errors import DomainError, IntegrationError, VerificationError
from .integrate import default_method, marginal_likelihood
from .mle import EmConfig, laplace_log_evidence
from .model import ModelParams, ProbTable, joint_from_params, product_table
from .score import penalty_table

STDERR_FLOOR = 1e-3
JOINT_MIN_DECADES = 6.0
MODES = ("free", "lam-fixed", "joint")


@dataclass(frozen=True)
class LadderPoint:
    N: float
    ln_I: float
    stderr: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and math.isfinite(self.ln_I)


@dataclass(frozen=True)
class LadderFit:
    points: tuple[LadderPoint, ...]
    mode: str
    lam_hat: float
    lnln_hat: float
    intercept: float
    residual_rms: float
    lam_stderr: float | None
    lnln_stderr: float | None
    condition: float
    suspect: bool

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "lam_hat": self.lam_hat,
            "lnln_hat": self.lnln_hat,
            "intercept": self.intercept,
            "residual_rms": self.residual_rms,
            "lam_stderr": self.lam_stderr,
            "lnln_stderr": self.lnln_stderr,
            "condition": self.condition,
            "suspect": self.suspect,
            "points_used": len(self.points),
        }


def parse_ladder(text: str) -> np.ndarray:
    """``"A:B:K"`` -> N from 10^A to 10^B with K geometric points per decade."""
    try:
        a, b, k = text.split(":")
        a, b, k = float(a), float(b), int(k)
    except ValueError as exc:
        raise DomainError(f"ladder must look like A:B:K, got {text!r}") from exc
    if not b > a or k < 1:
        raise DomainError("ladder needs B > A and K >= 1")
    count = int(round((b - a) * k)) + 1
    return np.logspace(a, b, count)


def _check_ladder(Ns: Sequence[float]) -> np.ndarray:
    Ns = np.asarray(Ns, dtype=float)
    if Ns.ndim != 1 or Ns.size < 3:
        raise DomainError("a ladder needs at least 3 values of N")
    if np.any(Ns < 0):
        raise DomainError("N must be >= 0")
    if np.any(np.diff(Ns) <= 0):
        raise DomainError("ladder values must be strictly increasing (no duplicates)")
    return Ns


def point_seeds(seed: int, count: int) -> list[int]:
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(count)]


def ladder_eval(
    y: ProbTable,
    Ns: Sequence[float],
    method: str | None = None,
    budget: int | None = None,
    seed: int = 0,
    workers: int = 1,
) -> list[LadderPoint]:
    """Raw ln I at each N; integrator failures are kept as points with ``error`` set."""
    Ns = _check_ladder(Ns)
    out = []
    for N, s in zip(Ns, point_seeds(seed, Ns.size)):
        try:
            est = marginal_likelihood(y, float(N), method, budget, s, workers)
            out.append(LadderPoint(float(N), est.ln_I, est.stderr))
        except IntegrationError as exc:
            out.append(LadderPoint(float(N), math.nan, math.nan, str(exc)))
    return out


def _as_points(points) -> list[LadderPoint]:
    pts = [p if isinstance(p, LadderPoint) else LadderPoint(*map(float, p[:3])) for p in points]
    Ns = np.array([p.N for p in pts])
    if np.any(np.diff(Ns) <= 0):
        raise DomainError("points must be sorted by strictly increasing N")
    return pts


def fit_law(points, f_Y: float, mode: str = "free", lam_fixed: float | None = None) -> LadderFit:
    """Weighted least squares of ln I - N f_Y on {1, ln N} and/or ln ln N.

    ``free``: {1, ln N}.  ``lam-fixed``: {1, ln ln N} after removing
    ``lam_fixed`` ln N.  ``joint``: {1, ln N, ln ln N}; refused on ladders
    spanning fewer than six decades, where the two logs are nearly collinear.
    Weights are 1 / max(stderr, 1e-3)^2.
    """
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}")
    if mode == "lam-fixed" and lam_fixed is None:
        raise DomainError("lam-fixed mode needs lam_fixed")
    pts = _as_points(points)
    # ln ln N must be defined (N > e) for any mode that uses it; ln N needs N > 0
    min_N = math.e if mode in ("lam-fixed", "joint") else 1.0
    used = [p for p in pts if p.ok and p.N > min_N]
    need = {"free": 4, "lam-fixed": 3, "joint": 5}[mode]
    if len(used) < need:
        raise DomainError(f"{mode} mode needs at least {need} usable points, got {len(used)}")
    N = np.array([p.N for p in used])
    lnN = np.log(N)
    se = np.array([p.stderr for p in used])
    r = np.array([p.ln_I for p in used]) - N * f_Y
    cols = [np.ones_like(lnN)]
    if mode in ("free", "joint"):
        cols.append(lnN)
    if mode in ("lam-fixed", "joint"):
        cols.append(np.log(lnN))
    if mode == "lam-fixed":
        r = r - lam_fixed * lnN
    A = np.column_stack(cols)
    w = 1.0 / np.maximum(se, STDERR_FLOOR)
    Aw = A * w[:, None]
    col_norm = np.linalg.norm(Aw, axis=0)
    cond = float(np.linalg.cond(Aw / col_norm))
    if mode == "joint" and (lnN[-1] - lnN[0]) / math.log(10) < JOINT_MIN_DECADES:
        raise DomainError(
            f"joint mode needs a ladder spanning >= {JOINT_MIN_DECADES:g} decades; "
            f"design condition number {cond:.3g} (ln N and ln ln N are nearly collinear)"
        )
    if not np.isfinite(cond) or cond > 1e12 or np.linalg.matrix_rank(Aw) < A.shape[1]:
        raise DomainError("singular design matrix; use more distinct N values")
    coef, *_ = np.linalg.lstsq(Aw, r * w, rcond=None)
    resid = r - A @ coef
    dof = max(len(used) - A.shape[1], 1)
    chi2 = float(np.sum((resid * w) ** 2) / dof)
    cov = np.linalg.inv(Aw.T @ Aw) * max(1.0, chi2)
    sd = np.sqrt(np.diag(cov))
    rms = float(np.sqrt(np.mean(resid**2)))
    med = float(np.median(se))
    idx_ln = 1 if mode in ("free", "joint") else None
    idx_ll = {"lam-fixed": 1, "joint": 2}.get(mode)
    return LadderFit(
        points=tuple(used),
        mode=mode,
        lam_hat=float(coef[idx_ln]) if idx_ln is not None else float(lam_fixed),
        lnln_hat=float(coef[idx_ll]) if idx_ll is not None else 0.0,
        intercept=float(coef[0]),
        residual_rms=rms,
        lam_stderr=float(sd[idx_ln]) if idx_ln is not None else None,
        lnln_stderr=float(sd[idx_ll]) if idx_ll is not None else None,
        condition=cond,
        suspect=rms > 3.0 * med,
    )


# -- canonical cases -----------------------------------------------------------

CASES = ("regular", "type1", "type2", "n1", "n2", "n2s")
EXPECTED = {
    "regular": Label.REGULAR,
    "type1": Label.TYPE1,
    "type2": Label.TYPE2,
    "n1": Label.DEGENERATE_N1,
    "n2": Label.DEGENERATE_N2_NON_SP,
    "n2s": Label.DEGENERATE_N2_SP,
}
DEFAULT_TOLERANCE = {"regular": 0.20, "type1": 0.15, "type2": 0.15, "n1": 0.05, "n2": 0.10, "n2s": 0.6}


def case_params(case: str, n: int) -> ModelParams | None:
    """Parameters of the canonical construction; ``None`` means a product table."""
    if case == "regular":
        a = np.linspace(0.9, 0.7, n)
        return ModelParams(a, 1.0 - a, 0.4)
    if case == "type1":
        a = np.full(n, 0.5)
        a[:2] = 0.9
        b = np.full(n, 0.5)
        b[:2] = 0.1
        return ModelParams(a, b, 0.5)
    if case == "n2":
        return ModelParams([0.9, 0.8], [0.1, 0.2], 0.4)
    return None


def case_stats(case: str, n: int) -> ProbTable:
    if case not in CASES:
        raise DomainError(f"unknown case {case!r}; choose from {', '.join(CASES)}")
    need = {"n1": 1, "n2": 2, "n2s": 2}.get(case)
    if need is not None and n != need:
        raise DomainError(f"case {case} needs n={need}")
    if need is None and n < 3:
        raise DomainError(f"case {case} needs n >= 3")
    if case == "type2":
        gamma = (0.3, 0.5, 0.7) if n == 3 else tuple(np.linspace(0.3, 0.7, n))
        return product_table(gamma)
    if case in ("n1", "n2s"):
        return ProbTable(np.full(2**n, 1.0 / 2**n))
    return joint_from_params(case_params(case, n))


@dataclass
class VerifyReport:
    case: str
    n: int
    label: str
    f_Y: float
    expected_lam: float
    expected_lnln: float
    tolerance: float
    fit: LadderFit
    lnln_fit: LadderFit | None
    passed: bool
    points: tuple[LadderPoint, ...] = ()
    laplace_gaps: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "n": self.n,
            "class": self.label,
            "f_Y": self.f_Y,
            "expected_lam": self.expected_lam,
            "expected_lnln": self.expected_lnln,
            "tolerance": self.tolerance,
            "fit": self.fit.to_dict(),
            "lnln_fit": None if self.lnln_fit is None else self.lnln_fit.to_dict(),
            "laplace_gaps": self.laplace_gaps,
            "passed": self.passed,
            "points": [
                {"N": p.N, "ln_I": p.ln_I, "stderr": p.stderr, "error": p.error}
                for p in self.points
            ],
        }


def verify_case(
    case: str,
    n: int,
    Ns: Sequence[float],
    method: str | None = None,
    budget: int | None = None,
    seed: int = 0,
    tolerance: float | None = None,
    y: ProbTable | None = None,
    workers: int = 1,
    cfg: EmConfig = EmConfig(),
) -> VerifyReport:
    """Classify the construction, integrate along the ladder, compare with the law.

    For ``n2s`` the pass criterion is the ln ln N coefficient with lam pinned
    to -3/2; otherwise the free-mode ln N slope.
    """
    y = case_stats(case, n) if y is None else y
    if y.n != n:
        raise DomainError(f"statistics have n={y.n}, case asks for n={n}")
    cls = classify_stats(y, DEFAULT_TOL, cfg)
    if cls.label is not EXPECTED[case]:
        raise VerificationError(
            f"case {case} expects {EXPECTED[case].value}, statistics classify as {cls.label.value}"
        )
    lam, lnln = penalty_table(n, cls.label)
    tol = DEFAULT_TOLERANCE[case] if tolerance is None else tolerance
    # on the model closure the supremum of the normalized log-likelihood is -H(y)
    f_sup = float(y.cells @ np.log(y.cells))
    method = method or default_method(n)
    points = ladder_eval(y, Ns, method, budget, seed, workers)
    fit = fit_law(points, f_sup, "free")
    lnln_fit = None
    if lnln != 0:
        lnln_fit = fit_law(points, f_sup, "lam-fixed", -float(lam))
        passed = abs(lnln_fit.lnln_hat - lnln) <= tol
    else:
        passed = abs(fit.lam_hat + float(lam)) <= tol
    gaps = {}
    if cls.label is Label.REGULAR:
        for p in points:
            if p.ok and p.N >= 1:
                gaps[repr(p.N)] = float(laplace_log_evidence(y, int(round(p.N)), cls.mle) - p.ln_I)
    return VerifyReport(
        case=case,
        n=n,
        label=cls.label.value,
        f_Y=f_sup,
        expected_lam=-float(lam),
        expected_lnln=float(lnln),
        tolerance=tol,
        fit=fit,
        lnln_fit=lnln_fit,
        passed=bool(passed),
        points=tuple(points),
        laplace_gaps=gaps,
    )
