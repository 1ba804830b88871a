"""Estimates of the marginal likelihood

    I[N, Y] = int_{(0,1)^{2n+1}} exp(N sum_x Y_x ln theta_x(omega)) d omega

under the uniform prior, and of the toy integral

    J[N] = int_{(-eps, eps)^n} exp(-N sum_{i != k} u_i^2 u_k^2) du.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..model import ProbTable
from .quadrature import log_evidence_quadrature, log_toy_quadrature
from .sampling import (
    ThermoConfig,
    importance_log_evidence,
    log_toy_qmc,
    qmc_log_evidence,
    thermo_log_evidence,
)

METHODS = ("quadrature", "quasi-mc", "importance", "thermo")
TOY_METHODS = ("quadrature", "quasi-mc")
DEFAULT_BUDGET = {
    "quadrature": 0,
    "quasi-mc": 1 << 20,
    "importance": 1 << 20,
    "thermo": 8 * 500 * ThermoConfig().evals_per_particle(),
}


@dataclass(frozen=True)
class EvidenceEstimate:
    """ln of an integral with its uncertainty.

    For quadrature ``stderr`` is the difference between two rule orders (an
    error estimate), otherwise a statistical standard error.
    """

    ln_I: float
    stderr: float
    method: str
    budget: int
    seed: int
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.stderr >= 0:
            raise DomainError(f"stderr must be non-negative, got {self.stderr}")

    def to_dict(self) -> dict:
        return {
            "ln_I": self.ln_I,
            "stderr": self.stderr,
            "method": self.method,
            "budget": self.budget,
            "seed": self.seed,
            "diagnostics": self.diagnostics,
        }


def default_method(n: int) -> str:
    return "quadrature" if 2 * n + 1 <= 5 else "thermo"


def _check_method(method: str, allowed) -> str:
    if method not in allowed:
        raise DomainError(f"unknown method {method!r}; choose from {', '.join(allowed)}")
    return method


def marginal_likelihood(
    y: ProbTable,
    N: float,
    method: str | None = None,
    budget: int | None = None,
    seed: int = 0,
    workers: int = 1,
) -> EvidenceEstimate:
    """ln I[N, Y] for strictly positive statistics ``y``."""
    y.require_positive()
    method = _check_method(method or default_method(y.n), METHODS)
    if not N >= 0:
        raise DomainError(f"N must be >= 0, got {N}")
    budget = DEFAULT_BUDGET[method] if budget is None else int(budget)
    if N == 0:
        return EvidenceEstimate(0.0, 0.0, method, 0, seed, {"note": "prior integrates to 1"})
    if method == "quadrature":
        ln_i, err, evals = log_evidence_quadrature(y.cells, float(N))
        return EvidenceEstimate(ln_i, err, method, evals, seed, {"evals": evals})
    run = {
        "quasi-mc": qmc_log_evidence,
        "importance": importance_log_evidence,
        "thermo": thermo_log_evidence,
    }[method]
    ln_i, se, diag = run(y, float(N), budget, seed, workers)
    return EvidenceEstimate(ln_i, se, method, budget, seed, diag)


def toy_integral(
    n: int,
    N: float,
    eps: float = 1.0,
    method: str = "quadrature",
    budget: int | None = None,
    seed: int = 0,
    workers: int = 1,
) -> EvidenceEstimate:
    """ln J[N] for eps > 0."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if not eps > 0:
        raise DomainError("eps must be positive")
    if not N >= 0:
        raise DomainError(f"N must be >= 0, got {N}")
    method = _check_method(method, TOY_METHODS)
    budget = (1 << 20) if budget is None else int(budget)
    if N == 0 or n == 1:
        return EvidenceEstimate(float(n * np.log(2 * eps)), 0.0, method, 0, seed)
    if method == "quadrature":
        ln_j, err, evals = log_toy_quadrature(n, float(N), float(eps))
        return EvidenceEstimate(ln_j, err, method, evals, seed, {"evals": evals})
    ln_j, se, diag = log_toy_qmc(n, float(N), float(eps), budget, seed, workers)
    return EvidenceEstimate(ln_j, se, method, budget, seed, diag)


__all__ = [
    "EvidenceEstimate",
    "METHODS",
    "ThermoConfig",
    "default_method",
    "marginal_likelihood",
    "toy_integral",
]
