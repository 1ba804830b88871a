"""Maximum likelihood by multi-start EM, numerical Hessians, Laplace evidence."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .errors import DomainError, SingularityError
from .model import (
    ModelParams,
    ProbTable,
    joint_from_params,
    kl_gap,
    loglik_batch,
    loglik_per_sample,
    outcome_bits,
)

INIT_LOW, INIT_HIGH = 0.05, 0.95
_CLIP = 1e-15
_POLISH = 4


@dataclass(frozen=True)
class EmConfig:
    restarts: int = 32
    max_iters: int = 10_000
    rel_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise DomainError("restarts must be >= 1")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")


@dataclass(frozen=True, eq=False)
class MleResult:
    params: ModelParams
    f_Y: float
    kl_gap: float
    converged: bool
    iterations: tuple[int, ...]
    # per-restart f sequences, only kept when em_fit(record_trace=True)
    traces: tuple[np.ndarray, ...] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "f_Y": self.f_Y,
            "kl_gap": self.kl_gap,
            "converged": self.converged,
            "iterations": list(self.iterations),
        }


def _initial_points(n: int, cfg: EmConfig) -> np.ndarray:
    # one sub-stream per restart, so results do not depend on how restarts are batched
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    return np.stack(
        [np.random.default_rng(c).uniform(INIT_LOW, INIT_HIGH, size=2 * n + 1) for c in children]
    )


def _em_step(omega: np.ndarray, y: np.ndarray, bits: np.ndarray, n: int):
    """One EM update for every row of omega; returns (new omega, loglik at old omega)."""
    a, b, t = omega[:, :n], omega[:, n : 2 * n], omega[:, 2 * n]
    la = np.log(a) @ bits.T + np.log1p(-a) @ (1.0 - bits).T + np.log(t)[:, None]
    lb = np.log(b) @ bits.T + np.log1p(-b) @ (1.0 - bits).T + np.log1p(-t)[:, None]
    lt = np.logaddexp(la, lb)
    ll = lt @ y
    resp = np.exp(la - lt)  # P(h1 | x), shape (R, 2**n)
    w1 = resp * y
    w2 = (1.0 - resp) * y
    t_new = w1.sum(axis=1)
    a_new = (w1 @ bits) / t_new[:, None]
    b_new = (w2 @ bits) / (1.0 - t_new)[:, None]
    new = np.concatenate([a_new, b_new, t_new[:, None]], axis=1)
    return np.clip(new, _CLIP, 1.0 - _CLIP), ll


def _negll_logit(eta, y, bits, n):
    w = np.clip(expit(eta), _CLIP, 1.0 - _CLIP)
    a, b, t = w[:n], w[n : 2 * n], w[2 * n]
    A = np.exp(bits @ np.log(a) + (1 - bits) @ np.log1p(-a))
    B = np.exp(bits @ np.log(b) + (1 - bits) @ np.log1p(-b))
    theta = t * A + (1 - t) * B
    r = y / theta
    ga = (r * t * A) @ (bits - a)
    gb = (r * (1 - t) * B) @ (bits - b)
    gt = (r @ (A - B)) * t * (1 - t)
    return -(y @ np.log(theta)), -np.concatenate([ga, gb, [gt]])


def _polish(omega: np.ndarray, y: np.ndarray, bits: np.ndarray, n: int) -> np.ndarray:
    """BFGS in logit coordinates from an EM end point."""
    res = minimize(
        _negll_logit,
        logit(omega),
        args=(y, bits, n),
        jac=True,
        method="BFGS",
        options={"gtol": 1e-13, "maxiter": 5000},
    )
    return np.clip(expit(res.x), _CLIP, 1.0 - _CLIP)


def em_fit(
    y: ProbTable, cfg: EmConfig = EmConfig(), record_trace: bool = False, allow_zero: bool = False
) -> MleResult:
    """Multi-start EM; returns the restart with the highest likelihood.

    Restarts are iterated together as one array.  A restart stops once the
    relative change of its log-likelihood drops below ``cfg.rel_tol``.  The
    best few EM end points are then refined by BFGS, which is kept only when
    it raises the likelihood (EM crawls on the flat ridges near singular
    tables).  ``allow_zero`` admits empirical tables with empty cells.
    """
    if not allow_zero:
        y.require_positive()
    n = y.n
    bits = outcome_bits(n)
    yc = y.cells
    omega = _initial_points(n, cfg)
    R = omega.shape[0]
    active = np.ones(R, dtype=bool)
    iters = np.zeros(R, dtype=int)
    prev = np.full(R, -np.inf)
    traces: list[list[float]] = [[] for _ in range(R)] if record_trace else []
    converged = np.zeros(R, dtype=bool)

    for _ in range(cfg.max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        new, ll = _em_step(omega[idx], yc, bits, n)
        if record_trace:
            for k, v in zip(idx, ll):
                traces[k].append(float(v))
        done = np.abs(ll - prev[idx]) <= cfg.rel_tol * np.abs(ll)
        prev[idx] = ll
        # a converged restart keeps the parameters its final likelihood was evaluated at
        still = idx[~done]
        omega[still] = new[~done]
        iters[still] += 1
        converged[idx[done]] = True
        active[idx[done]] = False

    final = loglik_batch(omega, yc)
    order = np.argsort(-final, kind="stable")[:_POLISH]
    best_omega, best_ll = omega[order[0]], final[order[0]]
    for k in order:
        cand = _polish(omega[k], yc, bits, n)
        ll = loglik_batch(cand[None, :], yc)[0]
        if ll > best_ll:
            best_omega, best_ll = cand, ll
    best = int(order[0])
    params = ModelParams.from_vector(best_omega)
    theta = joint_from_params(params)
    f_Y = loglik_per_sample(y, theta)
    return MleResult(
        params=params,
        f_Y=f_Y,
        kl_gap=kl_gap(y, theta),
        converged=bool(converged[best]),
        iterations=tuple(int(k) for k in iters),
        traces=tuple(np.array(tr) for tr in traces) if record_trace else None,
    )


# -- derivatives of the normalized loss --------------------------------------

def _loss(omega: np.ndarray, y: ProbTable) -> np.ndarray:
    return -loglik_batch(omega, y.cells)


def _safe_step(omega: np.ndarray, step: float, reach: float = 1.0) -> float:
    h = step
    while np.any(omega - reach * h <= 0.0) or np.any(omega + reach * h >= 1.0):
        h /= 2.0
        if h < 1e-8:
            raise DomainError(f"finite-difference step fell below 1e-8 at {omega.tolist()}")
    return h


def loss_gradient(p: ModelParams, y: ProbTable, step: float = 1e-4) -> np.ndarray:
    omega = p.as_vector()
    h = _safe_step(omega, step)
    eye = np.eye(omega.size) * h
    f = _loss(np.concatenate([omega + eye, omega - eye]), y)
    d = omega.size
    return (f[:d] - f[d:]) / (2 * h)


def loglik_hessian(p: ModelParams, y: ProbTable, step: float = 1e-4) -> np.ndarray:
    """Hessian of f(omega) = f_Y - sum_x y_x ln theta_x(omega) in (a, b, t) coordinates."""
    omega = p.as_vector()
    d = omega.size
    h = _safe_step(omega, step)
    eye = np.eye(d) * h
    f0 = _loss(omega[None, :], y)[0]
    fp = _loss(omega + eye, y)
    fm = _loss(omega - eye, y)
    H = np.empty((d, d))
    H[np.diag_indices(d)] = (fp - 2 * f0 + fm) / h**2
    rows, cols = np.triu_indices(d, k=1)
    ei, ej = eye[rows], eye[cols]
    fpp = _loss(omega + ei + ej, y)
    fpm = _loss(omega + ei - ej, y)
    fmp = _loss(omega - ei + ej, y)
    fmm = _loss(omega - ei - ej, y)
    off = (fpp - fpm - fmp + fmm) / (4 * h**2)
    H[rows, cols] = off
    H[cols, rows] = off
    return H


def laplace_log_evidence(
    y: ProbTable, N: int, mle: MleResult, hessian: np.ndarray | None = None
) -> float:
    """Laplace approximation of ln I with a uniform prior and two mirrored maxima."""
    if N <= 0:
        raise DomainError("N must be positive")
    d = 2 * y.n + 1
    H = loglik_hessian(mle.params, y) if hessian is None else np.asarray(hessian, dtype=float)
    eig = np.linalg.eigvalsh((H + H.T) / 2)
    if eig[0] <= 1e-6:
        raise SingularityError(
            f"Hessian at the ML point is not positive definite (min eigenvalue {eig[0]:.3e}); "
            "use the adjusted score for singular statistics"
        )
    logdet = float(np.sum(np.log(eig)))
    return (
        N * mle.f_Y
        + 0.5 * d * np.log(2 * np.pi)
        - 0.5 * logdet
        - 0.5 * d * np.log(N)
        + np.log(2.0)
    )
