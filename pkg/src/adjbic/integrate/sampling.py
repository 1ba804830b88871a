"""Stochastic estimators of ln I: quasi-Monte Carlo, importance sampling, and
thermodynamic integration over a tempered particle population.

Each estimator splits its work into a fixed number of blocks, each driven by
its own ``SeedSequence`` child.  Blocks may run on a thread pool, but results
are always reduced in block order, so the estimate for a given
(budget, seed) does not depend on the number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import genpareto, multivariate_normal, qmc

from ..errors import IntegrationError
from ..mle import EmConfig, em_fit, loglik_hessian
from ..model import ProbTable, loglik_batch
from .quadrature import pair_sum_squares, toy_inner

_EDGE = 1e-12
CHUNK = 1 << 15
KHAT_MAX = 0.7


def _map_blocks(fn, args: list, workers: int) -> list:
    if workers <= 1 or len(args) == 1:
        return [fn(a) for a in args]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args))


def _children(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def _loglik_chunked(omega: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.empty(omega.shape[0])
    for s in range(0, omega.shape[0], CHUNK):
        out[s : s + CHUNK] = loglik_batch(omega[s : s + CHUNK], y)
    return out


def _log_mean_with_se(logw: np.ndarray) -> tuple[float, float]:
    """ln mean(exp(logw)) and its delta-method standard error."""
    finite = np.isfinite(logw)
    if np.count_nonzero(finite) < 2:
        raise IntegrationError("fewer than two samples with nonzero weight; raise the budget")
    m = np.max(logw[finite])
    r = np.where(finite, np.exp(logw - m), 0.0)
    mean = r.mean()
    se = r.std(ddof=1) / (np.sqrt(r.size) * mean)
    return float(m + np.log(mean)), float(se)


def pareto_khat(logw: np.ndarray) -> float:
    """Shape of a generalized Pareto fit to the largest weights.

    Above 1/2 the weights have infinite variance; above 0.7 the sample mean
    is not a usable estimate at any practical sample size.
    """
    lw = np.sort(logw[np.isfinite(logw)])
    S = lw.size
    M = int(min(0.2 * S, 3.0 * np.sqrt(S)))
    if M < 5:
        raise IntegrationError("too few samples with nonzero weight; raise the budget")
    excess = np.expm1(lw[-M:] - lw[-M - 1])
    if not np.any(excess > 0):
        return -np.inf
    # the shape is scale-free; rescaling keeps the fit away from overflow
    shape, _, _ = genpareto.fit(excess / excess.max(), floc=0.0)
    return float(shape)


def _check_tail(logw: np.ndarray, method: str) -> float:
    k = pareto_khat(logw)
    if k > KHAT_MAX:
        raise IntegrationError(
            f"{method} weights are too heavy-tailed for a standard error "
            f"(Pareto shape {k:.2f} > {KHAT_MAX}); use another method or raise the budget"
        )
    return k


def _replica_combine(estimates: np.ndarray) -> tuple[float, float]:
    """Average of independent unbiased replicas of I, reduced in log space."""
    R = estimates.size
    if R < 2 or not np.all(np.isfinite(estimates)):
        raise IntegrationError("need at least two finite replicas for a standard error")
    ln_i = float(logsumexp(estimates) - np.log(R))
    rel = np.exp(estimates - ln_i)
    return ln_i, float(rel.std(ddof=1) / np.sqrt(R))


# -- quasi-Monte Carlo ---------------------------------------------------------

def _qmc_replica(args) -> np.ndarray:
    child, y, N, d, m = args
    pts = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(child)).random_base2(m)
    pts = np.clip(pts, _EDGE, 1 - _EDGE)
    return N * _loglik_chunked(pts, y)


def _replica_means(logws: list[np.ndarray]) -> np.ndarray:
    return np.array([logsumexp(lw) - np.log(lw.size) for lw in logws])


def qmc_log_evidence(
    y: ProbTable, N: float, budget: int, seed: int, workers: int = 1, replicas: int = 16
) -> tuple[float, float, dict]:
    m = int(np.floor(np.log2(max(budget // replicas, 1))))
    if m < 4:
        raise IntegrationError(f"budget {budget} gives fewer than 16 points per replica")
    d = 2 * y.n + 1
    args = [(c, y.cells, N, d, m) for c in _children(seed, replicas)]
    logws = _map_blocks(_qmc_replica, args, workers)
    k = _check_tail(np.concatenate(logws), "quasi-mc")
    ln_i, se = _replica_combine(_replica_means(logws))
    diag = {"replicas": replicas, "points_per_replica": 1 << m, "evals": replicas << m, "khat": k}
    return ln_i, se, diag


# -- importance sampling -------------------------------------------------------

def _mirror_matrix(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Affine map omega -> (b, a, 1 - t) as (S, offset)."""
    d = 2 * n + 1
    S = np.zeros((d, d))
    S[np.arange(n), n + np.arange(n)] = 1.0
    S[n + np.arange(n), np.arange(n)] = 1.0
    S[-1, -1] = -1.0
    off = np.zeros(d)
    off[-1] = 1.0
    return S, off


@dataclass(frozen=True)
class ImportancePlan:
    """Mixture proposal: half uniform on the cube, half Gaussian bumps."""

    centers: tuple[np.ndarray, ...]
    covs: tuple[np.ndarray, ...]

    def log_density(self, omega: np.ndarray) -> np.ndarray:
        inside = np.all((omega > 0) & (omega < 1), axis=1)
        bumps = np.stack(
            [multivariate_normal(c, S).logpdf(omega) for c, S in zip(self.centers, self.covs)]
        )
        lg = logsumexp(bumps, axis=0) - np.log(len(self.centers))
        return np.logaddexp(np.where(inside, np.log(0.5), -np.inf), np.log(0.5) + lg)

    def sample(self, rng: np.random.Generator, count: int, d: int) -> np.ndarray:
        use_bump = rng.uniform(size=count) < 0.5
        which = rng.integers(0, len(self.centers), size=count)
        out = rng.uniform(size=(count, d))
        for k, (c, S) in enumerate(zip(self.centers, self.covs)):
            sel = use_bump & (which == k)
            if np.any(sel):
                out[sel] = rng.multivariate_normal(c, S, size=int(sel.sum()), method="cholesky")
        return out


def importance_plan(y: ProbTable, N: float, cap: float = 0.15, cfg: EmConfig = EmConfig()):
    """Bumps at the ML point and its label-swapped mirror.

    The bump covariance is (N H + I / cap^2)^{-1} with H the loss Hessian
    clipped to its positive part, so flat (singular) directions get width ``cap``.
    """
    fit = em_fit(y, cfg)
    omega = fit.params.as_vector()
    H = loglik_hessian(fit.params, y)
    vals, vecs = np.linalg.eigh((H + H.T) / 2)
    H = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    d = omega.size
    cov = np.linalg.inv(N * H + np.eye(d) / cap**2)
    cov = (cov + cov.T) / 2
    S, off = _mirror_matrix(y.n)
    return ImportancePlan((omega, S @ omega + off), (cov, S @ cov @ S.T)), fit


def _importance_block(args) -> np.ndarray:
    child, plan, y, N, count, d = args
    rng = np.random.default_rng(child)
    omega = plan.sample(rng, count, d)
    inside = np.all((omega > 0) & (omega < 1), axis=1)
    logw = np.full(count, -np.inf)
    if np.any(inside):
        w_in = omega[inside]
        logw[inside] = N * _loglik_chunked(w_in, y) - plan.log_density(w_in)
    return logw


def importance_log_evidence(
    y: ProbTable, N: float, budget: int, seed: int, workers: int = 1, blocks: int = 8
) -> tuple[float, float, dict]:
    per = budget // blocks
    if per < 8:
        raise IntegrationError(f"budget {budget} is too small for {blocks} blocks")
    plan, fit = importance_plan(y, N)
    d = 2 * y.n + 1
    args = [(c, plan, y.cells, N, per, d) for c in _children(seed, blocks)]
    logw = np.concatenate(_map_blocks(_importance_block, args, workers))
    ln_i, se = _log_mean_with_se(logw)
    k = _check_tail(logw, "importance")
    r = np.exp(logw - np.max(logw))
    ess = float(r.sum() ** 2 / np.sum(r * r))
    return ln_i, se, {"evals": per * blocks, "ess": ess, "khat": k, "f_Y": fit.f_Y}


# -- thermodynamic integration -------------------------------------------------

@dataclass(frozen=True)
class ThermoConfig:
    levels: int = 64
    beta_floor: float = 1e-6
    moves: int = 10
    groups: int = 8
    ess_floor: float = 1.0 / 3.0
    max_inserts: int = 8
    scale_range: tuple[float, float] = (0.05, 2.5)

    def evals_per_particle(self) -> int:
        return 1 + self.levels * 2 * self.moves


def _reflect(z: np.ndarray) -> np.ndarray:
    z = np.mod(z, 2.0)
    return np.clip(np.where(z > 1.0, 2.0 - z, z), _EDGE, 1.0 - _EDGE)


def _systematic(rng: np.random.Generator, logw: np.ndarray) -> np.ndarray:
    p = np.exp(logw - logsumexp(logw))
    P = p.size
    u = (rng.uniform() + np.arange(P)) / P
    return np.minimum(np.searchsorted(np.cumsum(p), u), P - 1)


def _ess(logw: np.ndarray) -> float:
    w = np.exp(logw - np.max(logw))
    return float(w.sum() ** 2 / np.sum(w * w))


def _thermo_group(args) -> dict:
    """One independent tempered population; returns its beta path and mean-loglik curve."""
    child, y, N, P, cfg = args
    rng = np.random.default_rng(child)
    d = 2 * int(round(np.log2(y.size))) + 1
    W = np.clip(rng.uniform(size=(P, d)), _EDGE, 1 - _EDGE)
    L = loglik_batch(W, y)
    evals = P
    targets = np.geomspace(N * cfg.beta_floor, N, cfg.levels)
    beta = targets[0]
    ln_z1 = float(logsumexp(beta * L) - np.log(P))
    ln_ss = ln_z1
    logw = beta * L
    betas, means, accept = [], [], []
    scale = 0.5
    lo_s, hi_s = cfg.scale_range
    inserted = 0

    def move(W, L, beta, scale):
        C = np.cov(W.T) + 1e-14 * np.eye(d)
        chol = np.linalg.cholesky(C)
        sd = np.sqrt(np.diag(C))
        nacc = 0
        sweep_means = []
        for _ in range(cfg.moves):
            for kind in (0, 1):
                if kind == 0:
                    # correlated steps are not symmetric under reflection: reject outside
                    prop = W + scale * (rng.standard_normal((P, d)) @ chol.T)
                    inside = np.all((prop > _EDGE) & (prop < 1 - _EDGE), axis=1)
                    prop[~inside] = W[~inside]
                else:
                    j = rng.integers(d, size=P)
                    mult = np.exp(rng.uniform(np.log(1e-3), 0.0, size=P))
                    prop = W.copy()
                    prop[np.arange(P), j] += mult * 3.0 * sd[j] * rng.standard_normal(P)
                    prop = _reflect(prop)
                    inside = np.ones(P, dtype=bool)
                Lp = loglik_batch(prop, y)
                ok = inside & (np.log(rng.uniform(size=P)) < beta * (Lp - L))
                W[ok] = prop[ok]
                L[ok] = Lp[ok]
                if kind == 0:
                    nacc += int(ok.sum())
            sweep_means.append(L.mean())
        return W, L, nacc / (cfg.moves * P), float(np.mean(sweep_means))

    k = 0
    while True:
        # importance-weighted mean at the current beta, then resample and move
        wmean = float(np.sum(np.exp(logw - logsumexp(logw)) * L))
        idx = _systematic(rng, logw)
        W, L = W[idx], L[idx]
        W, L, acc, smean = move(W, L, beta, scale)
        evals += 2 * cfg.moves * P
        betas.append(beta)
        means.append(0.5 * (wmean + smean))
        accept.append(acc)
        if acc < 0.25:
            scale = max(lo_s, scale * 0.7)
        elif acc > 0.40:
            scale = min(hi_s, scale * 1.3)
        if k == cfg.levels - 1:
            break
        nxt = targets[k + 1]
        for _ in range(cfg.max_inserts if inserted < 4 * cfg.levels else 0):
            if _ess((nxt - beta) * L) >= cfg.ess_floor * P:
                break
            nxt = np.sqrt(nxt * beta)
        if nxt < targets[k + 1]:
            inserted += 1
        else:
            k += 1
        logw = (nxt - beta) * L
        ln_ss += float(logsumexp(logw) - np.log(P))
        beta = nxt
    return {
        "betas": np.array(betas),
        "means": np.array(means),
        "ln_z1": ln_z1,
        "ln_ss": ln_ss,
        "evals": evals,
        "accept": np.array(accept),
        "inserted": inserted,
    }


def ti_integral(betas: np.ndarray, means: np.ndarray, ln_z1: float, ref: float) -> float:
    """ln Z(beta_1) + int ln-beta trapezoid of beta (E_beta - ref) + (beta_K - beta_1) ref."""
    h = betas * (means - ref)
    return float(
        ln_z1 + np.sum(0.5 * (h[1:] + h[:-1]) * np.diff(np.log(betas))) + (betas[-1] - betas[0]) * ref
    )


def thermo_log_evidence(
    y: ProbTable,
    N: float,
    budget: int,
    seed: int,
    workers: int = 1,
    cfg: ThermoConfig = ThermoConfig(),
    ref: float | None = None,
) -> tuple[float, float, dict]:
    P = budget // (cfg.groups * cfg.evals_per_particle())
    if P < 4 * (2 * y.n + 1):
        raise IntegrationError(
            f"budget {budget} gives {P} particles per group; need at least {4 * (2 * y.n + 1)}"
        )
    args = [(c, y.cells, N, P, cfg) for c in _children(seed, cfg.groups)]
    runs = _map_blocks(_thermo_group, args, workers)
    if ref is None:
        ref = float(max(r["means"].max() for r in runs))
    est = np.array([ti_integral(r["betas"], r["means"], r["ln_z1"], ref) for r in runs])
    if not np.all(np.isfinite(est)):
        raise IntegrationError("thermodynamic integration produced a non-finite estimate")
    diag = {
        "evals": int(sum(r["evals"] for r in runs)),
        "particles_per_group": int(P),
        "groups": cfg.groups,
        "levels_used": int(max(r["betas"].size for r in runs)),
        "final_acceptance": float(np.mean([r["accept"][-1] for r in runs])),
        "group_estimates": est.tolist(),
        "ss": list(_replica_combine(np.array([r["ln_ss"] for r in runs]))),
    }
    return float(est.mean()), float(est.std(ddof=1) / np.sqrt(est.size)), diag


# -- toy integral by graded quasi-Monte Carlo ------------------------------------

def _toy_qmc_replica(args) -> np.ndarray:
    child, n, N, eps, m, power = args
    d = n - 1
    w = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(child)).random_base2(m)
    w = np.clip(w, _EDGE, 1 - _EDGE)
    # u = eps w^p puts points near the coordinate hyperplanes where the mass sits
    u = eps * w**power
    log_jac = np.sum(np.log(eps * power) + (power - 1) * np.log(w), axis=1)
    U2 = [u[:, k] ** 2 for k in range(d)]
    R = pair_sum_squares(U2)
    return log_jac + np.log(toy_inner(sum(U2), eps, N)) - 2.0 * N * R


def log_toy_qmc(
    n: int, N: float, eps: float, budget: int, seed: int, workers: int = 1,
    replicas: int = 16, power: float = 4.0,
) -> tuple[float, float, dict]:
    if n == 1:
        return float(np.log(2 * eps)), 0.0, {"evals": 0}
    m = int(np.floor(np.log2(max(budget // replicas, 1))))
    if m < 4:
        raise IntegrationError(f"budget {budget} gives fewer than 16 points per replica")
    args = [(c, n, N, eps, m, power) for c in _children(seed, replicas)]
    logws = _map_blocks(_toy_qmc_replica, args, workers)
    k = _check_tail(np.concatenate(logws), "quasi-mc")
    ln_j, se = _replica_combine(_replica_means(logws) + n * np.log(2.0))
    return ln_j, se, {"replicas": replicas, "evals": replicas << m, "khat": k}
