"""Canonical statistics, synthetic datasets, and the full-versus-independent
model selection experiment.

The experiment draws data from the all-independent model M_D and asks
whether M_F (the two-state naive Bayes model) or M_D is selected, once with
the standard BIC for M_F and once with the class-adjusted score.  M_D has an
exact evidence under uniform priors on its n Bernoulli parameters.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaln

from .classify import DEFAULT_TOL, Label, classify_stats
from .errors import DomainError, VerificationError
from .mle import EmConfig, em_fit
from .model import ModelParams, ProbTable, joint_from_params, outcome_bits, product_table
from .score import adjusted_bic, standard_bic

KINDS = ("regular", "type1", "type2")
_EXPECTED = {"regular": Label.REGULAR, "type1": Label.TYPE1, "type2": Label.TYPE2}
MAX_ATTEMPTS = 10


def _linked(rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Pairs with |a - b| >= 0.3, randomly oriented."""
    hi = rng.uniform(0.65, 0.9, size)
    lo = rng.uniform(0.1, 0.35, size)
    flip = rng.uniform(size=size) < 0.5
    return np.where(flip, lo, hi), np.where(flip, hi, lo)


def construct_stats(kind: str, n: int, rng: np.random.Generator) -> ProbTable:
    """Raw construction for a class, without checking it against the classifier."""
    if kind not in KINDS:
        raise DomainError(f"kind must be one of {KINDS}")
    if n < 3:
        raise DomainError("regular, type1 and type2 constructions need n >= 3")
    if kind == "type2":
        return product_table(rng.uniform(0.2, 0.8, n))
    t = rng.uniform(0.3, 0.7)
    if kind == "regular":
        a, b = _linked(rng, n)
        return joint_from_params(ModelParams(a, b, t))
    shared = rng.uniform(0.2, 0.8, n)
    a, b = shared.copy(), shared.copy()
    pair = rng.choice(n, size=2, replace=False)
    a[pair], b[pair] = _linked(rng, 2)
    return joint_from_params(ModelParams(a, b, t))


def make_stats(kind: str, n: int, seed: int, cfg: EmConfig = EmConfig()) -> ProbTable:
    """A classifier-verified table of the requested class (up to 10 attempts)."""
    for child in np.random.SeedSequence(seed).spawn(MAX_ATTEMPTS):
        y = construct_stats(kind, n, np.random.default_rng(child))
        if classify_stats(y, DEFAULT_TOL, cfg).label is _EXPECTED[kind]:
            return y
    raise VerificationError(f"no {kind} table for n={n} after {MAX_ATTEMPTS} attempts (seed {seed})")


def sample_dataset(p: ModelParams, N: int, seed: int) -> np.ndarray:
    """N multinomial draws from the joint table of ``p``."""
    if N < 1:
        raise DomainError("N must be >= 1")
    theta = joint_from_params(p).cells
    return np.random.default_rng(seed).multinomial(int(N), theta / theta.sum())


def md_exact_log_evidence(counts) -> float:
    """ln evidence of the independent model, uniform prior per feature.

    Each feature contributes ln[c1! c0! / (N + 1)!].
    """
    counts = np.asarray(counts)
    if counts.ndim != 1 or counts.size < 2 or counts.size & (counts.size - 1):
        raise DomainError("counts must be a vector of length 2^n")
    if np.any(counts < 0) or np.any(counts != np.round(counts)):
        raise DomainError("counts must be non-negative integers")
    n = counts.size.bit_length() - 1
    N = float(counts.sum())
    c1 = outcome_bits(n).T @ counts.astype(float)
    c0 = N - c1
    return float(np.sum(gammaln(c1 + 1) + gammaln(c0 + 1) - gammaln(N + 2)))


@dataclass(frozen=True)
class Trial:
    gamma: list
    counts: list
    label: str
    f_Y: float
    md_score: float
    mf_standard: float
    mf_adjusted: float
    pick_standard: str
    pick_adjusted: str
    score_gap: float


@dataclass(frozen=True)
class ExperimentReport:
    trials: int
    N: int
    n: int
    prior_p: float
    seed: int
    selections: dict
    class_counts: dict
    per_trial: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls(**json.loads(text))


def _run_trial(args) -> Trial:
    child, n, N, prior_p, cfg = args
    rng = np.random.default_rng(child)
    gamma = rng.uniform(0.2, 0.8, n)
    theta = product_table(gamma).cells
    counts = rng.multinomial(N, theta / theta.sum())
    cells = counts / N
    ln_p, ln_q = math.log(prior_p), math.log1p(-prior_p)
    md = md_exact_log_evidence(counts) + ln_q
    positive = bool(np.all(counts > 0))
    # EM copes with empty cells; the classifier needs a strictly positive table
    fit = em_fit(ProbTable(cells), cfg, allow_zero=True)
    mf_std = standard_bic(fit.f_Y, N, n) + ln_p
    label = "ZeroCells"
    mf_adj = mf_std
    if positive:
        cls = classify_stats(ProbTable(cells), DEFAULT_TOL, cfg)
        label = cls.label.value
        if cls.label is not Label.OUTSIDE_MODEL:
            mf_adj = adjusted_bic(ProbTable(cells), N, cls, cls.f_Y).adjusted + ln_p

    def pick(mf):
        return "M_F" if mf > md else "M_D"

    return Trial(
        gamma=[float(g) for g in gamma],
        counts=[int(c) for c in counts],
        label=label,
        f_Y=float(fit.f_Y),
        md_score=md,
        mf_standard=float(mf_std),
        mf_adjusted=float(mf_adj),
        pick_standard=pick(mf_std),
        pick_adjusted=pick(mf_adj),
        score_gap=float(mf_adj - mf_std),
    )


def mf_vs_md_experiment(
    n: int,
    N: int,
    prior_p: float = 0.5,
    trials: int = 10,
    seed: int = 0,
    workers: int = 1,
    cfg: EmConfig = EmConfig(restarts=8),
) -> ExperimentReport:
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if not 0.0 < prior_p < 1.0:
        raise DomainError("prior_p must lie in (0, 1)")
    if n < 1 or N < 3:
        raise DomainError("need n >= 1 and N >= 3")
    args = [(c, n, int(N), prior_p, cfg) for c in np.random.SeedSequence(seed).spawn(trials)]
    if workers <= 1:
        results = [_run_trial(a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial, args))
    selections = {
        "standard": {"M_F": 0, "M_D": 0},
        "adjusted": {"M_F": 0, "M_D": 0},
    }
    classes: dict[str, int] = {}
    for r in results:
        selections["standard"][r.pick_standard] += 1
        selections["adjusted"][r.pick_adjusted] += 1
        classes[r.label] = classes.get(r.label, 0) + 1
    return ExperimentReport(
        trials=trials,
        N=int(N),
        n=n,
        prior_p=float(prior_p),
        seed=seed,
        selections=selections,
        class_counts=dict(sorted(classes.items())),
        per_trial=[asdict(r) for r in results],
    )
