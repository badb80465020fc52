"""Attack and learnability experiments on shuffled randomized data.

One mechanism permutation is drawn per experiment and reused for every
randomized-response resample.  The adversary sees only the released
sequence ``z``, the public positions and (optionally) a privileged
scalar per record; it never reads ``x``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .datasets import Dataset
from .groups import GroupAssignment, ShufflePlan, compute_groups, identity_plan, make_plan, uniform_plan
from .ldp import RandomizerConfig, debias, project_simplex, randomize
from .mechanism import draw_sigma_hat, sigma_star_from_draw
from .seeding import stream

log = logging.getLogger(__name__)


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    k_neighbors: int = 25
    trials: int = 50
    success_threshold: float = 0.9
    epsilon: float = 2.5
    r_star: float = 0.1

    def __post_init__(self):
        if not 0 < self.success_threshold <= 1:
            raise EvaluationError("success_threshold must lie in (0, 1]")
        if self.k_neighbors < 1:
            raise EvaluationError("k_neighbors must be >= 1")
        if self.trials < 1:
            raise EvaluationError("trials must be >= 1")
        if self.r_star < 0:
            raise EvaluationError("r_star must be >= 0")


@dataclass
class AttackReport:
    rho: float
    per_record_success: np.ndarray
    config: dict
    seed: int
    tie_rate: float = 0.0
    short_neighborhoods: int = 0
    degenerate: bool = False

    def to_dict(self, include_records: bool = False) -> dict:
        d = asdict(self)
        rec = d.pop("per_record_success")
        if include_records:
            d["per_record_success"] = np.asarray(rec).tolist()
        d["mean_success"] = float(np.mean(rec))
        return d


@dataclass
class LearnabilityReport:
    lam: float
    per_point_tv: np.ndarray
    baseline_tv: float
    mean_tv: float
    skipped: int = 0
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "mean_tv": self.mean_tv,
            "baseline_tv": self.baseline_tv,
            "skipped": self.skipped,
            "seed": self.seed,
            **self.extra,
        }


def draw_sigma_star(plan: ShufflePlan, seed: int) -> np.ndarray:
    """The experiment's single applied permutation (as an index array)."""
    return sigma_star_from_draw(plan, draw_sigma_hat(plan, stream(seed, "mechanism"))).mapping


def ball(ds: Dataset, r_star: float) -> GroupAssignment:
    """Public ``r_star``-neighbourhood of every record (the record itself included)."""
    return compute_groups(ds.aux, r_star)


def select_neighbors(ds: Dataset, cfg: AttackConfig, rng: np.random.Generator, balls=None):
    """Up to ``k_neighbors`` owners per record, padded with ``-1``.

    Candidates come from the ``r_star`` ball; with a privileged column they
    are ranked by ``|t_p|`` difference, otherwise drawn uniformly.
    """
    balls = ball(ds, cfg.r_star) if balls is None else balls
    k = cfg.k_neighbors
    out = np.full((ds.n, k), -1, dtype=np.int64)
    short = 0
    for i in range(ds.n):
        cand = balls.group(i)
        if ds.privileged is not None:
            gap = np.abs(ds.privileged[cand] - ds.privileged[i])
            chosen = cand[np.lexsort((cand, gap))[:k]]
        else:
            chosen = cand if cand.size <= k else rng.choice(cand, size=k, replace=False)
        if chosen.size < k:
            short += 1
        out[i, : chosen.size] = chosen
    if short:
        log.warning("%d records have fewer than %d candidates within r*=%g; using all available",
                    short, k, cfg.r_star)
    return out, short


def plurality(z: np.ndarray, nbrs: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Most frequent neighbour value per row (smallest category on ties) and a tie flag."""
    valid = nbrs >= 0
    votes = np.where(valid, z[np.where(valid, nbrs, 0)], -1)
    counts = (votes[:, :, None] == np.arange(k)[None, None, :]).sum(axis=1)
    pred = np.argmax(counts, axis=1)
    top = counts.max(axis=1)
    ties = (counts == top[:, None]).sum(axis=1) > 1
    return pred, ties


def run_attack(ds: Dataset, plan: ShufflePlan, cfg: AttackConfig, seed: int, balls=None) -> AttackReport:
    """Majority-vote inference attack; ``rho`` is the fraction of records guessed
    correctly in at least ``success_threshold`` of the trials.
    """
    if plan.n != ds.n:
        raise EvaluationError(f"plan covers {plan.n} records, dataset has {ds.n}")
    nbrs, short = select_neighbors(ds, cfg, stream(seed, "attack-neighbors"), balls)
    star = draw_sigma_star(plan, seed)
    rr = RandomizerConfig(cfg.epsilon, ds.k)
    rng = stream(seed, "attack-ldp")
    hits = np.zeros(ds.n)
    ties = 0
    for _ in range(cfg.trials):
        y = randomize(rr, ds.x, rng)
        z = y[star]
        pred, tie = plurality(z, nbrs, ds.k)
        hits += pred == ds.x
        ties += int(tie.sum())
    success = hits / cfg.trials
    degenerate = bool(np.unique(ds.x).size == 1)
    if degenerate:
        log.warning("all records share one x value; attack success is trivial")
    return AttackReport(
        rho=float(np.mean(success >= cfg.success_threshold)),
        per_record_success=success,
        config=asdict(cfg),
        seed=int(seed),
        tie_rate=ties / (cfg.trials * ds.n),
        short_neighborhoods=short,
        degenerate=degenerate,
    )


class Estimator(Protocol):
    def __call__(self, balls: GroupAssignment, z: np.ndarray, k: int) -> np.ndarray:
        """Predicted distribution over the ``k`` categories at every record's position."""


@dataclass(frozen=True)
class BallHistogramEstimator:
    """Histogram of released values inside each ball, with the RR channel inverted."""

    epsilon: float

    def __call__(self, balls: GroupAssignment, z: np.ndarray, k: int) -> np.ndarray:
        hist = ball_histograms(balls, z, k)
        return project_simplex(debias(RandomizerConfig(self.epsilon, k), hist))


@dataclass(frozen=True)
class GlobalHistogramEstimator:
    """Same debiased histogram for everyone, ignoring position."""

    epsilon: float

    def __call__(self, balls: GroupAssignment, z: np.ndarray, k: int) -> np.ndarray:
        freq = np.bincount(z, minlength=k) / z.size
        est = project_simplex(debias(RandomizerConfig(self.epsilon, k), freq))
        return np.tile(est, (balls.n, 1))


def ball_histograms(balls: GroupAssignment, values: np.ndarray, k: int) -> np.ndarray:
    """Normalized value histogram of every ball; rows of empty balls are zero."""
    owner = np.repeat(np.arange(balls.n), balls.sizes())
    counts = np.zeros((balls.n, k))
    np.add.at(counts, (owner, values[balls.indices]), 1.0)
    sizes = balls.sizes()[:, None].astype(float)
    return np.divide(counts, sizes, out=np.zeros_like(counts), where=sizes > 0)


def run_learnability(
    ds: Dataset,
    plan: ShufflePlan,
    r_star: float,
    estimator: Estimator | None = None,
    seed: int = 0,
    epsilon: float = 2.5,
    repeats: int = 1,
    balls=None,
) -> LearnabilityReport:
    """``lambda = mean TV(estimate, truth) / mean TV(uniform, truth)``.

    Truth at record ``i`` is the empirical ``x`` distribution inside its
    ``r_star`` ball.  The TV errors are averaged over ``repeats``
    randomized-response draws under the same mechanism permutation.
    """
    estimator = estimator or BallHistogramEstimator(epsilon)
    balls = ball(ds, r_star) if balls is None else balls
    keep = balls.sizes() > 0
    skipped = int((~keep).sum())
    if skipped:
        log.warning("%d records have an empty r*-ball and are skipped", skipped)
    truth = ball_histograms(balls, ds.x, ds.k)[keep]
    baseline = float(np.mean(0.5 * np.abs(truth - 1.0 / ds.k).sum(axis=1)))
    star = draw_sigma_star(plan, seed)
    rr = RandomizerConfig(epsilon, ds.k)
    rng = stream(seed, "learn-ldp")
    tv = np.zeros(int(keep.sum()))
    for _ in range(repeats):
        z = randomize(rr, ds.x, rng)[star]
        pred = estimator(balls, z, ds.k)[keep]
        tv += 0.5 * np.abs(pred - truth).sum(axis=1)
    tv /= repeats
    mean_tv = float(tv.mean())
    lam = mean_tv / baseline if baseline > 0 else math.nan
    if baseline == 0:
        log.warning("ground truth is uniform everywhere; lambda is undefined")
    return LearnabilityReport(lam, tv, baseline, mean_tv, skipped, int(seed))


SWEEP_HEADER = ("r", "alpha", "rho", "lambda", "omega", "delta_sensitivity", "seed")


def sweep(
    ds: Dataset,
    alphas: Sequence[float],
    radii: Sequence[float],
    cfg: AttackConfig,
    seed: int,
    metric: str | None = None,
    threads: int = 1,
    learn_repeats: int = 1,
    progress: Callable[[str], None] | None = None,
) -> list[dict]:
    """One row per ``(r, alpha)`` cell, in grid order.

    Every cell reuses the same seed, so the randomized-response draws are
    shared and differences between cells come from the plans alone.
    """
    if not alphas or not radii:
        raise EvaluationError("alphas and radii must be non-empty")
    balls = ball(ds, cfg.r_star)

    def cell(r, a):
        plan = make_plan(ds.aux, r, a, metric)
        att = run_attack(ds, plan, cfg, seed, balls)
        lrn = run_learnability(ds, plan, cfg.r_star, seed=seed, epsilon=cfg.epsilon,
                               repeats=learn_repeats, balls=balls)
        if progress:
            progress(f"r={r} alpha={a}: rho={att.rho:.4f} lambda={lrn.lam:.4f} width={plan.width}")
        return {"r": r, "alpha": a, "rho": att.rho, "lambda": lrn.lam,
                "omega": plan.width, "delta_sensitivity": plan.sensitivity, "seed": seed}

    grid = [(float(r), float(a)) for r in radii for a in alphas]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(grid, pool.map(lambda c: cell(*c), grid)))
    else:
        results = {c: cell(*c) for c in grid}
    return [results[c] for c in grid]


def endpoint_reports(ds: Dataset, cfg: AttackConfig, seed: int, balls=None) -> dict:
    """Attack and learnability at the two extremes: no shuffling and uniform shuffling."""
    balls = ball(ds, cfg.r_star) if balls is None else balls
    out = {}
    for name, plan in (("identity", identity_plan(ds.n)), ("uniform", uniform_plan(ds.n))):
        att = run_attack(ds, plan, cfg, seed, balls)
        lrn = run_learnability(ds, plan, cfg.r_star, seed=seed, epsilon=cfg.epsilon, balls=balls)
        out[name] = {"rho": att.rho, "lambda": lrn.lam}
    return out
