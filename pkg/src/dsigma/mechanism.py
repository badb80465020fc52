"""Execution of a :class:`~dsigma.groups.ShufflePlan` on a data sequence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .groups import ShufflePlan
from .mallows import MallowsError, MallowsParams, sample, sample_batch
from .perm import Permutation, PermutationError, apply, compose, identity, inverse
from .seeding import stream


@dataclass(frozen=True, eq=False)
class ShuffleOutcome:
    z: object
    sigma_star: Permutation
    sigma_hat: Permutation
    plan_digest: str
    seed: int | None = None


def mallows_params(plan: ShufflePlan) -> MallowsParams:
    if plan.rank_distance != "kendall":
        raise MallowsError(
            "shuffling needs a Kendall's tau plan; Hamming is analysis-only"
        )
    return MallowsParams(plan.theta, plan.sigma0, "kendall")


def sigma_star_from_draw(plan: ShufflePlan, sigma_hat: Permutation) -> Permutation:
    """``compose(inverse(sigma0), sigma_hat)``: the permutation applied to ``y``."""
    return compose(inverse(plan.sigma0), sigma_hat)


def _check_length(plan: ShufflePlan, y) -> None:
    if len(y) != plan.n:
        raise PermutationError(f"data has {len(y)} records but the plan covers {plan.n}")


def shuffle_with_fixed_draw(plan: ShufflePlan, y, sigma_hat: Permutation, seed=None) -> ShuffleOutcome:
    _check_length(plan, y)
    if sigma_hat.n != plan.n:
        raise PermutationError(f"draw has size {sigma_hat.n}, plan has {plan.n}")
    star = sigma_star_from_draw(plan, sigma_hat)
    return ShuffleOutcome(apply(star, y), star, sigma_hat, plan.digest(), seed)


def draw_sigma_hat(plan: ShufflePlan, rng: np.random.Generator) -> Permutation:
    if plan.is_identity:
        return plan.sigma0
    return sample(mallows_params(plan), rng)


def shuffle(plan: ShufflePlan, y, seed: int) -> ShuffleOutcome:
    """Sample from the plan's Mallows law and reorder ``y``.

    The draw depends only on ``plan`` and ``seed``, never on ``y``.  Plans
    with zero sensitivity return ``y`` unchanged.
    """
    _check_length(plan, y)
    sigma_hat = draw_sigma_hat(plan, stream(seed, "mechanism"))
    return shuffle_with_fixed_draw(plan, y, sigma_hat, seed)


def sigma_star_batch(plan: ShufflePlan, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent ``sigma*`` draws as rows of an array."""
    if plan.is_identity:
        return np.tile(np.arange(plan.n), (count, 1))
    hats = sample_batch(mallows_params(plan), count, rng)
    s0_inv = inverse(plan.sigma0).mapping
    return hats[:, s0_inv]


def is_identity_outcome(out: ShuffleOutcome) -> bool:
    return out.sigma_star == identity(out.sigma_star.n)
