"""Exhaustive privacy audits for small instances.

Every audit enumerates the full output law of the mechanism and takes the
worst log-ratio between neighbouring inputs.  Nothing here samples, so a
pass or fail is reproducible bit for bit.

Inputs are the sentinel sequence ``y = (0, ..., n-1)``: an input ordering
``s`` is the sequence ``apply(s, y) = s`` itself, and every output sequence
identifies exactly one applied permutation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator

import numpy as np

from .groups import GroupAssignment, ShufflePlan
from .ldp import RandomizerConfig, log_channel_matrix
from .mallows import log_normalizer
from .perm import (
    Permutation,
    all_permutations_array,
    index_of_permutations,
    inverse,
    inversions_batch,
)

TOLERANCE = 1e-9
MAX_AUDIT_N = 6
MAX_SEMANTIC_N = 5
MAX_COMPOSITION_N = 5


class AuditError(ValueError):
    pass


@dataclass
class AuditReport:
    n: int
    alpha_claimed: float
    max_log_ratio_observed: float
    witness: dict | None
    neighbor_pairs_checked: int
    passed: bool
    kind: str = "dsigma"
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        for key in ("alpha_claimed", "max_log_ratio_observed"):
            if math.isinf(d[key]):
                d[key] = "inf"
        return d


def _guard(n: int, limit: int, what: str) -> None:
    if n > limit:
        raise AuditError(f"{what} is exhaustive and limited to n <= {limit}, got n={n}")


def _neighbor_classes(perms: np.ndarray, g: GroupAssignment) -> list[np.ndarray]:
    """One label array per distinct group: equal labels mean equal values outside the group."""
    n = perms.shape[1]
    weights = n ** np.arange(n, dtype=np.int64)
    out = []
    for members in g.distinct_groups():
        outside = np.setdiff1d(np.arange(n), members)
        key = perms[:, outside] @ weights[: outside.size]
        out.append(np.unique(key, return_inverse=True)[1].ravel())
    return out


def neighboring_pairs(g: GroupAssignment) -> Iterator[tuple[Permutation, Permutation]]:
    """All ordered pairs ``(s, s')`` agreeing outside at least one group, ``(s, s)`` included."""
    _guard(g.n, MAX_AUDIT_N, "neighbouring-pair enumeration")
    perms = _perms(g.n)
    for i, j in zip(*np.nonzero(_neighbor_matrix(g))):
        yield Permutation(perms[i], _trusted=True), Permutation(perms[j], _trusted=True)


_PERM_CACHE: dict[int, np.ndarray] = {}


def _perms(n: int) -> np.ndarray:
    if n not in _PERM_CACHE:
        _PERM_CACHE[n] = all_permutations_array(n)
    return _PERM_CACHE[n]


def _neighbor_matrix(g: GroupAssignment) -> np.ndarray:
    perms = _perms(g.n)
    mat = np.zeros((perms.shape[0], perms.shape[0]), dtype=bool)
    for labels in _neighbor_classes(perms, g):
        mat |= labels[:, None] == labels[None, :]
    return mat


def count_neighboring_pairs(g: GroupAssignment) -> int:
    _guard(g.n, MAX_AUDIT_N, "neighbouring-pair enumeration")
    return int(_neighbor_matrix(g).sum())


def _log_sigma_star_pmf(plan: ShufflePlan) -> np.ndarray:
    """Log-probability of each applied permutation, indexed like :func:`_perms`."""
    perms = _perms(plan.n)
    if plan.is_identity:
        out = np.full(perms.shape[0], -np.inf)
        out[0] = 0.0  # lexicographic rank 0 is the identity
        return out
    if plan.rank_distance != "kendall":
        raise AuditError("the mechanism audit needs a Kendall's tau plan")
    # sigma_hat[m] = sigma_star[sigma0[m]]; distance is item-pair inversions of sigma0^-1 . sigma_hat
    hats = perms[:, plan.sigma0.mapping]
    dist = inversions_batch(inverse(plan.sigma0).mapping[hats])
    return -plan.theta * dist - log_normalizer(plan.theta, plan.n)


def mechanism_output_dist(plan: ShufflePlan, input_perm: Permutation) -> dict[Permutation, float]:
    """Exact law of the released sequence when the input is ``apply(input_perm, sentinels)``."""
    _guard(plan.n, MAX_AUDIT_N, "output enumeration")
    if input_perm.n != plan.n:
        raise AuditError("input permutation size does not match the plan")
    perms = _perms(plan.n)
    logp = _log_sigma_star_pmf(plan)
    outputs = input_perm.mapping[perms]
    out = {}
    for row, lp in zip(outputs, logp):
        if lp > -np.inf:
            out[Permutation(row, _trusted=True)] = float(np.exp(lp))
    return out


def mechanism_log_matrix(plan: ShufflePlan) -> np.ndarray:
    """``L[s, z]``: log-probability that input ordering ``s`` is released as ``z``.

    Rows and columns follow lexicographic permutation rank.
    """
    _guard(plan.n, MAX_AUDIT_N, "output enumeration")
    perms = _perms(plan.n)
    m = perms.shape[0]
    logp = _log_sigma_star_pmf(plan)
    out = np.full((m, m), -np.inf)
    for s in range(m):
        z = index_of_permutations(perms[s][perms])
        out[s, z] = logp
    return out


def _worst_ratio(log_mat: np.ndarray, classes: list[np.ndarray]):
    """Largest ``log P(z|s) - log P(z|s')`` with ``s, s'`` in one class.

    Columns impossible for the whole class are skipped; one-sided zeros give
    ``inf``.  Returns ``(value, (row_hi, row_lo, column))``.
    """
    best, where = 0.0, None
    for labels in classes:
        ncls = labels.max() + 1
        hi = np.full((ncls, log_mat.shape[1]), -np.inf)
        lo = np.full((ncls, log_mat.shape[1]), np.inf)
        np.maximum.at(hi, labels, log_mat)
        np.minimum.at(lo, labels, log_mat)
        with np.errstate(invalid="ignore"):
            gap = np.where(np.isneginf(hi), 0.0, hi - lo)
        c, z = np.unravel_index(int(np.argmax(gap)), gap.shape)
        if gap[c, z] > best or where is None:
            members = np.flatnonzero(labels == c)
            col = log_mat[members, z]
            where = (int(members[np.argmax(col)]), int(members[np.argmin(col)]), int(z))
            best = max(best, float(gap[c, z]))
    return best, where


def _perm_text(perms: np.ndarray, idx: int) -> str:
    return " ".join(str(v + 1) for v in perms[idx])


def _merge_columns(log_mat: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Sum probabilities of output columns sharing a label (log-sum-exp)."""
    ncol = labels.max() + 1
    top = log_mat.max(axis=1, keepdims=True)
    safe_top = np.where(np.isneginf(top), 0.0, top)
    acc = np.zeros((log_mat.shape[0], ncol))
    np.add.at(acc.T, labels, np.exp(log_mat - safe_top).T)
    with np.errstate(divide="ignore"):
        return np.log(acc) + safe_top


def audit_dsigma(
    plan: ShufflePlan,
    postprocess: Callable[[tuple[int, ...]], object] | None = None,
) -> AuditReport:
    """Worst-case log-ratio between neighbouring inputs over every single output.

    ``postprocess`` maps an output sequence (a tuple of 0-based sentinels) to
    any hashable value; outputs with equal images are merged first.
    """
    _guard(plan.n, MAX_AUDIT_N, "d_sigma audit")
    perms = _perms(plan.n)
    log_mat = mechanism_log_matrix(plan)
    if postprocess is not None:
        images: dict[object, int] = {}
        labels = np.array([images.setdefault(postprocess(tuple(r.tolist())), len(images)) for r in perms])
        log_mat = _merge_columns(log_mat, labels)
    value, (hi, lo, z) = _worst_ratio(log_mat, _neighbor_classes(perms, plan.assignment))
    witness = {"sigma": _perm_text(perms, hi), "sigma_prime": _perm_text(perms, lo)}
    witness["output"] = _perm_text(perms, z) if postprocess is None else f"class {z}"
    return AuditReport(
        n=plan.n,
        alpha_claimed=plan.alpha,
        max_log_ratio_observed=value,
        witness=witness,
        neighbor_pairs_checked=count_neighboring_pairs(plan.assignment),
        passed=bool(value <= plan.alpha + TOLERANCE),
        kind="dsigma" if postprocess is None else "dsigma_postprocessed",
        notes=["rank distance counts item-pair inversions of the draw relative to sigma0"],
    )


def audit_composition(plan_a: ShufflePlan, plan_b: ShufflePlan) -> AuditReport:
    """Audit the joint release of two independent runs on the same input.

    Both plans must use the same grouping; composing across groupings has
    no stated bound and is refused.
    """
    if plan_a.n != plan_b.n:
        raise AuditError("plans cover different numbers of records")
    _guard(plan_a.n, MAX_COMPOSITION_N, "composition audit")
    if plan_a.assignment.as_sets() != plan_b.assignment.as_sets():
        raise AuditError("composition across different groupings is not supported")
    perms = _perms(plan_a.n)
    la, lb = mechanism_log_matrix(plan_a), mechanism_log_matrix(plan_b)
    joint = (la[:, :, None] + lb[:, None, :]).reshape(la.shape[0], -1)
    value, (hi, lo, col) = _worst_ratio(joint, _neighbor_classes(perms, plan_a.assignment))
    za, zb = divmod(col, lb.shape[1])
    claimed = plan_a.alpha + plan_b.alpha
    return AuditReport(
        n=plan_a.n,
        alpha_claimed=claimed,
        max_log_ratio_observed=value,
        witness={
            "sigma": _perm_text(perms, hi),
            "sigma_prime": _perm_text(perms, lo),
            "output": [_perm_text(perms, za), _perm_text(perms, zb)],
        },
        neighbor_pairs_checked=count_neighboring_pairs(plan_a.assignment),
        passed=bool(value <= claimed + TOLERANCE),
        kind="composition",
    )


def _binary_sequences(n: int) -> np.ndarray:
    """All ``2^n`` binary sequences, row ``r`` holding the bits of ``r`` (first index most significant)."""
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)


def _bits_index(seqs: np.ndarray) -> np.ndarray:
    n = seqs.shape[-1]
    return seqs @ (1 << np.arange(n - 1, -1, -1))


def audit_ldp_weak_dsigma(epsilon: float, g: GroupAssignment, k: int | None = None) -> AuditReport:
    """Check that unshuffled binary randomized response meets the ``k * epsilon`` bound.

    Inputs range over every binary sequence ``x`` and every ordering of it;
    ``k`` defaults to the largest group size and may not be smaller.
    """
    n = g.n
    _guard(n, MAX_SEMANTIC_N, "LDP ordering audit")
    biggest = int(g.sizes().max())
    k = biggest if k is None else int(k)
    if k < biggest:
        raise AuditError(f"k={k} is below the largest group size {biggest}")
    lc = log_channel_matrix(RandomizerConfig(epsilon, 2))
    perms = _perms(n)
    outputs = _binary_sequences(n)
    classes = _neighbor_classes(perms, g)
    best, witness = 0.0, None
    for x in _binary_sequences(n):
        inputs = x[perms]  # every reordering of x
        log_mat = lc[inputs[:, None, :], outputs[None, :, :]].sum(axis=2)
        value, (hi, lo, z) = _worst_ratio(log_mat, classes)
        if witness is None or value > best:
            best = value
            witness = {
                "x": "".join(map(str, x)),
                "sigma": _perm_text(perms, hi),
                "sigma_prime": _perm_text(perms, lo),
                "output": "".join(map(str, outputs[z])),
            }
    claimed = k * float(epsilon)
    return AuditReport(
        n=n,
        alpha_claimed=claimed,
        max_log_ratio_observed=best,
        witness=witness,
        neighbor_pairs_checked=count_neighboring_pairs(g),
        passed=bool(best <= claimed + TOLERANCE),
        kind="ldp_ordering",
    )


def _value_channel(plan: ShufflePlan) -> np.ndarray:
    """``P[y, z]`` for binary value sequences: probability that ``y`` is released as ``z``."""
    n = plan.n
    perms = _perms(n)
    pstar = np.exp(_log_sigma_star_pmf(plan))
    ys = _binary_sequences(n)
    out = np.zeros((ys.shape[0], ys.shape[0]))
    for r, y in enumerate(ys):
        np.add.at(out[r], _bits_index(y[perms]), pstar)
    return out


def audit_semantic(
    plan: ShufflePlan,
    prior,
    i: int | None = None,
    epsilon: float | None = None,
) -> AuditReport:
    """Largest change in the odds on ``x_i`` caused by seeing the release.

    The adversary already knows the bag of values inside ``G_i`` and every
    value outside it.  ``prior`` is a pmf over the ``2^n`` binary inputs
    ``x`` (index ``sum x_j 2^(n-1-j)``).  With ``epsilon`` each record goes
    through randomized response before shuffling; otherwise ``y = x``.
    ``i = None`` checks every owner.
    """
    n = plan.n
    _guard(n, MAX_SEMANTIC_N, "semantic audit")
    prior = np.asarray(prior, dtype=float).ravel()
    if prior.size != 2 ** n:
        raise AuditError(f"prior must have 2^n = {2 ** n} entries, got {prior.size}")
    if np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-9:
        raise AuditError("prior must be a normalized pmf")
    seqs = _binary_sequences(n)
    if epsilon is None:
        joint = np.diag(prior)
    else:
        lc = log_channel_matrix(RandomizerConfig(epsilon, 2))
        emit = np.exp(lc[seqs[:, None, :], seqs[None, :, :]].sum(axis=2))
        joint = prior[:, None] * emit  # joint[x, y]
    release = _value_channel(plan)
    owners = range(n) if i is None else [int(i)]
    best, witness = 0.0, None
    for owner in owners:
        members = plan.assignment.group(owner)
        outside = np.setdiff1d(np.arange(n), members)
        # conditioning event: bag of ones inside the group plus exact values outside
        key = seqs[:, members].sum(axis=1) * (2 ** outside.size) + (
            _bits_index(seqs[:, outside]) if outside.size else 0
        )
        weights = [joint[seqs[:, owner] == a].sum(axis=0) for a in (0, 1)]  # over y
        for event in np.unique(key):
            ys = key == event
            mass = [w[ys].sum() for w in weights]
            if min(mass) <= 0:
                continue
            cond = [w[ys] @ release[ys] / m for w, m in zip(weights, mass)]
            both = (cond[0] > 0) & (cond[1] > 0)
            one = (cond[0] > 0) ^ (cond[1] > 0)
            if one.any():
                gap, z = math.inf, int(np.flatnonzero(one)[0])
            elif both.any():
                ratios = np.where(both, np.abs(np.log(np.where(both, cond[0], 1) / np.where(both, cond[1], 1))), 0)
                z = int(np.argmax(ratios))
                gap = float(ratios[z])
            else:
                continue
            if witness is None or gap > best:
                best = gap
                witness = {
                    "owner": owner + 1,
                    "ones_in_group": int(seqs[ys][0, members].sum()),
                    "outside_values": "".join(map(str, seqs[ys][0, outside])),
                    "output": "".join(map(str, seqs[z])),
                }
    return AuditReport(
        n=n,
        alpha_claimed=plan.alpha,
        max_log_ratio_observed=best,
        witness=witness,
        neighbor_pairs_checked=0,
        passed=bool(best <= plan.alpha + TOLERANCE),
        kind="semantic",
        notes=["binary value domain only"],
    )


def product_prior(marginals) -> np.ndarray:
    """Independent-coordinates prior with ``P(x_j = 1) = marginals[j]``."""
    p = np.asarray(marginals, dtype=float)
    seqs = _binary_sequences(p.size)
    return np.prod(np.where(seqs == 1, p, 1 - p), axis=1)


def random_correlated_prior(n: int, rng: np.random.Generator, members=None, strength: float = 0.9) -> np.ndarray:
    """Prior with a shared latent bit copied into ``members`` with probability ``strength``.

    Coordinates outside ``members`` get independent random marginals; the
    result is mixed with a small Dirichlet perturbation so no two priors match.
    """
    members = list(range(n)) if members is None else list(members)
    seqs = _binary_sequences(n)
    latent_p = rng.uniform(0.2, 0.8)
    marg = rng.uniform(0.2, 0.8, size=n)
    probs = np.zeros(seqs.shape[0])
    for latent, pl in ((1, latent_p), (0, 1 - latent_p)):
        per = np.where(np.isin(np.arange(n), members), np.where(latent == 1, strength, 1 - strength), marg)
        probs += pl * np.prod(np.where(seqs == 1, per, 1 - per), axis=1)
    noise = rng.dirichlet(np.ones(seqs.shape[0]))
    out = 0.9 * probs + 0.1 * noise
    return out / out.sum()

