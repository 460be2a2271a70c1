"""Penalized maximum-likelihood weights by projected gradient descent.

The objective is the negative log-likelihood plus a per-block weighted l1
penalty.  On the nonnegative orthant the penalty is linear, so the whole
objective is smooth wherever it is finite and convex, and the only
constraint is a coordinate clamp at zero.  Steps are accepted against the
local quadratic model, which keeps the objective trace monotone; the
clamp makes exact zeros reachable, so large penalties produce genuinely
sparse solutions.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ModelParams
from .errors import EstimationError
from .likelihood import (
    build_corpus_terms,
    corpus_log_likelihood,
    penalty_weights,
    terms_value_and_grad,
)

_WeightBlocks = namedtuple(
    "_WeightBlocks",
    ["post_pair_weights", "post_content_weights",
     "comment_pair_weights", "comment_content_weights"],
)

DEFAULT_PENALTY_GRID = (0.0, 0.01, 0.1, 1.0, 10.0)


@dataclass
class FitConfig:
    penalty: float | tuple = 0.0
    penalty_grid: tuple = DEFAULT_PENALTY_GRID
    post_decay_rate: float = 0.001
    comment_decay_rate: float = 0.01
    max_iterations: int = 500
    tolerance: float = 1e-9          # relative objective decrease
    initial_weight: float = 0.01
    initial_step: float = 1.0
    step_shrink: float = 0.5
    step_grow: float = 2.0
    max_step: float = 1e8
    intensity_floor: float = 1e-12   # clamp inside log during line search only
    cv_folds: int = 5
    pair_mask: np.ndarray | None = None
    content_mask: np.ndarray | None = None

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must be in (0, 1)")
        if self.step_grow < 1:
            raise ValueError("step_grow must be >= 1")
        if self.initial_weight <= 0:
            raise ValueError("initial_weight must be positive")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")


@dataclass
class FitResult:
    params: ModelParams
    objective_trace: list[float]
    iterations: int
    converged: bool
    final_objective: float
    log_likelihood: float
    penalty: tuple


class _Splitter:
    """Flat vector <-> four weight blocks."""

    def __init__(self, pair_dim, content_dim):
        self.cuts = np.cumsum([pair_dim, content_dim, pair_dim, content_dim])[:-1]
        self.size = 2 * (pair_dim + content_dim)

    def blocks(self, theta):
        return _WeightBlocks(*np.split(theta, self.cuts))

    def flat(self, grad):
        return np.concatenate(grad)


def projected_gradient_norm(theta, grad, mask=None):
    """Norm of the feasible-direction gradient: full where theta > 0, only
    the negative part on the boundary."""
    r = np.where(theta > 0, grad, np.minimum(grad, 0.0))
    if mask is not None:
        r = np.where(mask, r, 0.0)
    return float(np.linalg.norm(r))


def _full_mask(config, pair_dim, content_dim):
    pair = (
        np.ones(pair_dim, bool)
        if config.pair_mask is None
        else np.asarray(config.pair_mask, bool)
    )
    content = (
        np.ones(content_dim, bool)
        if config.content_mask is None
        else np.asarray(config.content_mask, bool)
    )
    if pair.shape != (pair_dim,) or content.shape != (content_dim,):
        raise EstimationError("feature masks do not match the store manifests")
    return np.concatenate([pair, content, pair, content])


def fit(cascades, store, users, config=None, on_iterate=None):
    """Estimate the four weight vectors on a training corpus.

    `users` is the population whose combined non-response the compensator
    charges; it must cover every commenter in `cascades`.  Returns a
    FitResult whose trace is monotone non-increasing.
    """
    config = config or FitConfig()
    if not any(c.comments for c in cascades):
        raise EstimationError("training corpus has no comments, nothing to fit")
    if not users:
        raise EstimationError("population is empty")
    kp, kd = store.pair_dim, store.content_dim
    split = _Splitter(kp, kd)
    mask = _full_mask(config, kp, kd)
    z = penalty_weights(config.penalty)
    z_flat = np.concatenate([
        np.full(kp, z[0]), np.full(kd, z[1]), np.full(kp, z[2]), np.full(kd, z[3]),
    ])
    terms = build_corpus_terms(
        cascades, store, users, config.post_decay_rate, config.comment_decay_rate
    )
    floor = config.intensity_floor

    def value_and_grad(theta):
        value, grad = terms_value_and_grad(terms, split.blocks(theta), floor=floor)
        return -value + float(z_flat @ theta), z_flat - split.flat(grad)

    def value(theta):
        v, _ = terms_value_and_grad(
            terms, split.blocks(theta), floor=floor, want_grad=False
        )
        return -v + float(z_flat @ theta)

    theta = np.where(mask, config.initial_weight, 0.0)
    check, _ = terms_value_and_grad(terms, split.blocks(theta), want_grad=False)
    if not np.isfinite(check):
        raise EstimationError(
            "objective is not finite at the starting point: some comment has "
            "no feature support under this mask"
        )

    f, g = value_and_grad(theta)
    trace = [f]
    step = config.initial_step
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        accepted = False
        while step > 1e-18:
            cand = np.maximum(theta - step * g, 0.0)
            cand[~mask] = 0.0
            fc = value(cand)
            delta = cand - theta
            model = f + g @ delta + (delta @ delta) / (2.0 * step)
            if fc <= model + 1e-12 * max(1.0, abs(f)):
                accepted = True
                break
            step *= config.step_shrink
        if not accepted:
            break
        theta = cand
        f_prev, f = f, fc
        trace.append(f)
        if on_iterate is not None:
            on_iterate(theta.copy())
        g = value_and_grad(theta)[1]
        if (f_prev - f) <= config.tolerance * max(1.0, abs(f_prev)):
            converged = True
            break
        step = min(step * config.step_grow, config.max_step)

    blocks = split.blocks(theta)
    params = ModelParams(
        post_pair_weights=blocks.post_pair_weights,
        post_content_weights=blocks.post_content_weights,
        comment_pair_weights=blocks.comment_pair_weights,
        comment_content_weights=blocks.comment_content_weights,
        post_decay_rate=config.post_decay_rate,
        comment_decay_rate=config.comment_decay_rate,
        pair_feature_names=list(store.pair_names),
        content_feature_names=list(store.content_names),
    )
    loglik, _ = terms_value_and_grad(terms, blocks, want_grad=False)
    return FitResult(
        params=params,
        objective_trace=trace,
        iterations=it,
        converged=converged,
        final_objective=f,
        log_likelihood=loglik,
        penalty=tuple(z),
    )


@dataclass
class CVResult:
    best_penalty: float | tuple
    table: list[dict] = field(default_factory=list)


def _penalty_sort_key(z):
    return float(np.sum(penalty_weights(z)))


def cross_validate(cascades, store, users, config=None):
    """Pick the l1 penalty by forward-chained temporal folds.

    Cascades are ordered by initiation and cut into contiguous blocks;
    each block is held out once and scored by its exact (unclamped)
    log-likelihood under the weights fitted on the remaining blocks.
    Ties prefer the larger penalty.
    """
    config = config or FitConfig()
    ordered = sorted(cascades, key=lambda c: (c.origin, c.cascade_id))
    if len(ordered) < config.cv_folds:
        raise EstimationError(
            f"{len(ordered)} cascades cannot fill {config.cv_folds} folds"
        )
    folds = [list(f) for f in np.array_split(np.array(ordered, dtype=object), config.cv_folds)]
    table = []
    for z in config.penalty_grid:
        held = []
        for k, fold in enumerate(folds):
            train = [c for j, f in enumerate(folds) if j != k for c in f]
            result = fit(train, store, users, replace(config, penalty=z))
            held.append(corpus_log_likelihood(fold, result.params, store, users))
        table.append({
            "penalty": z,
            "fold_log_likelihoods": held,
            "mean_log_likelihood": float(np.mean(held)),
        })
    best = max(
        table,
        key=lambda row: (row["mean_log_likelihood"], _penalty_sort_key(row["penalty"])),
    )
    return CVResult(best_penalty=best["penalty"], table=table)
