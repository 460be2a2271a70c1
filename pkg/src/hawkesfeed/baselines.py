"""Reference rankers: recency, nearest profile, proportional rates, and a
featureless pairwise excitation model.

All rankers produce a total order over whichever candidate cascades they
are handed; ties are broken by most-recent event time (newest first) and
then cascade id, the same policy the main model uses.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EstimationError

ACTIVITY_HORIZON = 720.0  # minutes; a cascade is active this long after its last event


def _recency_key(cascade, t):
    last = cascade.last_event_global(before=t)
    return -np.inf if last is None else last


def order_candidates(cascades, scores, t):
    """Descending score, ties by recency before t descending, then id."""
    rows = sorted(
        zip(cascades, scores),
        key=lambda cs: (-cs[1], -_recency_key(cs[0], t), cs[0].cascade_id),
    )
    return [c for c, _ in rows]


def rank_rchr(cascades, t):
    """Most recently active first, among events strictly before t."""
    return order_candidates(cascades, [_recency_key(c, t) for c in cascades], t)


# ---------------------------------------------------------------- nearest profile

EWMA_SMOOTHING = 0.3


def update_profile(profile, vector, smoothing=EWMA_SMOOTHING):
    """One moving-average step; the newest observation carries `smoothing`."""
    if profile is None:
        return np.asarray(vector, dtype=float).copy()
    return (1.0 - smoothing) * profile + smoothing * np.asarray(vector, dtype=float)


def cascade_representative(cascade, t, store, user=None, with_pairs=False):
    """Mean content of the cascade's events strictly before relative time
    t - origin; optionally prefixed with the (user, post publisher) pair
    vector for the all-features variant."""
    local_t = t - cascade.origin
    vectors = [
        store.event_content(cascade.cascade_id, idx, e)
        for idx, e in enumerate(cascade.events)
        if e.time < local_t
    ]
    content = (
        np.mean(vectors, axis=0) if vectors else np.zeros(store.content_dim)
    )
    if not with_pairs:
        return content
    return np.concatenate([store.pair_vector(user, cascade.post.publisher), content])


def rank_nn(user, cascades, t, store, profile, with_pairs=False):
    """Ascending distance between the user's comment profile and each
    cascade representative; falls back to recency when no profile exists."""
    if profile is None:
        return rank_rchr(cascades, t)
    scores = []
    for c in cascades:
        rep = cascade_representative(c, t, store, user=user, with_pairs=with_pairs)
        scores.append(-float(np.linalg.norm(profile - rep)))
    return order_candidates(cascades, scores, t)


# ------------------------------------------------------- proportional rates (Cox)

WEIGHT_CAP = 20.0


@dataclass(eq=False)
class CoxParams:
    weights: np.ndarray
    feature_names: list[str]
    feature_indices: np.ndarray  # columns of the store content manifest in use


def cox_covariate(cascade, t, store, feature_indices):
    """Content of the cascade's most recent event strictly before t."""
    local_t = t - cascade.origin
    latest = None
    for idx, e in enumerate(cascade.events):
        if e.time >= local_t:
            break
        latest = (idx, e)
    if latest is None:
        return np.zeros(len(feature_indices))
    idx, e = latest
    return store.event_content(cascade.cascade_id, idx, e)[feature_indices]


def _cox_design(cascades, store, feature_indices, activity_horizon):
    """Per observed comment: covariate rows of its risk set and the target row.

    The risk set holds cascades initiated before the comment and active
    (last event within the horizon); the comment's own cascade is always
    included so every term is well defined.
    """
    steps = []
    for c in cascades:
        for e in c.comments:
            steps.append((c.origin + e.time, c.cascade_id, c))
    steps.sort(key=lambda s: (s[0], s[1]))
    design = []
    for t, target_id, target in steps:
        rows = []
        target_row = None
        for c in cascades:
            if c.cascade_id == target_id:
                in_risk = True
            else:
                last = c.last_event_global(before=t)
                in_risk = (
                    c.origin < t and last is not None and t - last <= activity_horizon
                )
            if in_risk:
                if c.cascade_id == target_id:
                    target_row = len(rows)
                rows.append(cox_covariate(c, t, store, feature_indices))
        design.append((np.vstack(rows), target_row))
    return design


def cox_partial_log_likelihood(weights, design):
    value = 0.0
    for rows, target in design:
        scores = rows @ weights
        m = scores.max()
        value += scores[target] - (m + np.log(np.exp(scores - m).sum()))
    return float(value)


def _cox_gradient(weights, design):
    grad = np.zeros_like(weights)
    for rows, target in design:
        scores = rows @ weights
        scores -= scores.max()
        p = np.exp(scores)
        p /= p.sum()
        grad += rows[target] - p @ rows
    return grad


def fit_cox(cascades, store, feature_indices=None, max_iterations=500,
            tolerance=1e-10, weight_cap=WEIGHT_CAP,
            activity_horizon=ACTIVITY_HORIZON):
    """Maximize the partial likelihood by gradient ascent with backtracking.

    The partial likelihood is concave; separation would push weights to
    infinity, so coordinates are capped at +-weight_cap with a warning.
    """
    if feature_indices is None:
        feature_indices = np.arange(store.content_dim)
    feature_indices = np.asarray(feature_indices, dtype=int)
    if feature_indices.size == 0:
        raise EstimationError("no content features selected")
    design = _cox_design(cascades, store, feature_indices, activity_horizon)
    if not design:
        raise EstimationError("training corpus has no comments, nothing to fit")
    if all(rows.shape[0] == 1 for rows, _ in design):
        raise EstimationError(
            "every risk set is a single cascade; the weights are unidentifiable"
        )
    w = np.zeros(feature_indices.size)
    f = cox_partial_log_likelihood(w, design)
    step = 1.0
    for _ in range(max_iterations):
        g = _cox_gradient(w, design)
        improved = False
        while step > 1e-18:
            cand = np.clip(w + step * g, -weight_cap, weight_cap)
            fc = cox_partial_log_likelihood(cand, design)
            if fc >= f + 1e-12:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        w, f = cand, fc
        step = min(step * 2.0, 1e6)
    if np.any(np.abs(w) >= weight_cap - 1e-9):
        warnings.warn(
            "proportional-rates weights hit the cap; the data separate the "
            "commented cascades perfectly",
            stacklevel=2,
        )
    names = [store.content_names[i] for i in feature_indices]
    return CoxParams(weights=w, feature_names=names, feature_indices=feature_indices)


def rank_cox(params, cascades, t, store):
    """Descending linear score of the freshest content; user-independent."""
    scores = [
        float(params.weights @ cox_covariate(c, t, store, params.feature_indices))
        for c in cascades
    ]
    return order_candidates(cascades, scores, t)


# ------------------------------------------- featureless pairwise excitation (EM)


@dataclass(eq=False)
class PairwiseHawkesParams:
    """Direct per-pair rates: post_rates[(user, poster)] scales the post
    kernel, comment_rates[(user, commenter)] the comment kernel."""

    post_rates: dict
    comment_rates: dict
    post_decay_rate: float = 0.001
    comment_decay_rate: float = 0.01


@dataclass
class EMResult:
    params: PairwiseHawkesParams
    log_likelihood_trace: list[float]
    iterations: int
    converged: bool


def hwk_intensity(params, user, cascade, local_t):
    """Pairwise-rate intensity at relative minute local_t, events before it."""
    lam = params.post_rates.get((user, cascade.post.publisher), 0.0) * np.exp(
        -params.post_decay_rate * local_t
    )
    for e in cascade.comments:
        if e.time >= local_t:
            break
        lam += params.comment_rates.get((user, e.publisher), 0.0) * np.exp(
            -params.comment_decay_rate * (local_t - e.time)
        )
    return float(lam)


def hwk_log_likelihood(cascades, params):
    """Full log-likelihood; the population is every user holding a rate."""
    post_col = {}
    for (u, p), v in params.post_rates.items():
        post_col[p] = post_col.get(p, 0.0) + v
    comment_col = {}
    for (u, p), v in params.comment_rates.items():
        comment_col[p] = comment_col.get(p, 0.0) + v
    value = 0.0
    pd, cd = params.post_decay_rate, params.comment_decay_rate
    for c in cascades:
        g_post = (1.0 - np.exp(-pd * c.window_end)) / pd
        value -= post_col.get(c.post.publisher, 0.0) * g_post
        for e in c.comments:
            lam = hwk_intensity(params, e.publisher, c, e.time)
            value += -np.inf if lam <= 0 else np.log(lam)
            g_comment = (1.0 - np.exp(-cd * (c.window_end - e.time))) / cd
            value -= comment_col.get(e.publisher, 0.0) * g_comment
    return float(value)


def fit_hwk_em(cascades, post_decay_rate=0.001, comment_decay_rate=0.01,
               max_iterations=200, tolerance=1e-8, initial_rate=0.1):
    """Expectation-maximization over latent parent assignments.

    Each comment's parent is either its cascade's post or an earlier
    comment; responsibilities are proportional to the decayed rate of each
    candidate.  Rates update as expected counts over integrated exposure,
    so the trace is monotone.  Stops when the log-likelihood moves less
    than `tolerance`.
    """
    if not any(c.comments for c in cascades):
        raise EstimationError("training corpus has no comments, nothing to fit")
    pd, cd = post_decay_rate, comment_decay_rate
    # exposure denominators are fixed by the data
    post_exposure = {}   # poster -> sum of post-kernel integrals of their cascades
    comment_exposure = {}  # commenter -> sum of comment-kernel integrals of their comments
    post_pairs = set()
    comment_pairs = set()
    for c in cascades:
        g_post = (1.0 - np.exp(-pd * c.window_end)) / pd
        post_exposure[c.post.publisher] = (
            post_exposure.get(c.post.publisher, 0.0) + g_post
        )
        seen = []
        for e in c.comments:
            post_pairs.add((e.publisher, c.post.publisher))
            for s in seen:
                comment_pairs.add((e.publisher, s))
            g_comment = (1.0 - np.exp(-cd * (c.window_end - e.time))) / cd
            comment_exposure[e.publisher] = (
                comment_exposure.get(e.publisher, 0.0) + g_comment
            )
            seen.append(e.publisher)
    params = PairwiseHawkesParams(
        post_rates={k: initial_rate for k in post_pairs},
        comment_rates={k: initial_rate for k in comment_pairs},
        post_decay_rate=pd,
        comment_decay_rate=cd,
    )
    trace = [hwk_log_likelihood(cascades, params)]
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        post_num = {}
        comment_num = {}
        for c in cascades:
            poster = c.post.publisher
            for i, e in enumerate(c.comments):
                phi0 = params.post_rates.get((e.publisher, poster), 0.0) * np.exp(
                    -pd * e.time
                )
                phi = [
                    params.comment_rates.get((e.publisher, prior.publisher), 0.0)
                    * np.exp(-cd * (e.time - prior.time))
                    for prior in c.comments[:i]
                ]
                norm = phi0 + sum(phi)
                if norm <= 0:
                    raise EstimationError(
                        f"comment by {e.publisher} in cascade {c.cascade_id} has "
                        "no possible parent under the current rates"
                    )
                key = (e.publisher, poster)
                post_num[key] = post_num.get(key, 0.0) + phi0 / norm
                for prior, ph in zip(c.comments[:i], phi):
                    k2 = (e.publisher, prior.publisher)
                    comment_num[k2] = comment_num.get(k2, 0.0) + ph / norm
        params = PairwiseHawkesParams(
            post_rates={
                k: post_num.get(k, 0.0) / post_exposure[k[1]] for k in post_pairs
            },
            comment_rates={
                k: comment_num.get(k, 0.0) / comment_exposure[k[1]]
                for k in comment_pairs
            },
            post_decay_rate=pd,
            comment_decay_rate=cd,
        )
        trace.append(hwk_log_likelihood(cascades, params))
        if abs(trace[-1] - trace[-2]) < tolerance:
            converged = True
            break
    return EMResult(
        params=params,
        log_likelihood_trace=trace,
        iterations=it,
        converged=converged,
    )


def rank_hwk(params, user, cascades, t):
    """Descending pairwise-rate intensity at wall-clock minute t."""
    scores = [
        hwk_intensity(params, user, c, t - c.origin) for c in cascades
    ]
    return order_candidates(cascades, scores, t)
