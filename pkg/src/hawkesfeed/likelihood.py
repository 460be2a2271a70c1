"""Cascade log-likelihood with closed-form compensator and exact gradient.

For one cascade the log-likelihood is the sum of log intensities of the
observed comments, each evaluated just before its own arrival, minus the
integral over the window of every population user's intensity.  Both
kernels are exponential, so the integral is closed form: a unit of
influence arriving at minute s and decaying at rate w contributes
(1 - exp(-w (T - s))) / w over a window ending at T.

Everything the weights multiply is precomputed once into flat arrays
(`CorpusTerms`), so each evaluation is a handful of matrix products.
The layout trades memory for speed: excitation rows are materialized per
(comment, earlier comment) pair, quadratic in cascade length.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .errors import EstimationError

Gradient = namedtuple(
    "Gradient",
    ["post_pair", "post_content", "comment_pair", "comment_content"],
)


@dataclass(eq=False)
class CorpusTerms:
    """Weight-independent constants of the likelihood over a fixed corpus."""

    n_events: int
    # one row per observed comment
    event_pair: np.ndarray          # features of (commenter, post publisher)
    event_post_content: np.ndarray  # the owning post's content, repeated
    event_post_decay: np.ndarray    # exp(-post_rate * t_i)
    # one row per (comment i, earlier comment j) pair
    prior_pair: np.ndarray          # features of (commenter i, commenter j)
    prior_content: np.ndarray       # content of comment j
    prior_decay: np.ndarray         # exp(-comment_rate * (t_i - t_j))
    prior_owner: np.ndarray         # index of comment i in the event arrays
    # compensator coefficients: integral = c . weights, summed over cascades
    comp_post_pair: np.ndarray
    comp_post_content: np.ndarray
    comp_comment_pair: np.ndarray
    comp_comment_content: np.ndarray


def build_corpus_terms(cascades, store, users, post_decay_rate, comment_decay_rate):
    kp = store.pair_dim
    kd = store.content_dim
    n_users = len(users)
    pair_cache = {}

    def pair(u, p):
        v = pair_cache.get((u, p))
        if v is None:
            v = pair_cache[(u, p)] = store.pair_vector(u, p)
        return v

    pop_cache = {}

    def population_sum(p):
        v = pop_cache.get(p)
        if v is None:
            v = pop_cache[p] = sum((pair(u, p) for u in users), np.zeros(kp))
        return v

    event_pair, event_post_content, event_post_decay = [], [], []
    prior_pair, prior_content, prior_decay, prior_owner = [], [], [], []
    cpp = np.zeros(kp)
    cpc = np.zeros(kd)
    ccp = np.zeros(kp)
    ccc = np.zeros(kd)
    n_events = 0

    for cascade in cascades:
        p0 = cascade.post.publisher
        d0 = store.event_content(cascade.cascade_id, 0, cascade.post)
        big_t = cascade.window_end
        g_post = (1.0 - np.exp(-post_decay_rate * big_t)) / post_decay_rate
        cpp += population_sum(p0) * g_post
        cpc += n_users * g_post * d0
        times = np.array([c.time for c in cascade.comments])
        contents = [
            store.event_content(cascade.cascade_id, i + 1, c)
            for i, c in enumerate(cascade.comments)
        ]
        for i, ci in enumerate(cascade.comments):
            event_pair.append(pair(ci.publisher, p0))
            event_post_content.append(d0)
            event_post_decay.append(np.exp(-post_decay_rate * ci.time))
            for j in range(i):
                prior_pair.append(pair(ci.publisher, cascade.comments[j].publisher))
                prior_content.append(contents[j])
                prior_decay.append(
                    np.exp(-comment_decay_rate * (ci.time - times[j]))
                )
                prior_owner.append(n_events)
            n_events += 1
        if len(cascade.comments):
            g_comment = (1.0 - np.exp(-comment_decay_rate * (big_t - times))) / comment_decay_rate
            ccp += sum(
                population_sum(c.publisher) * g
                for c, g in zip(cascade.comments, g_comment)
            )
            ccc += n_users * (np.vstack(contents).T @ g_comment)

    def stack(rows, width):
        return np.vstack(rows) if rows else np.zeros((0, width))

    return CorpusTerms(
        n_events=n_events,
        event_pair=stack(event_pair, kp),
        event_post_content=stack(event_post_content, kd),
        event_post_decay=np.asarray(event_post_decay, dtype=float),
        prior_pair=stack(prior_pair, kp),
        prior_content=stack(prior_content, kd),
        prior_decay=np.asarray(prior_decay, dtype=float),
        prior_owner=np.asarray(prior_owner, dtype=np.int64),
        comp_post_pair=cpp,
        comp_post_content=cpc,
        comp_comment_pair=ccp,
        comp_comment_content=ccc,
    )


def terms_event_intensities(terms, params):
    """Intensity of each observed comment just before its own arrival."""
    lam = terms.event_post_decay * (
        terms.event_pair @ params.post_pair_weights
        + terms.event_post_content @ params.post_content_weights
    )
    if terms.prior_owner.size:
        excite = terms.prior_decay * (
            terms.prior_pair @ params.comment_pair_weights
            + terms.prior_content @ params.comment_content_weights
        )
        lam = lam + np.bincount(
            terms.prior_owner, weights=excite, minlength=terms.n_events
        )
    return lam


def terms_compensator(terms, params):
    """Integral of the whole population's intensity over every window."""
    return float(
        terms.comp_post_pair @ params.post_pair_weights
        + terms.comp_post_content @ params.post_content_weights
        + terms.comp_comment_pair @ params.comment_pair_weights
        + terms.comp_comment_content @ params.comment_content_weights
    )


def terms_value_and_grad(terms, params, floor=None, want_grad=True):
    """Log-likelihood and optionally its gradient in the four weight blocks.

    With `floor` set, intensities below it are clamped inside the log and
    their event terms drop out of the gradient; this is the optimizer's
    safeguard, never a reported value.  Without it a nonpositive event
    intensity yields -inf (and no gradient).
    """
    lam = terms_event_intensities(terms, params)
    comp = terms_compensator(terms, params)
    if floor is None:
        if lam.size and lam.min() <= 0.0:
            return -np.inf, None
        safe = lam
        live = None
    else:
        safe = np.maximum(lam, floor)
        live = lam >= floor
    value = float(np.log(safe).sum() - comp) if lam.size else -comp
    if not want_grad:
        return value, None
    coef = 1.0 / safe
    if live is not None:
        coef = np.where(live, coef, 0.0)
    wt = terms.event_post_decay * coef
    g_pp = terms.event_pair.T @ wt - terms.comp_post_pair
    g_pc = terms.event_post_content.T @ wt - terms.comp_post_content
    if terms.prior_owner.size:
        wr = terms.prior_decay * coef[terms.prior_owner]
        g_cp = terms.prior_pair.T @ wr - terms.comp_comment_pair
        g_cc = terms.prior_content.T @ wr - terms.comp_comment_content
    else:
        g_cp = -terms.comp_comment_pair
        g_cc = -terms.comp_comment_content
    return value, Gradient(g_pp, g_pc, g_cp, g_cc)


def cascade_log_likelihood(cascade, params, store, users):
    """Exact log-likelihood of one cascade under the given weights.

    -inf when some observed comment has zero intensity, which happens
    whenever the weights give that comment no support.
    """
    terms = build_corpus_terms(
        [cascade], store, users, params.post_decay_rate, params.comment_decay_rate
    )
    value, _ = terms_value_and_grad(terms, params, want_grad=False)
    return value


def corpus_log_likelihood(cascades, params, store, users):
    terms = build_corpus_terms(
        cascades, store, users, params.post_decay_rate, params.comment_decay_rate
    )
    value, _ = terms_value_and_grad(terms, params, want_grad=False)
    return value


def gradient(cascades, params, store, users):
    """Exact gradient of the summed log-likelihood in the four weight blocks."""
    terms = build_corpus_terms(
        cascades, store, users, params.post_decay_rate, params.comment_decay_rate
    )
    value, grad = terms_value_and_grad(terms, params)
    if grad is None:
        raise EstimationError(
            "log-likelihood is -inf at these weights: some observed comment "
            "has zero intensity"
        )
    return grad


def penalty_weights(penalty):
    """Broadcast a scalar or 4-sequence penalty to the four weight blocks."""
    arr = np.asarray(penalty, dtype=float)
    if arr.ndim == 0:
        arr = np.full(4, float(arr))
    if arr.shape != (4,):
        raise ValueError("penalty must be a scalar or one value per weight block")
    if arr.min() < 0:
        raise ValueError("penalty weights must be nonnegative")
    return arr


def objective(cascades, params, store, users, penalty=0.0):
    """Penalized negative log-likelihood: -sum of cascade log-likelihoods
    plus a per-block weighted l1 norm of the (nonnegative) weights."""
    z = penalty_weights(penalty)
    value = corpus_log_likelihood(cascades, params, store, users)
    reg = (
        z[0] * params.post_pair_weights.sum()
        + z[1] * params.post_content_weights.sum()
        + z[2] * params.comment_pair_weights.sum()
        + z[3] * params.comment_content_weights.sum()
    )
    return -value + float(reg)
