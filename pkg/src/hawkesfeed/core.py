"""Domain types and the two-term exponential-decay intensity.

A cascade is one post plus the comments it received, timed in minutes
relative to the post.  The rate at which a user adds a comment to a
cascade is the sum of a slowly decaying post term (how attractive the
post itself is to that user) and a fast decaying comment term (how much
every earlier comment excites that user).  Both terms are nonnegative
weighted sums of features, so the whole intensity is linear in the
weight vectors.

Intensities can be evaluated from scratch at any time, or carried
incrementally in an `IntensityState` whose two components decay at
their own rates; the two routes agree to floating-point accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

# Minutes added to the later of two exactly tied event times at ingestion.
TIE_SHIFT = 1e-6


def _feature_vector(values):
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise ValueError("feature vector must be one-dimensional")
    return v


@dataclass(eq=False)
class Event:
    """One timestamped action: the post opening a cascade, or a comment.

    `time` is minutes since the cascade origin.  `content_features` may be
    empty when the event carries no usable content; lookups then fall back
    to a zero vector.  `text` is kept only as raw material for feature
    extraction and plays no role in the model itself.
    """

    time: float
    publisher: str
    content_features: np.ndarray = field(default_factory=lambda: np.zeros(0))
    text: str | None = None

    def __post_init__(self):
        self.time = float(self.time)
        self.content_features = _feature_vector(self.content_features)
        if not math.isfinite(self.time) or self.time < 0:
            raise ValueError(f"event time must be finite and >= 0, got {self.time}")
        cf = self.content_features
        if cf.size and (cf.min() < 0.0 or cf.max() > 1.0):
            raise ValueError("content features must lie in [0, 1]; normalize first")


@dataclass(eq=False)
class Cascade:
    """One post and its strictly time-ordered comments in a window [0, window_end).

    `origin` is the wall-clock minute at which the post appeared.  It is
    bookkeeping for cross-cascade work (candidate sets, recency ranking)
    and never enters within-cascade math, which stays on the relative axis.
    """

    cascade_id: str
    post: Event
    comments: list[Event]
    window_end: float
    group_id: str = "default"
    origin: float = 0.0
    truncated: bool = False

    def __post_init__(self):
        if self.post.time != 0.0:
            raise ValueError(f"cascade {self.cascade_id}: post must sit at time 0")
        if not self.window_end > 0:
            raise ValueError(f"cascade {self.cascade_id}: window_end must be positive")
        prev = 0.0
        for c in self.comments:
            if c.time <= prev:
                raise ValueError(
                    f"cascade {self.cascade_id}: comment times must be strictly "
                    f"increasing and after the post (got {c.time} after {prev})"
                )
            if c.time >= self.window_end:
                raise ValueError(
                    f"cascade {self.cascade_id}: comment at {c.time} outside the "
                    f"window [0, {self.window_end})"
                )
            prev = c.time

    @property
    def events(self):
        return [self.post, *self.comments]

    def participants(self):
        return {e.publisher for e in self.events}

    def last_event_global(self, before=None):
        """Wall-clock minute of the latest event, optionally strictly before `before`.

        Returns None when no event qualifies.
        """
        last = None
        for e in self.events:
            t = self.origin + e.time
            if before is not None and t >= before:
                break
            last = t
        return last


def separate_ties(times):
    """Shift exact duplicates forward by TIE_SHIFT so the sequence strictly increases.

    Input must already be sorted ascending; only tied (or tie-shifted)
    entries move, everything else is returned untouched.
    """
    out = []
    prev = None
    for t in times:
        t = float(t)
        if prev is not None and t <= prev:
            t = prev + TIE_SHIFT
        out.append(t)
        prev = t
    return out


def corpus_participants(cascades):
    users = set()
    for c in cascades:
        users |= c.participants()
    return sorted(users)


@dataclass(eq=False)
class ModelParams:
    """Nonnegative feature weights plus the two per-minute decay rates.

    The `*_pair_weights` act on publisher-user feature vectors, the
    `*_content_weights` on event-content vectors.  `post_*` shapes the
    initial attraction of a post, `comment_*` the excitation added by
    each comment.  Manifests name the coordinates; lengths must agree.
    """

    post_pair_weights: np.ndarray
    post_content_weights: np.ndarray
    comment_pair_weights: np.ndarray
    comment_content_weights: np.ndarray
    post_decay_rate: float = 0.001
    comment_decay_rate: float = 0.01
    pair_feature_names: list[str] = field(default_factory=list)
    content_feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.post_pair_weights = _feature_vector(self.post_pair_weights)
        self.post_content_weights = _feature_vector(self.post_content_weights)
        self.comment_pair_weights = _feature_vector(self.comment_pair_weights)
        self.comment_content_weights = _feature_vector(self.comment_content_weights)
        if self.post_pair_weights.size != self.comment_pair_weights.size:
            raise ConfigError("post and comment pair weight vectors differ in length")
        if self.post_content_weights.size != self.comment_content_weights.size:
            raise ConfigError("post and comment content weight vectors differ in length")
        for name in ("post_pair_weights", "post_content_weights",
                     "comment_pair_weights", "comment_content_weights"):
            w = getattr(self, name)
            if w.size and w.min() < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not (self.post_decay_rate > 0 and self.comment_decay_rate > 0):
            raise ConfigError("decay rates must be positive")
        if not self.pair_feature_names:
            self.pair_feature_names = [f"pair_{i}" for i in range(self.post_pair_weights.size)]
        if not self.content_feature_names:
            self.content_feature_names = [f"content_{i}" for i in range(self.post_content_weights.size)]
        if len(self.pair_feature_names) != self.post_pair_weights.size:
            raise ConfigError("pair manifest length does not match pair weight length")
        if len(self.content_feature_names) != self.post_content_weights.size:
            raise ConfigError("content manifest length does not match content weight length")

    @property
    def pair_dim(self):
        return self.post_pair_weights.size

    @property
    def content_dim(self):
        return self.post_content_weights.size

    def scaled(self, c):
        """All four weight vectors multiplied by c; decay rates untouched."""
        return replace(
            self,
            post_pair_weights=c * self.post_pair_weights,
            post_content_weights=c * self.post_content_weights,
            comment_pair_weights=c * self.comment_pair_weights,
            comment_content_weights=c * self.comment_content_weights,
        )


def event_content(event, dim):
    """Content vector of an event, or zeros when it carries none."""
    cf = event.content_features
    if cf.size == 0:
        return np.zeros(dim)
    if cf.size != dim:
        raise ConfigError(
            f"event content has {cf.size} features, model expects {dim}"
        )
    return cf


def post_influence(user, post, params, store):
    """Initial rate the post contributes to `user`, before any decay."""
    pair = store.pair_vector(user, post.publisher)
    if pair.size != params.pair_dim:
        raise ConfigError(
            f"store pair vectors have {pair.size} features, model expects {params.pair_dim}"
        )
    content = event_content(post, params.content_dim)
    return float(params.post_pair_weights @ pair + params.post_content_weights @ content)


def comment_influence(user, comment, params, store):
    """Jump the comment adds to `user`'s rate at the moment it arrives."""
    pair = store.pair_vector(user, comment.publisher)
    if pair.size != params.pair_dim:
        raise ConfigError(
            f"store pair vectors have {pair.size} features, model expects {params.pair_dim}"
        )
    content = event_content(comment, params.content_dim)
    return float(params.comment_pair_weights @ pair + params.comment_content_weights @ content)


def intensity(user, cascade, t, params, store):
    """Rate of `user` commenting on `cascade` at relative minute t.

    Only events strictly before t contribute, so the value at an event's
    own timestamp excludes that event's jump.
    """
    if t < 0:
        raise ValueError(f"intensity queried at negative time {t}")
    lam = post_influence(user, cascade.post, params, store) * math.exp(
        -params.post_decay_rate * t
    )
    for c in cascade.comments:
        if c.time >= t:
            break
        lam += comment_influence(user, c, params, store) * math.exp(
            -params.comment_decay_rate * (t - c.time)
        )
    return lam


@dataclass
class IntensityState:
    """Decomposed intensity for one (user, cascade) pair.

    `post_term` and `comment_term` decay at their own rates between
    events; their sum is the intensity at `last_update_time`.  Single
    writer per pair: updates are O(1) and never rewind.
    """

    user: str
    cascade_id: str
    post_term: float
    comment_term: float
    last_update_time: float

    @property
    def intensity(self):
        return self.post_term + self.comment_term


def new_state(user, cascade, params, store):
    """State at the moment the post appears (relative time 0)."""
    mu = post_influence(user, cascade.post, params, store)
    return IntensityState(user, cascade.cascade_id, mu, 0.0, 0.0)


def state_at(user, cascade, t, params, store):
    """Scratch-built state at relative time t, from events strictly before t."""
    if t < 0:
        raise ValueError(f"state requested at negative time {t}")
    a = post_influence(user, cascade.post, params, store) * math.exp(
        -params.post_decay_rate * t
    )
    b = 0.0
    for c in cascade.comments:
        if c.time >= t:
            break
        b += comment_influence(user, c, params, store) * math.exp(
            -params.comment_decay_rate * (t - c.time)
        )
    return IntensityState(user, cascade.cascade_id, a, b, t)


def decay_state(state, t2, params):
    """State advanced to t2 >= last_update_time with both terms decayed."""
    dt = t2 - state.last_update_time
    if dt < 0:
        raise ValueError(
            f"state at {state.last_update_time} cannot rewind to {t2}"
        )
    return replace(
        state,
        post_term=state.post_term * math.exp(-params.post_decay_rate * dt),
        comment_term=state.comment_term * math.exp(-params.comment_decay_rate * dt),
        last_update_time=t2,
    )


def absorb_event(state, comment, params, store):
    """State just after `comment` lands; requires the state decayed to its time."""
    if state.last_update_time != comment.time:
        raise ValueError(
            f"state sits at {state.last_update_time}, decay it to the comment "
            f"time {comment.time} before absorbing"
        )
    add = comment_influence(state.user, comment, params, store)
    return replace(state, comment_term=state.comment_term + add)
