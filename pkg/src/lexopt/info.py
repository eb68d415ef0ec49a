"""Exact information-theoretic measures for finite discrete naming systems.

A naming system is a pool of objects with a communicative need distribution
p(u), a speaker encoder q_s(w|u) mapping objects to words, and (optionally)
a listener decoder q_l(u|w).  This module computes, in closed form:

    H(U)  = -sum_u p(u) log p(u)                       entropy of the need
    C     = I(U;W) = sum_{u,w} p(u) q_s(w|u)
            log[q_s(w|u) / p_s(w)]                      encoder complexity
    L     = -sum_u p(u) sum_w q_s(w|u) log q_l(u|w)     information loss
    d     = (L - H + C) / sqrt(2)                       distance to the
                                                        optimal curve L = H - C

together with the Bayes inversion of the encoder (the unique decoder that
attains L = H - C), the decomposition L = H - C + E_w[KL(bayes || q_l)],
the relaxed accuracy E[q_l(u|w)], and the degenerate discrete form of the
bottleneck objective (1 - beta) * C.

All quantities are in nats.  Sums use the convention 0 * log 0 = 0, and a
log of a zero decoder entry on a visited (object, word) pair yields +inf
rather than an error so that sweeps over perturbed listeners can record it.
Every public function is a pure function of immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ValidationError",
    "InfeasiblePointError",
    "Distribution",
    "ConditionalDistribution",
    "NamingSystem",
    "TradeoffPoint",
    "entropy",
    "word_marginal",
    "complexity",
    "bayesian_decoder",
    "unused_word_mask",
    "information_loss",
    "decompose_information_loss",
    "distance_to_optimal",
    "accuracy",
    "ib_objective_discrete",
    "evaluate_system",
]

NORMALIZATION_ATOL = 1e-12
LN2 = math.log(2.0)


class ValidationError(ValueError):
    """An input violates a distribution or dimension invariant."""


class InfeasiblePointError(ValueError):
    """A (L, C, H) triple lies below the optimal curve beyond tolerance."""


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Distribution:
    """A probability vector: non-negative entries summing to 1 within 1e-12."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _as_float_array(self.probs, "probs")
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("probs must be a non-empty 1-D vector")
        if np.any(arr < 0.0):
            raise ValidationError("probs has negative entries")
        total = float(arr.sum())
        if abs(total - 1.0) > NORMALIZATION_ATOL:
            raise ValidationError(f"probs sum to {total!r}, not 1")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def support_size(self) -> int:
        return self.probs.shape[0]

    @staticmethod
    def uniform(n: int) -> "Distribution":
        return Distribution(np.full(n, 1.0 / n))

    @staticmethod
    def from_weights(weights) -> "Distribution":
        """Normalize non-negative weights with at least one positive entry."""
        arr = _as_float_array(weights, "weights")
        if np.any(arr < 0.0):
            raise ValidationError("weights has negative entries")
        total = float(arr.sum())
        if total <= 0.0:
            raise ValidationError("weights sum to zero")
        return Distribution(arr / total)


@dataclass(frozen=True)
class ConditionalDistribution:
    """A row-stochastic matrix: rows condition, columns are outputs."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = _as_float_array(self.matrix, "matrix")
        if arr.ndim != 2 or arr.size == 0:
            raise ValidationError("matrix must be a non-empty 2-D array")
        if np.any(arr < 0.0):
            raise ValidationError("matrix has negative entries")
        row_sums = arr.sum(axis=1)
        bad = np.abs(row_sums - 1.0) > NORMALIZATION_ATOL
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValidationError(
                f"row {i} sums to {row_sums[i]!r}, not 1"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @property
    def n_given(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_out(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class NamingSystem:
    """Objects, words, need p(u), encoder q_s(w|u), optional decoder q_l(u|w)."""

    object_labels: tuple
    word_labels: tuple
    need: Distribution
    encoder: ConditionalDistribution
    decoder: ConditionalDistribution | None = None

    def __post_init__(self):
        object.__setattr__(self, "object_labels", tuple(self.object_labels))
        object.__setattr__(self, "word_labels", tuple(self.word_labels))
        n_u, n_w = len(self.object_labels), len(self.word_labels)
        if self.need.support_size != n_u:
            raise ValidationError("need distribution does not match object count")
        if self.encoder.matrix.shape != (n_u, n_w):
            raise ValidationError("encoder shape does not match labels")
        if self.decoder is not None and self.decoder.matrix.shape != (n_w, n_u):
            raise ValidationError("decoder shape does not match labels")

    @property
    def n_objects(self) -> int:
        return len(self.object_labels)

    @property
    def n_words(self) -> int:
        return len(self.word_labels)


#: Exact serialization field names for TradeoffPoint CSV rows / JSON objects.
TRADEOFF_FIELDS = (
    "entropy_nats",
    "complexity_nats",
    "adjusted_complexity_nats",
    "info_loss_nats",
    "distance_nats",
    "accuracy",
)


@dataclass(frozen=True)
class TradeoffPoint:
    """One evaluated system: (H, C, C - H, L, d, accuracy), all in nats."""

    entropy_nats: float
    complexity_nats: float
    adjusted_complexity_nats: float
    info_loss_nats: float
    distance_nats: float
    accuracy: float

    def __post_init__(self):
        h, c = self.entropy_nats, self.complexity_nats
        ell, d = self.info_loss_nats, self.distance_nats
        if not (-1e-9 <= c <= h + 1e-9):
            raise ValidationError(f"complexity {c} outside [0, H={h}]")
        if self.adjusted_complexity_nats > 1e-9:
            raise ValidationError("adjusted complexity must be <= 0")
        if not (0.0 <= self.accuracy <= 1.0 + 1e-12):
            raise ValidationError(f"accuracy {self.accuracy} outside [0, 1]")
        if math.isinf(ell):
            return
        if ell < h - c - 1e-9:
            raise ValidationError(f"infeasible point: L={ell} < H-C={h - c}")
        if abs(d - (ell - h + c) / math.sqrt(2.0)) > 1e-12:
            raise ValidationError("distance inconsistent with (L, C, H)")

    def as_dict(self, log_base: str = "nats") -> dict:
        """Field dict; ``log_base='bits'`` divides the nat-valued fields by ln 2."""
        if log_base not in ("nats", "bits"):
            raise ValidationError(f"unknown log base {log_base!r}")
        scale = 1.0 if log_base == "nats" else 1.0 / LN2
        return {
            "entropy_nats": self.entropy_nats * scale,
            "complexity_nats": self.complexity_nats * scale,
            "adjusted_complexity_nats": self.adjusted_complexity_nats * scale,
            "info_loss_nats": self.info_loss_nats * scale,
            "distance_nats": self.distance_nats * scale,
            "accuracy": self.accuracy,
        }

    def csv_row(self, log_base: str = "nats") -> list:
        d = self.as_dict(log_base)
        return [d[f] for f in TRADEOFF_FIELDS]


def entropy(p: Distribution) -> float:
    """H(p) = -sum p log p in nats, with 0 log 0 = 0."""
    probs = p.probs
    mask = probs > 0.0
    return float(-np.sum(probs[mask] * np.log(probs[mask])))


def _check_encoder_dims(p: Distribution, q_s: ConditionalDistribution) -> None:
    if q_s.n_given != p.support_size:
        raise ValidationError(
            f"encoder has {q_s.n_given} rows but need distribution has "
            f"{p.support_size} objects"
        )


def word_marginal(p: Distribution, q_s: ConditionalDistribution) -> Distribution:
    """Marginal over words: p_s(w) = sum_u p(u) q_s(w|u)."""
    _check_encoder_dims(p, q_s)
    marginal = p.probs @ q_s.matrix
    # Exact re-normalization drift is < n * eps; clip stray -0.0 only.
    return Distribution(np.maximum(marginal, 0.0))


def complexity(p: Distribution, q_s: ConditionalDistribution) -> float:
    """Mutual information I(U;W) between objects and words, in nats."""
    _check_encoder_dims(p, q_s)
    joint = p.probs[:, None] * q_s.matrix
    p_w = joint.sum(axis=0)
    mask = joint > 0.0
    log_ratio = np.log(q_s.matrix[mask]) - np.log(np.broadcast_to(p_w, joint.shape)[mask])
    value = float(np.sum(joint[mask] * log_ratio))
    # Mutual information is non-negative; tiny negative values are rounding.
    return max(value, 0.0)


def unused_word_mask(p: Distribution, q_s: ConditionalDistribution) -> np.ndarray:
    """Boolean mask of words with zero marginal probability p_s(w)."""
    _check_encoder_dims(p, q_s)
    return (p.probs @ q_s.matrix) <= 0.0


def bayesian_decoder(p: Distribution, q_s: ConditionalDistribution) -> ConditionalDistribution:
    """Bayes inversion of the encoder: rows are posteriors p(u | w).

    Rows for words that are never produced (p_s(w) = 0) are set to the
    uniform distribution; they carry zero weight in every expectation.
    """
    _check_encoder_dims(p, q_s)
    joint_t = (p.probs[:, None] * q_s.matrix).T  # words x objects
    p_w = joint_t.sum(axis=1)
    if not np.any(p_w > 0.0):
        raise ValidationError("all words have zero marginal probability")
    used = p_w > 0.0
    rows = np.full_like(joint_t, 1.0 / p.support_size)
    rows[used] = joint_t[used] / p_w[used, None]
    return ConditionalDistribution(rows)


def information_loss(
    p: Distribution,
    q_s: ConditionalDistribution,
    q_l: ConditionalDistribution,
) -> float:
    """Expected cross-entropy -E_{u,w}[log q_l(u|w)] in nats.

    Returns +inf when the listener assigns zero probability to a visited
    (object, word) pair.
    """
    _check_encoder_dims(p, q_s)
    if q_l.matrix.shape != (q_s.n_out, p.support_size):
        raise ValidationError("decoder shape does not match encoder/need")
    joint = p.probs[:, None] * q_s.matrix
    decoded = q_l.matrix.T  # objects x words
    mask = joint > 0.0
    if np.any(decoded[mask] <= 0.0):
        return math.inf
    return float(-np.sum(joint[mask] * np.log(decoded[mask])))


def decompose_information_loss(
    p: Distribution,
    q_s: ConditionalDistribution,
    q_l: ConditionalDistribution,
) -> tuple[float, float, float]:
    """Split L into (H, C, bayes_gap) with L = H - C + bayes_gap.

    The gap is E_{w ~ p_s}[KL(bayes_row || q_l_row)] >= 0; it is +inf when
    q_l lacks support somewhere the Bayesian decoder has mass.
    """
    h = entropy(p)
    c = complexity(p, q_s)
    bayes = bayesian_decoder(p, q_s)
    if q_l.matrix.shape != bayes.matrix.shape:
        raise ValidationError("decoder shape does not match encoder/need")
    p_w = p.probs @ q_s.matrix
    gap = 0.0
    for w in np.nonzero(p_w > 0.0)[0]:
        b_row = bayes.matrix[w]
        l_row = q_l.matrix[w]
        support = b_row > 0.0
        if np.any(l_row[support] <= 0.0):
            return h, c, math.inf
        gap += p_w[w] * float(
            np.sum(b_row[support] * (np.log(b_row[support]) - np.log(l_row[support])))
        )
    return h, c, max(gap, 0.0)


def distance_to_optimal(info_loss_nats: float, complexity_nats: float, entropy_nats: float) -> float:
    """Euclidean distance (L - H + C) / sqrt(2) to the curve L = H - C."""
    slack = info_loss_nats - entropy_nats + complexity_nats
    if slack < -1e-9:
        raise InfeasiblePointError(
            f"L={info_loss_nats} lies below the optimal curve H-C="
            f"{entropy_nats - complexity_nats}; upstream computation is broken"
        )
    return slack / math.sqrt(2.0)


def accuracy(
    p: Distribution,
    q_s: ConditionalDistribution,
    q_l: ConditionalDistribution,
) -> float:
    """Expected probability of correct decoding: E_{u,w}[q_l(u|w)]."""
    _check_encoder_dims(p, q_s)
    if q_l.matrix.shape != (q_s.n_out, p.support_size):
        raise ValidationError("decoder shape does not match encoder/need")
    joint = p.probs[:, None] * q_s.matrix
    return float(np.sum(joint * q_l.matrix.T))


def ib_objective_discrete(p: Distribution, q_s: ConditionalDistribution, beta: float) -> float:
    """Degenerate discrete bottleneck objective (1 - beta) * I(U;W), beta >= 1."""
    if beta < 1.0:
        raise ValidationError(f"beta must be >= 1, got {beta}")
    return (1.0 - beta) * complexity(p, q_s)


def evaluate_system(system: NamingSystem) -> TradeoffPoint:
    """Bundle (H, C, C - H, L, d, accuracy) for one system.

    When no decoder is given the Bayesian decoder is derived and the point
    sits on the optimal curve by construction, so d is reported as exactly 0.
    """
    h = entropy(system.need)
    c = complexity(system.need, system.encoder)
    if system.decoder is None:
        q_l = bayesian_decoder(system.need, system.encoder)
        ell = information_loss(system.need, system.encoder, q_l)
        d = 0.0
    else:
        q_l = system.decoder
        ell = information_loss(system.need, system.encoder, q_l)
        d = math.inf if math.isinf(ell) else distance_to_optimal(ell, c, h)
    return TradeoffPoint(
        entropy_nats=h,
        complexity_nats=c,
        adjusted_complexity_nats=c - h,
        info_loss_nats=ell,
        distance_nats=d,
        accuracy=accuracy(system.need, system.encoder, q_l),
    )
