"""Monte-Carlo populations of suboptimal listeners.

A simulated listener starts from the speaker's Bayesian decoder and, for
each word independently with probability ``flip_rate``, replaces that word's
decoded distribution with the uniform distribution over objects (its
decision becomes random).  Populations of such listeners are evaluated
against a fixed speaker and summarized as mean/std of distance, information
loss, and accuracy.

Randomness is counter-based: the flip decision for (rate, listener, word)
is a pure 64-bit hash of those indices and the base seed, so populations
are reproducible and partitionable across any number of workers without
communication.  Aggregation runs over fixed-size listener blocks merged in
block order, which makes summaries bit-identical for every worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .info import (
    ConditionalDistribution,
    NamingSystem,
    bayesian_decoder,
    complexity,
    entropy,
)

__all__ = [
    "FlipConfig",
    "PopulationSummary",
    "CounterStream",
    "perturb_decoder",
    "simulate_population",
    "sweep_flip_rates",
    "fit_line",
    "SUMMARY_CSV_FIELDS",
    "summary_rows",
]

#: Listeners per aggregation block; fixed so results never depend on workers.
BLOCK_SIZE = 32768


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer over uint64 values (vectorized, wrapping)."""
    with np.errstate(over="ignore"):
        z = (z + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


_LISTENER_SALT = np.uint64(0xA24BAED4963EE407)
_WORD_SALT = np.uint64(0x9FB21C651E98DF25)


def _rate_key(base_seed: int, rate_index: int) -> np.uint64:
    seed = np.uint64(base_seed & 0xFFFFFFFFFFFFFFFF)
    return _mix64(_mix64(np.asarray(seed)) ^ np.uint64(rate_index))


def _flip_uniforms(base_seed: int, rate_index: int, listener_ids: np.ndarray, n_words: int) -> np.ndarray:
    """Uniform [0,1) draws, one per (listener, word), shape (n, n_words)."""
    key = _rate_key(base_seed, rate_index)
    with np.errstate(over="ignore"):
        listeners = _mix64(key + _LISTENER_SALT * listener_ids.astype(np.uint64)[:, None])
        words = _WORD_SALT * np.arange(n_words, dtype=np.uint64)[None, :]
        bits = _mix64(listeners ^ words)
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class CounterStream:
    """The random stream owned by one simulated listener."""

    base_seed: int
    rate_index: int
    listener_index: int

    def uniforms(self, n: int) -> np.ndarray:
        ids = np.array([self.listener_index], dtype=np.uint64)
        return _flip_uniforms(self.base_seed, self.rate_index, ids, n)[0]


@dataclass(frozen=True)
class FlipConfig:
    flip_rate: float
    population_size: int
    base_seed: int
    workers: int = 1

    def __post_init__(self):
        if not 0.0 <= self.flip_rate <= 1.0:
            raise ValueError(f"flip rate {self.flip_rate} outside [0, 1]")
        if self.population_size <= 0:
            raise ValueError("population size must be positive")
        if self.workers <= 0:
            raise ValueError("workers must be positive")


@dataclass(frozen=True)
class PopulationSummary:
    flip_rate: float
    n: int
    mean_distance: float
    std_distance: float
    mean_info_loss: float
    std_info_loss: float
    mean_accuracy: float
    std_accuracy: float
    complexity: float
    entropy: float


def perturb_decoder(bayes, r_e: float, stream: CounterStream):
    """Flip each word's row to uniform with probability ``r_e``.

    Unused words have uniform rows already, so flipping them is a no-op;
    the output is always row-stochastic.
    """
    if not 0.0 <= r_e <= 1.0:
        raise ValueError(f"flip rate {r_e} outside [0, 1]")
    rows = bayes.matrix.copy()
    flips = stream.uniforms(rows.shape[0]) < r_e
    rows[flips] = 1.0 / rows.shape[1]
    return ConditionalDistribution(rows)


@dataclass(frozen=True)
class _WordStats:
    """Per-word metric contributions under Bayes vs uniform rows."""

    entropy: float
    complexity: float
    loss_bayes: np.ndarray
    loss_uniform: np.ndarray
    acc_bayes: np.ndarray
    acc_uniform: np.ndarray


def _word_stats(system: NamingSystem) -> _WordStats:
    p = system.need
    q_s = system.encoder
    bayes = bayesian_decoder(p, q_s)
    joint = p.probs[:, None] * q_s.matrix  # objects x words
    p_w = joint.sum(axis=0)
    n_u = p.support_size

    decoded = bayes.matrix.T  # objects x words
    visited = joint > 0.0
    log_terms = np.zeros_like(joint)
    log_terms[visited] = np.log(decoded[visited])
    loss_bayes = -(joint * log_terms).sum(axis=0)
    loss_uniform = p_w * math.log(n_u)
    acc_bayes = (joint * decoded).sum(axis=0)
    acc_uniform = p_w / n_u
    return _WordStats(
        entropy=entropy(p),
        complexity=complexity(p, q_s),
        loss_bayes=loss_bayes,
        loss_uniform=loss_uniform,
        acc_bayes=acc_bayes,
        acc_uniform=acc_uniform,
    )


def _block_moments(values: np.ndarray) -> tuple[int, float, float]:
    """Two-pass (n, mean, M2) for one block."""
    n = values.shape[0]
    mean = float(values.mean())
    m2 = float(np.sum((values - mean) ** 2))
    return n, mean, m2


def _merge_moments(a, b):
    n1, m1, s1 = a
    n2, m2, s2 = b
    n = n1 + n2
    delta = m2 - m1
    mean = m1 + delta * n2 / n
    m2_total = s1 + s2 + delta * delta * n1 * n2 / n
    return n, mean, m2_total


def _simulate_block(stats: _WordStats, cfg: FlipConfig, rate_index: int, start: int, stop: int):
    ids = np.arange(start, stop, dtype=np.uint64)
    flips = _flip_uniforms(cfg.base_seed, rate_index, ids, stats.loss_bayes.shape[0]) < cfg.flip_rate
    flips = flips.astype(np.float64)
    base_loss = stats.loss_bayes.sum()
    base_acc = stats.acc_bayes.sum()
    loss = base_loss + flips @ (stats.loss_uniform - stats.loss_bayes)
    acc = base_acc + flips @ (stats.acc_uniform - stats.acc_bayes)
    dist = (loss - stats.entropy + stats.complexity) / math.sqrt(2.0)
    return tuple(_block_moments(v) for v in (dist, loss, acc))


def simulate_population(system: NamingSystem, cfg: FlipConfig, rate_index: int = 0) -> PopulationSummary:
    """Evaluate ``cfg.population_size`` flip-perturbed listeners.

    Per listener i the decoder is the Bayesian decoder with rows flipped per
    the counter stream (cfg.base_seed, rate_index, i); the summary is exact
    mean/std of distance, information loss, and accuracy.  Deterministic for
    fixed (system, cfg) regardless of worker count.
    """
    stats = _word_stats(system)
    n = cfg.population_size
    spans = [(s, min(s + BLOCK_SIZE, n)) for s in range(0, n, BLOCK_SIZE)]
    if cfg.workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            block_results = list(
                pool.map(lambda span: _simulate_block(stats, cfg, rate_index, *span), spans)
            )
    else:
        block_results = [_simulate_block(stats, cfg, rate_index, *span) for span in spans]

    merged = block_results[0]
    for block in block_results[1:]:
        merged = tuple(_merge_moments(m, b) for m, b in zip(merged, block))
    (n_d, mean_d, m2_d), (_, mean_l, m2_l), (_, mean_a, m2_a) = merged
    assert n_d == n
    return PopulationSummary(
        flip_rate=cfg.flip_rate,
        n=n,
        mean_distance=mean_d,
        std_distance=math.sqrt(m2_d / n),
        mean_info_loss=mean_l,
        std_info_loss=math.sqrt(m2_l / n),
        mean_accuracy=mean_a,
        std_accuracy=math.sqrt(m2_a / n),
        complexity=stats.complexity,
        entropy=stats.entropy,
    )


def sweep_flip_rates(system: NamingSystem, rates, cfg: FlipConfig) -> list:
    """One population summary per rate; streams keyed by the rate's index."""
    if not rates:
        raise ValueError("rates must be non-empty")
    summaries = []
    for rate_index, rate in enumerate(rates):
        rate_cfg = FlipConfig(
            flip_rate=rate,
            population_size=cfg.population_size,
            base_seed=cfg.base_seed,
            workers=cfg.workers,
        )
        summaries.append(simulate_population(system, rate_cfg, rate_index=rate_index))
    return summaries


def fit_line(xs, ys) -> tuple[float, float, float]:
    """Ordinary least squares fit returning (slope, intercept, r_squared).

    Constant ys give slope 0 and, by convention, r_squared = 1 (a zero
    variance target is fit perfectly by the constant line).
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("need two same-length 1-D samples")
    if np.all(x == x[0]):
        raise ValueError("xs are constant; slope is undefined")
    x_mean, y_mean = x.mean(), y.mean()
    slope = float(np.sum((x - x_mean) * (y - y_mean)) / np.sum((x - x_mean) ** 2))
    intercept = float(y_mean - slope * x_mean)
    ss_tot = float(np.sum((y - y_mean) ** 2))
    if ss_tot == 0.0:
        return slope, intercept, 1.0
    ss_res = float(np.sum((y - slope * x - intercept) ** 2))
    return slope, intercept, max(0.0, 1.0 - ss_res / ss_tot)


SUMMARY_CSV_FIELDS = (
    "language",
    "flip_rate",
    "n",
    "mean_distance",
    "std_distance",
    "mean_info_loss",
    "std_info_loss",
    "mean_accuracy",
    "std_accuracy",
    "complexity",
    "entropy",
)


def summary_rows(language: str, summaries) -> list:
    """Dict rows in SUMMARY_CSV_FIELDS order for CSV/JSON emission."""
    rows = []
    for s in summaries:
        rows.append(
            {
                "language": language,
                "flip_rate": s.flip_rate,
                "n": s.n,
                "mean_distance": s.mean_distance,
                "std_distance": s.std_distance,
                "mean_info_loss": s.mean_info_loss,
                "std_info_loss": s.std_info_loss,
                "mean_accuracy": s.mean_accuracy,
                "std_accuracy": s.std_accuracy,
                "complexity": s.complexity,
                "entropy": s.entropy,
            }
        )
    return rows
