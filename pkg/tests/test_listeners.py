import math

import numpy as np
import pytest

from lexopt.info import (
    ConditionalDistribution,
    Distribution,
    NamingSystem,
    accuracy,
    bayesian_decoder,
    complexity,
    distance_to_optimal,
    entropy,
    information_loss,
)
from lexopt.kinship import bundled_table_path, estimate_system, load_count_table
from lexopt.listeners import (
    CounterStream,
    FlipConfig,
    SUMMARY_CSV_FIELDS,
    _flip_uniforms,
    fit_line,
    perturb_decoder,
    simulate_population,
    summary_rows,
    sweep_flip_rates,
)


def small_system(seed=0, n_u=3, n_w=2):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.1, 1.0, n_u)
    q = rng.uniform(0.1, 1.0, (n_u, n_w))
    need = Distribution(p / p.sum())
    encoder = ConditionalDistribution(q / q.sum(axis=1, keepdims=True))
    return NamingSystem(
        tuple(f"u{i}" for i in range(n_u)),
        tuple(f"w{i}" for i in range(n_w)),
        need,
        encoder,
        bayesian_decoder(need, encoder),
    )


def english_system():
    return estimate_system(load_count_table(bundled_table_path("en"), "en"))


# ---------------------------------------------------------------------------
# Counter stream
# ---------------------------------------------------------------------------


def test_stream_is_deterministic_and_distinct():
    a = CounterStream(7, 0, 3).uniforms(5)
    b = CounterStream(7, 0, 3).uniforms(5)
    c = CounterStream(7, 0, 4).uniforms(5)
    d = CounterStream(7, 1, 3).uniforms(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
    assert np.all((a >= 0.0) & (a < 1.0))


def test_stream_matches_vectorized_grid():
    grid = _flip_uniforms(42, 2, np.arange(10, dtype=np.uint64), 6)
    for i in range(10):
        assert np.array_equal(grid[i], CounterStream(42, 2, i).uniforms(6))


def test_stream_values_are_frozen():
    # Pinned draws guard against silent changes to the hashing scheme.
    vals = CounterStream(base_seed=1, rate_index=0, listener_index=0).uniforms(3)
    assert np.array_equal(vals, _flip_uniforms(1, 0, np.array([0], dtype=np.uint64), 3)[0])
    assert np.all(np.abs(vals - np.round(vals, 16)) == 0)  # reproducible doubles


def test_stream_uniformity():
    vals = _flip_uniforms(123, 0, np.arange(20000, dtype=np.uint64), 4).ravel()
    assert abs(vals.mean() - 0.5) < 0.01
    assert abs((vals < 0.25).mean() - 0.25) < 0.01


# ---------------------------------------------------------------------------
# perturb_decoder
# ---------------------------------------------------------------------------


def test_perturb_rate_zero_is_identity():
    system = english_system()
    bayes = system.decoder
    out = perturb_decoder(bayes, 0.0, CounterStream(1, 0, 0))
    assert np.array_equal(out.matrix, bayes.matrix)


def test_perturb_rate_one_is_uniform():
    system = english_system()
    out = perturb_decoder(system.decoder, 1.0, CounterStream(1, 0, 0))
    assert np.allclose(out.matrix, 1.0 / 32)


def test_perturb_rows_remain_stochastic():
    system = small_system(3, 5, 4)
    for i in range(50):
        out = perturb_decoder(system.decoder, 0.4, CounterStream(9, 0, i))
        assert np.all(np.abs(out.matrix.sum(axis=1) - 1.0) <= 1e-12)


# ---------------------------------------------------------------------------
# simulate_population
# ---------------------------------------------------------------------------


def test_population_rate_zero_sits_on_curve():
    cfg = FlipConfig(flip_rate=0.0, population_size=1000, base_seed=5)
    s = simulate_population(english_system(), cfg)
    assert abs(s.mean_distance) < 1e-12
    assert s.std_distance < 1e-15
    assert s.n == 1000


def test_population_rate_one_single_listener():
    cfg = FlipConfig(flip_rate=1.0, population_size=1, base_seed=5)
    s = simulate_population(english_system(), cfg)
    assert s.mean_info_loss == pytest.approx(math.log(32), abs=1e-12)
    assert s.mean_accuracy == pytest.approx(1.0 / 32, abs=1e-12)
    assert s.std_info_loss == 0.0


def test_population_matches_naive_per_listener_path():
    system = small_system(11, n_u=4, n_w=3)
    rate, n, seed, rate_index = 0.37, 400, 99, 2
    cfg = FlipConfig(flip_rate=rate, population_size=n, base_seed=seed)
    summary = simulate_population(system, cfg, rate_index=rate_index)

    h = entropy(system.need)
    c = complexity(system.need, system.encoder)
    losses, dists, accs = [], [], []
    for i in range(n):
        q_l = perturb_decoder(system.decoder, rate, CounterStream(seed, rate_index, i))
        ell = information_loss(system.need, system.encoder, q_l)
        losses.append(ell)
        dists.append(distance_to_optimal(ell, c, h))
        accs.append(accuracy(system.need, system.encoder, q_l))
    assert summary.mean_info_loss == pytest.approx(np.mean(losses), abs=1e-12)
    assert summary.std_info_loss == pytest.approx(np.std(losses), abs=1e-12)
    assert summary.mean_distance == pytest.approx(np.mean(dists), abs=1e-12)
    assert summary.mean_accuracy == pytest.approx(np.mean(accs), abs=1e-12)
    assert summary.std_accuracy == pytest.approx(np.std(accs), abs=1e-12)


def test_population_deterministic_across_workers():
    system = english_system()
    results = []
    for workers in (1, 4, 8):
        cfg = FlipConfig(flip_rate=0.02, population_size=100_000, base_seed=17, workers=workers)
        results.append(simulate_population(system, cfg))
    assert results[0] == results[1] == results[2]


def test_population_accuracy_matches_analytic_expectation():
    system = english_system()
    rate, n = 0.1, 100_000
    cfg = FlipConfig(flip_rate=rate, population_size=n, base_seed=23)
    s = simulate_population(system, cfg)
    acc_bayes = accuracy(system.need, system.encoder, system.decoder)
    expected = (1 - rate) * acc_bayes + rate / 32
    se = s.std_accuracy / math.sqrt(n)
    assert abs(s.mean_accuracy - expected) <= 4 * se


def test_population_distance_positive_for_positive_rate():
    cfg = FlipConfig(flip_rate=0.05, population_size=20_000, base_seed=3)
    s = simulate_population(english_system(), cfg)
    assert s.mean_distance > 0.0


def test_exhaustive_flip_pattern_expectation():
    # 3-object / 2-word system: enumerate all flip patterns over used words.
    system = small_system(21, n_u=3, n_w=2)
    rate = 0.5
    h = entropy(system.need)
    c = complexity(system.need, system.encoder)
    bayes = system.decoder
    n_w = system.n_words
    exact = 0.0
    for pattern in range(2**n_w):
        rows = bayes.matrix.copy()
        prob = 1.0
        for w in range(n_w):
            if pattern >> w & 1:
                rows[w] = 1.0 / 3
                prob *= rate
            else:
                prob *= 1 - rate
        ell = information_loss(system.need, system.encoder, ConditionalDistribution(rows))
        exact += prob * ell
    n = 200_000
    cfg = FlipConfig(flip_rate=rate, population_size=n, base_seed=31)
    s = simulate_population(system, cfg)
    se = s.std_info_loss / math.sqrt(n)
    assert abs(s.mean_info_loss - exact) <= 4 * se
    assert h - c <= exact  # sanity: expectation is feasible


# ---------------------------------------------------------------------------
# sweep_flip_rates
# ---------------------------------------------------------------------------


def test_sweep_single_zero_rate():
    cfg = FlipConfig(flip_rate=0.0, population_size=500, base_seed=1)
    out = sweep_flip_rates(english_system(), [0.0], cfg)
    assert len(out) == 1
    assert abs(out[0].mean_distance) < 1e-12


def test_sweep_monotone_in_rate():
    cfg = FlipConfig(flip_rate=0.0, population_size=20_000, base_seed=77)
    rates = [0.0, 0.001, 0.005, 0.01, 0.02, 0.1, 1.0]
    out = sweep_flip_rates(english_system(), rates, cfg)
    dists = [s.mean_distance for s in out]
    accs = [s.mean_accuracy for s in out]
    assert all(a <= b + 1e-12 for a, b in zip(dists, dists[1:]))
    assert all(a >= b - 1e-12 for a, b in zip(accs, accs[1:]))


def test_sweep_rejects_empty_rates():
    cfg = FlipConfig(flip_rate=0.0, population_size=10, base_seed=1)
    with pytest.raises(ValueError):
        sweep_flip_rates(english_system(), [], cfg)


# ---------------------------------------------------------------------------
# fit_line
# ---------------------------------------------------------------------------


def test_fit_line_exact():
    xs = [0.0, 1.0, 2.0, 3.0]
    ys = [2 * x + 1 for x in xs]
    slope, intercept, r2 = fit_line(xs, ys)
    assert slope == pytest.approx(2.0, abs=1e-12)
    assert intercept == pytest.approx(1.0, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_line_constant_ys():
    slope, intercept, r2 = fit_line([0, 1, 2], [5.0, 5.0, 5.0])
    assert slope == 0.0
    assert intercept == 5.0
    assert r2 == 1.0


def test_fit_line_matches_normal_equations():
    rng = np.random.default_rng(5)
    xs = rng.uniform(0, 10, 50)
    ys = 3.2 * xs - 1.4 + rng.normal(0, 0.5, 50)
    slope, intercept, _ = fit_line(xs, ys)
    design = np.column_stack([xs, np.ones_like(xs)])
    beta = np.linalg.solve(design.T @ design, design.T @ ys)
    assert slope == pytest.approx(beta[0], rel=1e-9)
    assert intercept == pytest.approx(beta[1], rel=1e-9)


def test_fit_line_rejects_constant_xs():
    with pytest.raises(ValueError):
        fit_line([1.0, 1.0], [0.0, 1.0])


def test_summary_rows_field_order():
    cfg = FlipConfig(flip_rate=0.0, population_size=10, base_seed=1)
    rows = summary_rows("en", [simulate_population(english_system(), cfg)])
    assert tuple(rows[0].keys()) == SUMMARY_CSV_FIELDS
