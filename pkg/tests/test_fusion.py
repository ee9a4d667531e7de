import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sensornet.errors import ValidationError
from sensornet.fusion import (
    LossFunction,
    build_family,
    competitor_grid,
    default_eta,
    exponential_weights,
    online_fusion,
    online_fusion_stream,
    parse_family,
    regret_bound,
)
from sensornet.sources import underestimating_readings

HAM = LossFunction("hamming")
LOG = LossFunction("log-loss", 1e-3)


def noisy_competitors(rates, n, seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, n)
    err = rng.random((len(rates), n)) < np.asarray(rates)[:, None]
    return np.where(err, 1 - x, x), x


def test_loss_examples():
    assert HAM(1, 1) == 0 and HAM(0, 1) == 1
    assert LOG(0.5, 0) == pytest.approx(1.0) and LOG(0.5, 1) == pytest.approx(1.0)
    assert LOG(0.0, 1) == pytest.approx(-math.log2(1e-3))
    assert LOG(0.0, 1) == pytest.approx(9.9658, abs=1e-4)
    assert LOG.d_max == pytest.approx(LOG(0.0, 1)) and HAM.d_max == 1


def test_loss_rejections():
    with pytest.raises(ValidationError, match="quantize"):
        HAM(0.3, 1)
    with pytest.raises(ValidationError):
        LOG(1.2, 1)
    with pytest.raises(ValidationError):
        LOG(0.5, 2)
    with pytest.raises(ValidationError):
        LossFunction("log-loss", 0.6)


def test_family_sizes():
    assert len(build_family("pair-average", 15)) == 105
    assert len(build_family("ordered-pairs", 15)) == 225
    assert len(build_family("max-of-subset", 3, 3)) == 1
    assert len(build_family("median-of-subset", 5, 3)) == 10
    with pytest.raises(ValidationError):
        build_family("max-of-subset", 3, 4)
    with pytest.raises(ValidationError):
        parse_family("max:x", 3)


def test_family_outputs():
    base = np.array([[0.1, 0.9], [0.5, 0.3], [0.2, 0.4]])
    assert parse_family("max:3", 3).evaluate(base).tolist() == [[0.5, 0.9]]
    med = parse_family("median:3", 3).evaluate(base)
    assert med.tolist() == [[0.2, 0.4]]
    grid, names = competitor_grid(base, [parse_family("pair-average", 3)])
    assert names == ["s1", "s2", "s3", "avg(1,2)", "avg(1,3)", "avg(2,3)"]
    assert grid[3].tolist() == pytest.approx([0.3, 0.6])


def test_eta_examples():
    assert default_eta(math.e**8, 8, 1) == pytest.approx(math.sqrt(8))
    assert default_eta(240, 10_000, 1) == pytest.approx(0.0662, abs=1e-4)
    assert default_eta(240, 10**12, 1) < 1e-4


def test_regret_bound_examples():
    assert regret_bound(math.e**2, 1, 1) == pytest.approx(1.0)
    assert regret_bound(240, 10_000, 1) == pytest.approx(0.01656, abs=1e-5)
    assert regret_bound(240, 10**12, 1) < 1e-5


def test_two_competitor_weights():
    out = np.array([[1, 1, 1], [0, 0, 0]])
    truth = np.array([1, 1, 1])
    run = online_fusion(out, truth, HAM, eta=1.0)
    e = math.exp(-1)
    assert run.weight_history[0].tolist() == [0.5, 0.5]
    assert run.weight_history[1] == pytest.approx([1 / (1 + e), e / (1 + e)])
    assert run.weight_history[1] == pytest.approx([0.7311, 0.2689], abs=1e-4)


def test_identical_competitors_stay_uniform():
    row = np.random.default_rng(0).integers(0, 2, 50)
    run = online_fusion(np.vstack([row] * 4), row[::-1].copy(), HAM)
    assert np.allclose(run.weight_history, 0.25)


def test_perfect_competitor_dominates():
    n, m = 10_000, 240
    rng = np.random.default_rng(3)
    truth = rng.integers(0, 2, n)
    out = rng.integers(0, 2, (m, n))
    out[17] = truth
    run = online_fusion(out, truth, HAM, record_weights=False)
    assert run.final_weights[17] > 0.99
    assert run.best_competitor == 17


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(1, 40), st.integers(0, 10_000))
def test_weight_invariants(m, n, seed):
    rng = np.random.default_rng(seed)
    out = rng.random((m, n))
    truth = rng.integers(0, 2, n)
    run = online_fusion(out, truth, LOG, seed=seed)
    h = run.weight_history
    assert np.allclose(h.sum(axis=1), 1.0, atol=1e-9)
    step = LOG(out, truth[None, :])
    cum = np.vstack([np.zeros(m), np.cumsum(step, axis=1).T])
    for t in range(n + 1):
        for i in range(m):
            for j in range(m):
                if cum[t, i] <= cum[t, j]:
                    assert h[t, i] >= h[t, j] - 1e-15


def test_stream_matches_vectorized():
    rng = np.random.default_rng(9)
    base = rng.random((5, 300))
    truth = rng.integers(0, 2, 300)
    fams = [parse_family("ordered-pairs", 5), parse_family("max:2", 5)]
    grid, names = competitor_grid(base, fams)
    a = online_fusion(grid, truth, LOG, seed=4, names=names)
    b = online_fusion_stream(base, fams, truth, LOG, seed=4, record_weights=True)
    assert (a.chosen == b.chosen).all()
    assert np.abs(a.weight_history - b.weight_history).max() < 1e-12
    assert b.names == names


def test_doubling_mode():
    out, x = noisy_competitors([0.1, 0.3, 0.45], 100, 0)
    run = online_fusion(out, x, HAM, doubling=True)
    h = run.weight_history
    assert h.shape == (101, 3)
    # restarts at the block starts 1, 3, 7, 15, ... (0-based rows)
    for start in (1, 3, 7, 15, 31, 63):
        assert np.allclose(h[start], 1 / 3)
    assert run.final_weights.argmax() == 0
    assert run.regret_bound > regret_bound(3, 100, 1)


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        online_fusion(np.zeros((3, 5)), np.zeros(4), HAM)
    with pytest.raises(ValidationError):
        online_fusion(np.zeros((3, 5)), np.zeros(5), HAM, eta=-1)


def test_seed_reproducible():
    out, x = noisy_competitors([0.2, 0.3], 200, 1)
    a = online_fusion(out, x, HAM, seed=7)
    b = online_fusion(out, x, HAM, seed=7)
    assert (a.chosen == b.chosen).all() and a.algorithm_loss == b.algorithm_loss


def test_exponential_weights_stable():
    w = exponential_weights(np.array([1e6, 1e6 + 1]), 1.0)
    assert w.sum() == pytest.approx(1.0) and w[0] > w[1]


def mean_regret(n, seeds=200):
    vals = []
    for s in range(seeds):
        out, x = noisy_competitors(np.linspace(0.2, 0.4, 10), n, s)
        run = online_fusion(out, x, HAM, seed=s, record_weights=False)
        vals.append((run.expected_loss - run.per_competitor_loss.min()) / n)
    return float(np.mean(vals))


def test_horizon_scaling():
    ratio = mean_regret(2000) / mean_regret(4000)
    assert 1.2 <= ratio <= 1.6


def test_underestimation_max_family():
    k, n = 4, 5000
    base, truth = underestimating_readings(k, n, seed=0)
    fam = parse_family(f"max:{k}", k)
    grid, names = competitor_grid(base, [fam])
    per = LOG(grid, truth[None, :]).sum(axis=1)
    assert per[k:].min() < per[:k].min()
    losses = []
    for s in range(200):
        run = online_fusion(grid, truth, LOG, seed=s, record_weights=False)
        losses.append(run.algorithm_loss / n)
    best = per[k:].min() / n
    sem = np.std(losses, ddof=1) / math.sqrt(len(losses))
    assert np.mean(losses) <= best + regret_bound(len(grid), n, LOG.d_max) + 3 * sem
