import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitmemory.errors import UndefinedMetricError
from eitmemory.quadstats import (
    MomentAccumulator,
    QuadratureSamples,
    QuadratureStats,
    classical_bound,
    classify,
    conditional_variances,
    ensemble_stats,
    linear_loss_curve,
    paired_stats,
    transfer_coefficients,
    tv_metrics,
    write_tv_table,
)


def theory(mean, var, cov=None, stage="input"):
    """Population-level statistics for analytic checks."""
    return QuadratureStats(mean[0], mean[1], var[0], var[1], 10**6, None if cov is None else cov[0], None if cov is None else cov[1], stage)


def beamsplitter(eta, alpha=(3.0, 3.0), excess=0.0):
    r = math.sqrt(eta)
    inp = theory(alpha, (1.0, 1.0))
    out = theory((r * alpha[0], r * alpha[1]), (1.0 + excess, 1.0 + excess), (r, r), "retrieved")
    return inp, out


def test_constant_samples():
    s = ensemble_stats(QuadratureSamples(np.full(5, 2.5), np.full(5, -1.0)))
    assert (s.mean_X, s.mean_Y, s.var_X, s.var_Y) == (2.5, -1.0, 0.0, 0.0)


def test_unit_normal_variance_band():
    rng = np.random.default_rng(1234)
    s = ensemble_stats(QuadratureSamples(rng.standard_normal(2000), rng.standard_normal(2000)))
    assert abs(s.var_X - 1) < 3 * math.sqrt(2 / 1999)
    assert abs(s.var_Y - 1) < 3 * math.sqrt(2 / 1999)


def test_needs_two_samples():
    with pytest.raises(UndefinedMetricError):
        ensemble_stats(QuadratureSamples([1.0], [1.0]))


def test_non_finite_samples_rejected():
    with pytest.raises(ValueError):
        QuadratureSamples([1.0, np.inf], [0.0, 0.0])


def test_pairing_is_enforced():
    a = QuadratureSamples(np.zeros(4), np.zeros(4), "input", [0, 1, 2, 3])
    b = QuadratureSamples(np.zeros(4), np.zeros(4), "retrieved", [0, 1, 3, 2])
    with pytest.raises(ValueError):
        paired_stats(a, b)
    with pytest.raises(ValueError):
        conditional_variances(ensemble_stats(a), ensemble_stats(a))


def test_identical_output_has_zero_conditional_variance():
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal(100), rng.standard_normal(100)
    i, o = paired_stats(QuadratureSamples(x, y), QuadratureSamples(x, y, "retrieved"))
    vx, vy, v = conditional_variances(i, o)
    assert abs(vx) < 1e-12 and abs(vy) < 1e-12 and v < 1e-12


def test_independent_output_keeps_its_variance():
    i = theory((1, 1), (1, 1))
    o = theory((0, 0), (1.3, 0.8), (0.0, 0.0), "retrieved")
    assert conditional_variances(i, o)[:2] == (1.3, 0.8)


def test_beamsplitter_values():
    v = conditional_variances(*beamsplitter(0.01))[2]
    assert v == pytest.approx(0.99, abs=1e-12)
    v = conditional_variances(*beamsplitter(0.01, excess=0.02))[2]
    assert v == pytest.approx(1.01, abs=1e-12)


def test_zero_input_variance_undefined():
    with pytest.raises(UndefinedMetricError):
        conditional_variances(theory((1, 1), (0.0, 1.0)), theory((0, 0), (1, 1), (0, 0), "retrieved"))


def test_transfer_examples():
    i = theory((3.0, 3.0), (1, 1))
    assert transfer_coefficients(i, theory((3.0, 3.0), (1, 1), (1, 1), "retrieved"))[2] == pytest.approx(2.0)
    assert transfer_coefficients(*beamsplitter(0.01))[2] == pytest.approx(0.02)
    assert transfer_coefficients(*beamsplitter(0.21**2))[2] == pytest.approx(0.0882)
    assert round(transfer_coefficients(*beamsplitter(0.21**2))[2], 2) == 0.09


def test_transfer_undefined_without_input_mean():
    with pytest.raises(UndefinedMetricError):
        transfer_coefficients(theory((3.0, 0.0), (1, 1)), theory((1, 1), (1, 1), (0, 0)))


@pytest.mark.parametrize("T, V", [(0.0, 1.0), (2.0, 0.0), (0.08, 0.96)])
def test_linear_loss(T, V):
    assert linear_loss_curve(T) == pytest.approx(V, abs=1e-15)


def test_linear_loss_domain():
    with pytest.raises(ValueError):
        linear_loss_curve(2.5)


def test_classical_bound_values():
    assert classical_bound(0.0) == 1.0
    # measure-and-resend algebra: g^2 = T/(1-2T) per quadrature with T_q = T/2
    for T in (0.02, 0.08):
        g2 = (T / 2) / (1 - T)
        assert classical_bound(T) == pytest.approx(1 + g2, rel=1e-12)
    assert round(classical_bound(0.02), 4) == 1.0102
    assert round(classical_bound(0.08), 4) == 1.0435
    with pytest.raises(ValueError):
        classical_bound(1.0)


@pytest.mark.parametrize("T, V, region", [(0.02, 0.99, "quantum"), (0.08, 1.06, "classical"), (2.0, 0.0, "quantum")])
def test_classify_examples(T, V, region):
    assert classify(T, V) == region


def test_classify_tolerance_band():
    b = classical_bound(0.05)
    assert classify(0.05, b + 0.005, tolerance=0.01) == "at-boundary"
    assert classify(0.05, b - 0.005, tolerance=0.01) == "at-boundary"


@given(st.floats(1e-6, 0.999))
def test_classical_bound_above_loss_line(T):
    assert classical_bound(T) > linear_loss_curve(T)


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 20.0))
@settings(max_examples=25, deadline=None)
def test_benchmark_is_scale_invariant(seed, factor):
    rng = np.random.default_rng(seed)
    x, y = 3 + rng.standard_normal(200), 3 + rng.standard_normal(200)
    ox, oy = 0.3 * x + rng.standard_normal(200), 0.3 * y + rng.standard_normal(200)
    inp, out = QuadratureSamples(x, y), QuadratureSamples(ox, oy, "retrieved")
    a = tv_metrics(*paired_stats(inp, out))
    b_in, b_out = paired_stats(inp.scaled(factor), out.scaled(factor))
    b = tv_metrics(b_in, b_out)
    assert b.T == pytest.approx(a.T, rel=1e-9)
    # V is in shot units, so it rescales with the variance; relative to the input variance it is invariant
    assert b.V / b_in.var_X == pytest.approx(a.V / paired_stats(inp, out)[0].var_X, rel=1e-9)


@given(st.integers(0, 2**32 - 1), st.integers(3, 300))
@settings(max_examples=40, deadline=None)
def test_conditional_variance_is_regression_residual(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.normal(2.0, 1.3, n)
    y = rng.normal(-1.0, 0.7, n)
    ox = 0.4 * x + rng.normal(0, 1, n)
    oy = -0.2 * y + rng.normal(0, 1, n)
    i, o = paired_stats(QuadratureSamples(x, y), QuadratureSamples(ox, oy, "retrieved"))
    vx, vy, _ = conditional_variances(i, o)
    for a, b, v in ((x, ox, vx), (y, oy, vy)):
        design = np.column_stack([np.ones(n), a])
        coef, *_ = np.linalg.lstsq(design, b, rcond=None)
        resid = b - design @ coef
        assert v == pytest.approx(resid @ resid / (n - 1), rel=1e-10, abs=1e-12)


def test_pure_loss_family_sits_on_loss_line():
    rng = np.random.default_rng(77)
    n = 2000
    for eta in (0.01, 0.1, 0.3):
        x, y = 5 + rng.standard_normal(n), 5 + rng.standard_normal(n)
        r, s = math.sqrt(eta), math.sqrt(1 - eta)
        ox, oy = r * x + s * rng.standard_normal(n), r * y + s * rng.standard_normal(n)
        m = tv_metrics(*paired_stats(QuadratureSamples(x, y), QuadratureSamples(ox, oy, "retrieved")))
        assert abs(m.V - linear_loss_curve(m.T)) < 3 * math.sqrt(2 / n)
        # at eta = 0.01 the quantum margin (0.02) is below one standard error of V
        assert m.region == ("at-boundary" if eta == 0.01 else "quantum")


@given(st.lists(st.integers(1, 40), min_size=1, max_size=6), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_accumulator_merges_like_one_pass(sizes, seed):
    rng = np.random.default_rng(seed)
    batches = [rng.normal(3, 2, (k, 4)) for k in sizes]
    whole = np.vstack(batches)
    acc = MomentAccumulator(4)
    parts = [MomentAccumulator(4).update(b) for b in batches]
    for p in reversed(parts):
        acc.merge(p)
    np.testing.assert_allclose(acc.mean, whole.mean(axis=0), rtol=1e-12, atol=1e-12)
    if len(whole) > 1:
        np.testing.assert_allclose(acc.covariance(), np.cov(whole.T), rtol=1e-10, atol=1e-12)


def test_tv_table(tmp_path):
    i, o = beamsplitter(0.01)
    m = tv_metrics(i, o)
    path = tmp_path / "tv.csv"
    write_tv_table(path, [m.row()])
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["T", "V", "V_classical", "V_loss", "region"]
    assert float(rows[0]["V_loss"]) == pytest.approx(linear_loss_curve(float(rows[0]["T"])))
    assert float(rows[0]["V_classical"]) == pytest.approx(classical_bound(float(rows[0]["T"])))
    assert rows[0]["region"] == "quantum"
