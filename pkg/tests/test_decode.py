import math
import warnings

import numpy as np
import pytest

from graphsampling.decode import (
    ErrorDecomposition,
    RegularizerSpec,
    bound_efficient_inband,
    bound_efficient_outband,
    bound_standard,
    decode_objective,
    decompose_error,
    efficient_decode,
    m_max_bounds,
    optimal_gamma_inband,
    save_reconstruction,
    standard_decode,
)
from graphsampling.sample import ReweightedOperator, SampleSet, draw_with_replacement, measure, measure_with_noise
from graphsampling.signals import load_signal, random_bandlimited
from graphsampling.spectral import optimal_distribution, rip_constants

M = 200


def _trial(basis, p, t, sigma=0.0):
    rng = np.random.default_rng([2024, t])
    x = random_bandlimited(basis, rng)
    omega = draw_with_replacement(p, M, rng)
    return x, omega, measure(x, omega, sigma, rng)


@pytest.fixture(scope="module")
def p_opt(c5):
    return optimal_distribution(c5[2])


def test_standard_noiseless_exact(c5, p_opt):
    _, _, b = c5
    for t in range(50):
        x, omega, y = _trial(b, p_opt, t)
        assert rip_constants(b, omega, p_opt)[0] < 1
        res = standard_decode(b, omega, y)
        assert res.ok and not res.degenerate
        assert np.linalg.norm(res.signal - x) <= 1e-8 * np.linalg.norm(x)


def test_standard_noisy_bound(c5, p_opt):
    _, _, b = c5
    for t in range(100):
        x, omega, y = _trial(b, p_opt, t, sigma=0.01)
        delta, _ = rip_constants(b, omega, p_opt)
        wn = np.linalg.norm(ReweightedOperator(omega).apply(y.values - x[omega.indices]))
        err = np.linalg.norm(standard_decode(b, omega, y).signal - x)
        assert err <= bound_standard(delta, M, wn)


def test_standard_adversarial_noise(c5, p_opt, rng):
    _, _, b = c5
    x, omega, _ = _trial(b, p_opt, 0)
    z0 = b.vectors @ rng.normal(size=b.k)
    y = measure_with_noise(x, omega, z0[omega.indices])
    np.testing.assert_allclose(standard_decode(b, omega, y).signal, x + z0, atol=1e-8)


def test_standard_residual_orthogonal(c5, p_opt):
    _, _, b = c5
    x, omega, y = _trial(b, p_opt, 3, sigma=0.05)
    res = standard_decode(b, omega, y)
    w = 1 / np.sqrt(omega.probs)
    A = b.vectors[omega.indices] * w[:, None]
    r = w * (res.signal[omega.indices] - y.values)
    assert np.abs(A.T @ r).max() <= 1e-8
    assert res.residual <= 1e-8


def test_standard_rank_deficient(c5, p_opt):
    _, _, b = c5
    omega = draw_with_replacement(p_opt, 6, seed=1)
    y = measure(random_bandlimited(b, 0), omega)
    with pytest.warns(RuntimeWarning):
        res = standard_decode(b, omega, y)
    assert res.degenerate
    A = b.vectors[omega.indices] / np.sqrt(omega.probs)[:, None]
    coef = b.vectors.T @ res.signal
    # minimum-norm solution lies in the row space of the sampled basis
    np.testing.assert_allclose(coef, np.linalg.pinv(A) @ (y.values / np.sqrt(omega.probs)), atol=1e-10)


def test_efficient_residual_and_accuracy(c5, p_opt):
    _, L, b = c5
    for t in range(5):
        x, omega, y = _trial(b, p_opt, t)
        res = efficient_decode(L, omega, y, RegularizerSpec(4, 1e-3))
        assert res.ok and res.residual <= 1e-8
        assert np.linalg.norm(res.signal - x) <= 1e-2 * np.linalg.norm(x)


@pytest.mark.parametrize("power", [1, 2, 4])
@pytest.mark.parametrize("sigma", [0.0, 0.01])
def test_efficient_bounds_hold(c5, p_opt, power, sigma):
    _, L, b = c5
    lk, lk1 = b.eigenvalues[-1], b.lambda_next
    for t in range(10):
        x, omega, y = _trial(b, p_opt, t, sigma)
        op = ReweightedOperator(omega)
        wn = np.linalg.norm(op.apply(y.values - x[omega.indices]))
        delta, _ = rip_constants(b, omega, p_opt)
        for gamma in [1e-3, 1e-1, 10.0]:
            e = decompose_error(b, efficient_decode(L, omega, y, RegularizerSpec(power, gamma)).signal, x)
            assert e.outband <= bound_efficient_outband(gamma, lk, lk1, power, wn, 1.0)
            assert e.inband <= bound_efficient_inband(delta, M, gamma, lk, lk1, power, op.operator_norm(), wn, 1.0)


def test_cg_objective_monotone(c5, p_opt):
    _, L, b = c5
    x, omega, y = _trial(b, p_opt, 1, sigma=0.01)
    reg = RegularizerSpec(2, 0.1)
    values = []
    efficient_decode(L, omega, y, reg, callback=lambda z: values.append(decode_objective(L, omega, y, reg, z)))
    assert len(values) > 5
    assert all(b <= a + 1e-9 * abs(a) for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("power", [1, 2, 4])
def test_small_gamma_limit_monotone(c5, p_opt, power):
    _, L, b = c5
    x, omega, y = _trial(b, p_opt, 2)
    gammas = [1e2, 1e1, 1.0, 1e-1, 1e-2, 1e-3, 1e-4]
    errs = [np.linalg.norm(efficient_decode(L, omega, y, RegularizerSpec(power, g)).signal - x) for g in gammas]
    for prev, cur in zip(errs, errs[1:]):
        assert cur <= 2 * prev + 1e-9


def test_higher_power_not_worse(c5, p_opt):
    _, L, b = c5
    gammas = [1e-4, 1e-3, 1e-2, 1e-1, 1.0]
    for t in range(3):
        x, omega, y = _trial(b, p_opt, t)
        best = [
            min(np.linalg.norm(efficient_decode(L, omega, y, RegularizerSpec(l, g)).signal - x) for g in gammas)
            for l in (1, 2, 4)
        ]
        assert best[0] >= best[1] >= best[2]


def test_efficient_nonconvergence_flag(c5, p_opt):
    _, L, b = c5
    _, omega, y = _trial(b, p_opt, 0)
    with pytest.warns(RuntimeWarning):
        res = efficient_decode(L, omega, y, RegularizerSpec(4, 1.0), max_iters=2)
    assert not res.ok and res.iterations == 2 and res.residual > 1e-10


def test_gamma_must_be_positive():
    with pytest.raises(ValueError):
        RegularizerSpec(1, 0.0)
    with pytest.raises(ValueError):
        RegularizerSpec(0, 1.0)
    with pytest.raises(ValueError):
        RegularizerSpec(1.5, 1.0)


def test_regularizer_g_nondecreasing():
    t = np.linspace(0, 5, 50)
    for l in (1, 2, 4):
        assert np.all(np.diff(RegularizerSpec(l, 1.0).g(t)) >= 0)


def test_decompose_examples(c5, rng):
    _, _, b = c5
    x = random_bandlimited(b, 0)
    e = decompose_error(b, x, x)
    assert max(e.total, e.inband, e.outband) <= 1e-10
    v = rng.normal(size=b.n)
    v -= b.vectors @ (b.vectors.T @ v)
    e = decompose_error(b, v, x)
    assert e.inband == pytest.approx(np.linalg.norm(x), abs=1e-10)
    assert e.outband == pytest.approx(np.linalg.norm(v), abs=1e-10)


def test_decompose_matches_dense_projector(rng):
    from graphsampling.graph import build_laplacian, gen_community
    from graphsampling.spectral import partial_eigendecomposition

    b = partial_eigendecomposition(build_laplacian(gen_community([30, 30, 40], 0.4, 0.02, seed=5)), 10)
    P = b.vectors @ b.vectors.T
    xs, xt = rng.normal(size=(2, 100))
    e = decompose_error(b, xs, xt)
    assert e.inband == pytest.approx(np.linalg.norm(P @ xs - xt), abs=1e-10)
    assert e.outband == pytest.approx(np.linalg.norm(xs - P @ xs), abs=1e-10)
    # orthogonal split needs a bandlimited reference
    xb = P @ xt
    e = decompose_error(b, xs, xb)
    assert e.total**2 == pytest.approx(e.inband**2 + e.outband**2, abs=1e-9)


def test_bound_zero_noise():
    assert bound_standard(0.3, 50, 0.0) == 0.0
    lk, lk1, l, gamma, mm, m, d = 2.0, 7.0, 4, 1e-3, 30.0, 200, 0.4
    expected = (mm * math.sqrt((lk / lk1) ** l) + math.sqrt(gamma * lk**l)) / math.sqrt(m * (1 - d))
    assert bound_efficient_inband(d, m, gamma, lk, lk1, l, mm, 0.0, 1.0) == pytest.approx(expected, rel=1e-14)


def test_bound_validation():
    with pytest.raises(ValueError):
        bound_efficient_inband(0.5, 10, 1.0, 0.0, 0.0, 1, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        bound_efficient_outband(1.0, 0.0, 0.0, 2, 1.0, 1.0)
    with pytest.raises(ValueError):
        bound_standard(1.0, 10, 1.0)
    with pytest.raises(ValueError):
        bound_standard(0.5, 0, 1.0)


@pytest.mark.parametrize("wn,xn", [(0.1, 1.0), (2.0, 1.0), (0.5, 3.0)])
def test_optimal_gamma_matches_grid(wn, xn):
    lk, lk1, l, mm = 2.2, 7.5, 4, 40.0
    gammas = np.logspace(-10, 6, 20001)
    vals = [bound_efficient_inband(0.5, 200, g, lk, lk1, l, mm, wn, xn) for g in gammas]
    g_grid = gammas[int(np.argmin(vals))]
    g_star = optimal_gamma_inband(lk, lk1, l, mm, wn, xn)
    step = gammas[1] / gammas[0]
    assert g_star / step <= g_grid <= g_star * step


def test_optimal_gamma_proportional_to_noise():
    a = optimal_gamma_inband(1.0, 3.0, 2, 10.0, 0.1, 1.0)
    b = optimal_gamma_inband(1.0, 3.0, 2, 10.0, 0.2, 1.0)
    assert b == pytest.approx(2 * a)


def test_m_max_bounds(c5, p_opt):
    s = SampleSet(np.array([4, 4, 7]), p_opt.p[[4, 4, 7]], p_opt.n)
    mb = m_max_bounds(s, p_opt)
    assert mb["exact"] >= mb["realized"]
    assert mb["exact"] == pytest.approx(ReweightedOperator(s).operator_norm())
    assert mb["global"] >= mb["realized"]


def test_save_reconstruction(tmp_path):
    x = np.random.default_rng(0).normal(size=9)
    save_reconstruction(x, tmp_path / "r.csv")
    np.testing.assert_array_equal(load_signal(tmp_path / "r.csv"), x)
