import math
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import signal

from towermon.errors import DataError, ParameterError
from towermon.modal import mac
from towermon.sim import (ExcitationSpec, Mode, ModalModel, analytic_covariances, build_model,
                          random_modal_system, rng, simulate, tower_channels)
from towermon.ssi import (CovarianceSequence, PoleEstimate, SSIParams, StabilizationDiagram,
                          StabilizedPole, StateSpaceRealization, Tolerances, block_toeplitz,
                          cluster_modes, default_block_rows, identify, output_covariances,
                          pole_parameters, poles_to_modal, read_modes, realize, stabilization,
                          write_modes)

T0 = datetime(2017, 11, 20, tzinfo=timezone.utc)


def brute_covariances(blocks, max_lag):
    """Direct double loop over samples, skipping products across gaps."""
    l = blocks[0].shape[1]
    out = np.zeros((max_lag + 1, l, l))
    for k in range(max_lag + 1):
        acc, count = np.zeros((l, l)), 0
        for b in blocks:
            for t in range(b.shape[0] - k):
                acc += np.outer(b[t + k], b[t])
                count += 1
        out[k] = acc / count
    return out


def true_poles(f, xi):
    order = np.argsort(f)
    return np.asarray(f)[order], np.asarray(xi)[order]


def exact_realization(g, n_modes, l=3, dt=0.01, R=None):
    A, C, f, xi = random_modal_system(g, n_modes, l, dt)
    n = A.shape[0]
    Bw = g.standard_normal((n, n))
    i = max(2 * n, 4)
    cov = analytic_covariances(A, C, Bw @ Bw.T, np.zeros((l, l)) if R is None else R, 2 * i)
    T = block_toeplitz(CovarianceSequence(cov, dt), i)
    return T, i, l, n, f, xi


# -- covariances -----------------------------------------------------------

def test_covariances_match_brute_force_with_gaps():
    g = np.random.default_rng(0)
    blocks = [g.standard_normal((120, 2)), g.standard_normal((75, 2))]
    cov = output_covariances(blocks, 6, 0.01)
    np.testing.assert_allclose(cov.matrices, brute_covariances(blocks, 6), rtol=1e-12, atol=1e-14)


def test_white_noise_covariances():
    # each lag is N(0, 1/N); the 3-sigma bound holds per lag with p = 0.9973
    N = 100_000
    y = np.random.default_rng(1).standard_normal((N, 1))
    cov = output_covariances(y, 400, 0.01)
    assert cov[0][0, 0] == pytest.approx(1.0, abs=0.02)
    inside = np.abs(cov.matrices[1:, 0, 0]) < 3 / np.sqrt(N)
    assert inside.mean() >= 0.98


def test_sinusoid_covariances():
    dt, f, a = 0.01, 1.3, 2.0
    t = np.arange(360_000) * dt
    y = (a * np.cos(2 * np.pi * f * t))[:, None]
    cov = output_covariances(y, 50, dt)
    k = np.arange(51)
    np.testing.assert_allclose(cov.matrices[:, 0, 0], a * a / 2 * np.cos(2 * np.pi * f * k * dt),
                               atol=1e-4)


def test_zero_signal_covariances():
    cov = output_covariances(np.zeros((1000, 3)), 10, 0.01)
    np.testing.assert_array_equal(cov.matrices, 0.0)


def test_covariances_need_enough_samples():
    with pytest.raises(ParameterError):
        output_covariances(np.zeros((100, 1)), 10, 0.01)


def test_lag0_is_symmetric_psd():
    y = np.random.default_rng(4).standard_normal((5000, 4)) @ np.random.default_rng(5).standard_normal((4, 4))
    L0 = output_covariances(y, 3, 0.01)[0]
    np.testing.assert_allclose(L0, L0.T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(L0)) > -1e-12


def test_covariance_error_converges_as_inverse_sqrt_n():
    g0 = np.random.default_rng(11)
    A, C, _, _ = random_modal_system(g0, 1, 2, 0.01, f_range=(0.05, 0.2), xi_range=(0.05, 0.1))
    n = A.shape[0]
    exact = analytic_covariances(A, C, np.eye(n), np.zeros((2, 2)), 10)
    sizes = [2 ** p for p in range(12, 17)]
    errs = np.zeros((16, len(sizes)))
    for s in range(16):
        w = rng(s, 99).standard_normal((sizes[-1] + 2000, n))
        _, y, _ = signal.dlsim((A, np.eye(n), C, np.zeros((2, n)), 0.01), w)
        y = y[2000:]
        for j, N in enumerate(sizes):
            est = output_covariances(y[:N], 10, 0.01).matrices
            errs[s, j] = np.linalg.norm(est - exact)
    slope = np.polyfit(np.log(sizes), np.log(np.median(errs, axis=0)), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.15)


# -- block Toeplitz --------------------------------------------------------

def test_block_toeplitz_unrolled():
    a, b, c = 2.0, 3.0, 5.0
    cov = CovarianceSequence(np.array([7.0, a, b, c]).reshape(4, 1, 1), 0.01)
    np.testing.assert_array_equal(block_toeplitz(cov, 2), [[b, a], [c, b]])


def test_block_toeplitz_dims_and_lag_check():
    cov = CovarianceSequence(np.zeros((20, 3, 3)), 0.01)
    assert block_toeplitz(cov, 10).shape == (30, 30)
    with pytest.raises(ParameterError):
        block_toeplitz(cov, 11)


def test_exact_toeplitz_rank_equals_model_order():
    T, i, l, n, _, _ = exact_realization(np.random.default_rng(2), 3)
    s = np.linalg.svd(T, compute_uv=False)
    assert np.sum(s > s[0] * 1e-10) == n


# -- realization -----------------------------------------------------------

@pytest.mark.parametrize("n_modes", [1, 2])
def test_realize_recovers_discrete_poles(n_modes):
    g = np.random.default_rng(10 + n_modes)
    A, C, f, xi = random_modal_system(g, n_modes, 2, 0.01)
    i = 6
    cov = analytic_covariances(A, C, np.eye(A.shape[0]), 0.1 * np.eye(2), 2 * i)
    ss = realize(block_toeplitz(CovarianceSequence(cov, 0.01), i), 2 * n_modes, i, 2, 0.01)
    est = np.sort_complex(np.linalg.eigvals(ss.A))
    true = np.sort_complex(np.linalg.eigvals(A))
    np.testing.assert_allclose(est, true, rtol=1e-8)
    assert not ss.weak_gap


def test_realize_order_zero_is_empty():
    T, i, l, _, _, _ = exact_realization(np.random.default_rng(3), 1)
    ss = realize(T, 0, i, l, 0.01)
    assert ss.order == 0 and poles_to_modal(ss) == []


def test_realize_flags_missing_gap():
    T, i, l, n, _, _ = exact_realization(np.random.default_rng(5), 2)
    assert realize(T, n + 2, i, l, 0.01).weak_gap
    assert not realize(T, n, i, l, 0.01).weak_gap


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_exact_covariances_round_trip(n_modes, seed):
    T, i, l, n, f, xi = exact_realization(np.random.default_rng(seed), n_modes)
    poles = poles_to_modal(realize(T, n, i, l, 0.01))
    tf, txi = true_poles(f, xi)
    assert len(poles) == n_modes
    np.testing.assert_allclose([p.frequency for p in poles], tf, rtol=1e-6)
    np.testing.assert_allclose([p.damping for p in poles], txi, rtol=1e-6)


# -- poles to modal --------------------------------------------------------

def _rotation(mu):
    return np.array([[mu.real, -mu.imag], [mu.imag, mu.real]])


def test_hand_constructed_pole():
    lam, dt = -0.06283 + 6.28288j, 0.01
    (p,) = poles_to_modal(StateSpaceRealization(_rotation(np.exp(lam * dt)), np.eye(2), dt))
    f_oracle = math.hypot(lam.real, lam.imag) / (2 * math.pi)
    xi_oracle = -lam.real / math.hypot(lam.real, lam.imag)
    assert p.frequency == pytest.approx(f_oracle, rel=1e-9)
    assert p.damping == pytest.approx(xi_oracle, rel=1e-9)
    assert round(p.frequency, 4) == 1.0 and round(p.damping, 4) == 0.01


def test_undamped_pole():
    assert pole_parameters(2j * np.pi)[1] == 0.0
    dt = 0.01
    (p,) = poles_to_modal(StateSpaceRealization(_rotation(np.exp(2j * np.pi * dt)), np.eye(2), dt))
    assert abs(p.damping) < 1e-15 and p.frequency == pytest.approx(1.0, rel=1e-12)


def test_conjugate_pair_gives_one_estimate_and_shape_normalized():
    mu = np.exp((-0.1 + 5j) * 0.01)
    C = np.array([[0.3, 0.1], [2.0, -1.0], [0.5, 0.5]])
    (p,) = poles_to_modal(StateSpaceRealization(_rotation(mu), C, 0.01))
    assert np.max(np.abs(p.shape)) == pytest.approx(1.0)
    assert p.shape[np.argmax(np.abs(p.shape))] == 1.0 + 0j


def test_negative_real_pole_discarded():
    A = np.diag([-0.5, 0.9])
    assert poles_to_modal(StateSpaceRealization(A, np.eye(2), 0.01)) == []


def test_defective_state_matrix():
    R = _rotation(np.exp((-0.1 + 5j) * 0.01))
    A = np.block([[R, np.eye(2)], [np.zeros((2, 2)), R]])
    with pytest.raises(DataError):
        poles_to_modal(StateSpaceRealization(A, np.ones((1, 4)), 0.01))


def test_build_model_round_trip_is_exact():
    modes = [Mode(1.0281, 0.009, [1, 0.5]), Mode(4.4858, 0.0188, [0.2, 1])]
    dm = build_model(modes, 0.01, "displacement")
    poles = poles_to_modal(StateSpaceRealization(dm.A, dm.C, 0.01))
    np.testing.assert_allclose([p.frequency for p in poles], [1.0281, 4.4858], rtol=1e-12)
    np.testing.assert_allclose([p.damping for p in poles], [0.009, 0.0188], rtol=1e-10)


# -- stabilization and clustering -----------------------------------------

def two_mode_record(seed=0, snr=10.0):
    ch = tower_channels(100.0)
    modes = [Mode(1.03, 0.01, [0.5, 0.05, 1.0, 0.1]), Mode(1.28, 0.01, [0.05, 0.5, 0.1, 1.0])]
    model = ModalModel(modes, 0.01, ch)
    rec = simulate(model, ExcitationSpec.white_noise(), 3600.0, seed, snr=snr)
    return np.column_stack([rec.segments(k)[0].samples for k in rec.keys])


def _aligned_fraction(diagram, f0, orders):
    hits = {p.order for p in diagram.stable_poles() if abs(p.frequency - f0) / f0 < 0.01}
    return len(hits & set(orders)) / len(orders)


@pytest.mark.xfail(strict=True, reason="damping drifts more than 5% between orders at SNR 10; "
                                       "see decisions ledger")
def test_stabilization_two_modes_default_tolerances():
    orders = tuple(range(2, 42, 2))
    diagram = stabilization(two_mode_record(), orders, default_block_rows(100.0), dt=0.01)
    high = [n for n in orders if n >= 4]
    for f0 in (1.03, 1.28):
        assert _aligned_fraction(diagram, f0, high) >= 0.8


def test_stabilization_two_modes_frequency_and_shape():
    orders = tuple(range(2, 42, 2))
    tol = Tolerances(dxi=math.inf)
    high = [n for n in orders if n >= 4]
    for seed in range(3):
        diagram = stabilization(two_mode_record(seed), orders, default_block_rows(100.0), tol,
                                dt=0.01)
        for f0 in (1.03, 1.28):
            assert _aligned_fraction(diagram, f0, high) >= 0.8


def test_two_mode_clusters():
    orders = tuple(range(2, 42, 2))
    diagram = stabilization(two_mode_record(), orders, default_block_rows(100.0), dt=0.01)
    modes = cluster_modes(diagram)
    assert len(modes) == 2
    np.testing.assert_allclose([m.frequency for m in modes], [1.03, 1.28], rtol=0.005)


def test_stabilization_white_noise_has_no_long_alignment():
    Y = np.random.default_rng(3).standard_normal((360_000, 4))
    orders = tuple(range(2, 42, 2))
    diagram = stabilization(Y, orders, default_block_rows(100.0), dt=0.01)
    stable = diagram.stable_poles()
    worst = max((_aligned_fraction(diagram, p.frequency, orders) for p in stable), default=0.0)
    assert worst <= 0.2
    assert cluster_modes(diagram) == []


def test_significance_gate_only_removes_weak_poles():
    Y = np.random.default_rng(3).standard_normal((360_000, 4))
    orders = tuple(range(2, 42, 2))
    ungated = stabilization(Y, orders, 200, Tolerances(significance=0.0), dt=0.01)
    gated = stabilization(Y, orders, 200, dt=0.01)
    assert ungated.stable_poles() and not gated.stable_poles()
    assert [p.pole.eigenvalue for p in gated.poles] == [p.pole.eigenvalue for p in ungated.poles]


def test_zero_tolerances_give_no_stable_pole():
    Y = two_mode_record(seed=1)
    d = stabilization(Y, range(2, 20, 2), 100, Tolerances(0.0, 0.0, 1.0), dt=0.01)
    assert d.poles and not d.stable_poles()


def test_stabilization_orders_must_increase():
    with pytest.raises(ParameterError):
        stabilization(np.zeros((5000, 2)), (4, 2), 10, dt=0.01)


def _pole(f, xi=0.01, shape=(1, 0.5), order=2):
    return PoleEstimate(f, xi, np.array(shape, complex), order)


def test_cluster_single_pole_verbatim_and_empty():
    p = _pole(1.03, 0.012, order=8)
    d = StabilizationDiagram([StabilizedPole(p, True, True, True)], (8,))
    (m,) = cluster_modes(d, min_count=1)
    assert (m.frequency, m.damping, m.order) == (1.03, 0.012, 8)
    np.testing.assert_array_equal(m.shape, p.shape)
    assert cluster_modes(StabilizationDiagram([], ())) == []


def test_cluster_separates_two_alignments():
    poles = []
    for n in range(4, 24, 2):
        poles.append(StabilizedPole(_pole(1.03 * (1 + 1e-4 * n), 0.01, (1, 0.1), n), True, True, True))
        poles.append(StabilizedPole(_pole(1.28 * (1 - 1e-4 * n), 0.012, (0.1, 1), n), True, True, True))
    d = StabilizationDiagram(poles, tuple(range(2, 24, 2)))
    modes = cluster_modes(d)
    assert len(modes) == 2
    assert modes[0].frequency == pytest.approx(np.median([p.pole.frequency for p in poles[::2]]))


def test_identify_matches_truth_shapes():
    model_shapes = np.array([[0.5, 0.05, 1.0, 0.1], [0.05, 0.5, 0.1, 1.0]])
    _, modes = identify(two_mode_record(seed=7), 100.0)
    assert len(modes) == 2
    for m, s in zip(modes, model_shapes):
        assert mac(m.shape, s) >= 0.95


def test_scaling_channels_leaves_modes_unchanged():
    Y = two_mode_record(seed=2)
    _, a = identify(Y, 100.0)
    _, b = identify(Y * 37.5, 100.0)
    assert len(a) == len(b)
    for ma, mb in zip(a, b):
        assert mb.frequency == pytest.approx(ma.frequency, rel=1e-9)
        assert mb.damping == pytest.approx(ma.damping, rel=1e-9)
        np.testing.assert_allclose(mb.shape, ma.shape, atol=1e-9)


def test_default_block_rows():
    assert default_block_rows(100.0) == 200
    assert default_block_rows(20.0) == 80
    assert SSIParams().orders == tuple(range(2, 42, 2))


def test_modes_csv_round_trip(tmp_path):
    shape = np.array([1 + 0j, 0.5 - 0.25j])
    from towermon.ssi import ModeEstimate
    windows = [[ModeEstimate(1.0281, 0.009, shape, 12, T0)], []]
    write_modes(tmp_path / "m.csv", windows, 2, comment="config_digest=x")
    ((start, (m,)),) = read_modes(tmp_path / "m.csv")
    assert start == T0 and m.frequency == 1.0281 and m.damping == 0.009 and m.order == 12
    np.testing.assert_array_equal(m.shape, shape)
