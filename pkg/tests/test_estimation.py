import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isac_track.config import ScenarioConfig
from isac_track.dynamics import MotionModel, measurement_cov, measurement_jacobian, to_polar
from isac_track.estimation import (NumericalError, bandwidth_blocks, data_fim, ekf_step,
                                   ekf_update, pcrb_trace, posterior_pcrb, prior_fim,
                                   scalarize, scalarize_bandwidth, scalarize_power)
from isac_track.oracles import dense_trace

seeds = st.integers(0, 2**32 - 1)


def _spd(rng, n=4, floor=0.1):
    a = rng.standard_normal((n, n))
    return a @ a.T + floor * np.eye(n)


def _target(rng):
    d, th = rng.uniform(5, 200), rng.uniform(-np.pi / 2, np.pi / 2)
    return np.array([d * np.cos(th), d * np.sin(th), *rng.uniform(-8, 8, 2)])


def test_prior_fim_identity_and_loss(rng):
    j = _spd(rng)
    assert np.allclose(prior_fim(j, np.eye(4), np.zeros((4, 4))), j)
    f = MotionModel.build(0.01, 1.0)
    jp = prior_fim(j, f.transition, f.process_cov)
    finv = np.linalg.inv(f.transition)
    assert np.max(np.abs(jp - jp.T)) <= 1e-12 * np.abs(jp).max()
    assert np.linalg.eigvalsh(finv.T @ j @ finv - jp).min() > 0
    with pytest.raises(NumericalError, match="cond"):
        prior_fim(np.diag([1.0, 1, 1, 0]), np.eye(4), np.zeros((4, 4)))


def test_data_fim_examples(rng):
    cov = np.diag([0.3, 0.02])
    assert not np.any(data_fim(np.zeros((2, 4)), cov))
    q = rng.standard_normal((2, 4))
    assert np.linalg.matrix_rank(data_fim(q, cov)) <= 2
    assert np.allclose(data_fim(q, cov / 2), 2 * data_fim(q, cov))


def test_pcrb_trace_examples(rng):
    assert pcrb_trace(np.eye(4)) == pytest.approx(4.0)
    assert pcrb_trace(np.diag([1.0, 2, 4, 8])) == pytest.approx(1.875)
    j = _spd(rng)
    assert pcrb_trace(3 * j) == pytest.approx(pcrb_trace(j) / 3)
    with pytest.raises(NumericalError):
        pcrb_trace(np.zeros((4, 4)))


def test_posterior_woodbury_matches_information_form(rng):
    for _ in range(50):
        c = np.linalg.inv(_spd(rng))
        q = rng.standard_normal((2, 4))
        cov = np.diag(rng.uniform(0.01, 1, 2))
        ref = np.linalg.inv(np.linalg.inv(c) + data_fim(q, cov))
        assert np.allclose(posterior_pcrb(c, q, cov), ref, rtol=1e-8, atol=1e-12)


@given(seeds)
def test_scalarization_identity_rank1(seed):
    rng = np.random.default_rng(seed)
    e = _spd(rng)
    v = rng.standard_normal(4)
    sc = scalarize(e, np.outer(v, v))
    assert np.all(sc.a > 0) and np.all(sc.b >= 0)
    assert np.sum(sc.b > 1e-12 * sc.b.max()) == 1
    assert np.allclose(sc.basis.T @ sc.basis, np.eye(4), atol=1e-10)
    for n in (0, 1, 10, 264):
        ref = dense_trace(e, np.outer(v, v), n * n)
        assert abs(sc.value(n * n) - ref) <= 1e-8 * ref
    assert sc.value(0.0) == pytest.approx(np.trace(np.linalg.inv(e)), rel=1e-10)


def test_scalarize_bandwidth_matches_posterior(rng):
    cfg = ScenarioConfig()
    for _ in range(100):
        xi = _target(rng)
        q = measurement_jacobian(xi)
        c_prior = np.linalg.inv(_spd(rng)) * 10
        gain = 10 ** rng.uniform(-12, -6)
        sc = scalarize_bandwidth(np.linalg.inv(c_prior), q, gain, cfg)
        for n in (1, 10, 70, 264):
            ref = np.trace(posterior_pcrb(c_prior, q, measurement_cov(gain, n, cfg)))
            assert sc.value(n * n) == pytest.approx(ref, rel=1e-8)
        e, f = bandwidth_blocks(np.linalg.inv(c_prior), q, gain, cfg)
        assert f.shape == (4, 1)


def test_scalarize_power_matches_dense(rng):
    cfg = ScenarioConfig()
    for _ in range(100):
        q = measurement_jacobian(_target(rng))
        jp = _spd(rng)
        cov_unit = measurement_cov(1e-8, int(rng.integers(70, 265)), cfg)
        sc = scalarize_power(jp, q, cov_unit)
        assert sc.value(0.0) == pytest.approx(np.trace(np.linalg.inv(jp)), rel=1e-10)
        for p in (0.1, 1.0, 100.0):
            ref = np.trace(np.linalg.inv(jp + data_fim(q, cov_unit / p)))
            assert sc.value(p) == pytest.approx(ref, rel=1e-8)
        vals = sc.value(np.linspace(0, 200, 50))
        assert np.all(np.diff(vals) <= 0)
        assert np.all(sc.slope(np.linspace(0, 200, 5)) <= 0)


def test_scalarize_rejects_indefinite():
    with pytest.raises(NumericalError):
        scalarize(-np.eye(4), np.eye(4))


def test_posterior_monotone_in_resources(rng):
    cfg = ScenarioConfig()
    xi = _target(rng)
    q = measurement_jacobian(xi)
    c = np.linalg.inv(_spd(rng))
    tr = [[np.trace(posterior_pcrb(c, q, measurement_cov(g, n, cfg))) for n in (70, 120, 200, 264)]
          for g in (1e-10, 1e-9, 1e-8)]
    tr = np.array(tr)
    assert np.all(np.diff(tr, axis=0) < 0) and np.all(np.diff(tr, axis=1) < 0)


def test_ekf_infinite_noise_keeps_prediction(rng):
    model = MotionModel.build(0.01, 1.0)
    est, cov = _target(rng), np.diag([4.0, 4, 1, 1])
    z = np.array(to_polar(est)) + 1.0
    x, p = ekf_step(est, cov, model, z, np.diag([1e30, 1e30]))
    assert np.allclose(x, model.transition @ est, atol=1e-12)
    assert np.allclose(p, model.transition @ cov @ model.transition.T + model.process_cov)


def test_ekf_exact_measurement_reduces_error(rng):
    model = MotionModel.build(0.01, 0.0)
    for _ in range(100):
        truth = _target(rng)
        cov = np.diag([1.0, 1.0, 0.25, 0.25])
        est = truth + rng.multivariate_normal(np.zeros(4), cov)
        true_next = model.transition @ truth
        z = np.array(to_polar(true_next))
        x, _ = ekf_step(est, cov, model, z, np.diag([1e-8, 1e-10]))
        pred = model.transition @ est
        assert np.linalg.norm(x[:2] - true_next[:2]) < np.linalg.norm(pred[:2] - true_next[:2])


def test_iterated_update_refines(rng):
    truth = np.array([40.0, 10.0, 1.0, 0.0])
    pred = truth + np.array([6.0, -8.0, 0, 0])
    cov = np.diag([100.0, 100, 25, 25])
    z = np.array(to_polar(truth))
    sig = np.diag([1e-6, 1e-8])
    one, _ = ekf_update(pred, cov, z, sig, 1)
    many, _ = ekf_update(pred, cov, z, sig, 10)
    assert np.linalg.norm(many[:2] - truth[:2]) < np.linalg.norm(one[:2] - truth[:2])
    assert np.linalg.norm(many[:2] - truth[:2]) < 1e-2


def test_ekf_covariance_symmetric_psd_1000_steps():
    rng = np.random.default_rng(77)
    model = MotionModel.build(0.01, 0.5)
    cfg = ScenarioConfig()
    truth = np.array([60.0, 20.0, 3.0, -1.0])
    est, cov = truth + [2.0, -2.0, 0.5, 0.5], np.diag([100.0, 100, 25, 25])
    pcrb = cov.copy()
    for _ in range(1000):
        truth = model.transition @ truth + rng.multivariate_normal(np.zeros(4), model.process_cov)
        sig = measurement_cov(10 ** rng.uniform(-10, -7), int(rng.integers(70, 265)), cfg)
        z = np.array(to_polar(truth)) + rng.standard_normal(2) * np.sqrt(np.diag(sig))
        est, cov = ekf_step(est, cov, model, z, sig)
        assert np.max(np.abs(cov - cov.T)) <= 1e-10 * max(1.0, np.abs(cov).max())
        assert np.linalg.eigvalsh(cov).min() >= -1e-10
        c_prior = model.transition @ pcrb @ model.transition.T + model.process_cov
        pcrb = posterior_pcrb(c_prior, measurement_jacobian(model.transition @ est), sig)
        assert np.linalg.eigvalsh(np.linalg.inv(pcrb)).min() > 0


def test_bandwidth_scalarization_stiff_bearing_row():
    # a very close target: bearing information dwarfs the prior by ~1e18
    cfg = ScenarioConfig()
    q = measurement_jacobian(np.array([1.5, 0.4, 0.0, 0.0]))
    c_prior = np.diag([100.0, 100.0, 25.0, 25.0])
    gain = 1e-2
    sc = scalarize_bandwidth(np.linalg.inv(c_prior), q, gain, cfg, c_prior=c_prior)
    for n in (1, 70, 264):
        ref = np.trace(posterior_pcrb(c_prior, q, measurement_cov(gain, n, cfg)))
        assert sc.value(n * n) == pytest.approx(ref, rel=1e-8)
