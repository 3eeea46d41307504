import numpy as np
import pytest

from nvs4d.diffusion import (
    FilmParams,
    NoiseSchedule,
    alpha_sigma,
    logsnr,
    masked_film,
    v_convert,
    v_from_eps,
    v_target,
)
from nvs4d.errors import InvalidInput

SCHED = NoiseSchedule()


def test_logsnr_endpoints_and_monotone():
    assert logsnr(SCHED, 0.0) == 15.0
    assert logsnr(SCHED, 1.0) == -15.0
    lam = logsnr(SCHED, np.linspace(0, 1, 1000))
    assert np.all(np.diff(lam) < 0)
    assert abs(logsnr(SCHED, 0.5)) < 1e-12  # symmetric range puts zero at the midpoint


def test_logsnr_rejects_out_of_range():
    with pytest.raises(InvalidInput):
        logsnr(SCHED, 1.5)
    with pytest.raises(InvalidInput):
        NoiseSchedule(3.0, 1.0)


def test_alpha_sigma_identity(rng):
    lam = rng.uniform(-20, 20, 1000)
    a, s = alpha_sigma(lam)
    np.testing.assert_allclose(a**2 + s**2, 1.0, atol=1e-12)
    np.testing.assert_allclose(np.log(a**2 / s**2), lam, atol=1e-9)


def test_v_convert_recovers_clean_signal(rng):
    for lam in (-8.0, 0.0, 3.0, 12.0):
        a, s = alpha_sigma(lam)
        x, eps = rng.normal(size=(2, 5))
        z = a * x + s * eps
        x_hat, eps_hat = v_convert(z, v_target(x, eps, lam), lam)
        np.testing.assert_allclose(x_hat, x, atol=1e-12)
        np.testing.assert_allclose(eps_hat, eps, atol=1e-12)
        np.testing.assert_allclose(v_from_eps(z, eps, lam), v_target(x, eps, lam), atol=1e-9)


def test_v_convert_round_trip_and_noiseless_limit(rng):
    for _ in range(100):
        z, v = rng.normal(size=(2, 4))
        lam = rng.uniform(-15, 15)
        a, s = alpha_sigma(lam)
        x_hat, eps_hat = v_convert(z, v, lam)
        np.testing.assert_allclose(a * x_hat + s * eps_hat, z, atol=1e-12)
    z, v = rng.normal(size=(2, 4))
    np.testing.assert_allclose(v_convert(z, v, 60.0)[0], z, atol=1e-12)


def test_masked_film_identity_bit_exact(rng):
    params = FilmParams.random(rng, 4, 8)
    h = rng.normal(size=(1000, 8)) * 10.0 ** rng.integers(-300, 300, size=(1000, 8))
    h[0, :3] = [-0.0, 0.0, np.inf]
    out = masked_film(h, None, params)
    assert out.tobytes() == h.tobytes()
    e = rng.normal(size=(1000, 4))
    present = rng.random(1000) < 0.5
    out = masked_film(h, e, params, present)
    assert out[~present].tobytes() == h[~present].tobytes()
    assert not np.array_equal(out[present], h[present])


def test_zero_embedding_is_not_masked(rng):
    params = FilmParams(np.zeros((2, 3)), np.ones(3), np.zeros((2, 3)), np.array([0.5, 0.0, -1.0]))
    h = rng.normal(size=(5, 3))
    zero = masked_film(h, np.zeros(2), params)
    masked = masked_film(h, None, params)
    assert not np.array_equal(zero, masked)
    np.testing.assert_allclose(zero - h, np.broadcast_to([0.5, 0.0, -1.0], h.shape), atol=1e-15)


def test_masked_film_chain_is_identity(rng):
    p1, p2 = FilmParams.random(rng, 3, 6), FilmParams.random(rng, 5, 6)
    h = rng.normal(size=(50, 6))
    assert masked_film(masked_film(h, None, p1), None, p2).tobytes() == h.tobytes()


def test_masked_film_shape_checks(rng):
    params = FilmParams.random(rng, 3, 6)
    with pytest.raises(InvalidInput):
        masked_film(np.zeros((2, 5)), None, params)
    with pytest.raises(InvalidInput):
        masked_film(np.zeros((2, 6)), np.zeros((2, 4)), params)
    with pytest.raises(InvalidInput):
        masked_film(np.zeros((2, 6)), None, params, present=[True, False])
