import numpy as np
import pytest

from aqnm import (
    QuantizerModel,
    RHO_TABLE,
    alpha_from_bits,
    downlink_noise_cov,
    downlink_noise_var,
    draw_quantization_noise,
    quantize,
    rho_from_bits,
    uplink_noise_cov,
    uplink_noise_var,
)
from conftest import small_params
from utils import FdMimoError, complex_normal


def test_rho_table_values_are_exact():
    assert [rho_from_bits(b) for b in range(1, 6)] == [0.3634, 0.1175, 0.03454, 0.009497, 0.002499]
    assert RHO_TABLE[3] == 0.03454


def test_rho_above_table_uses_high_resolution_formula():
    assert rho_from_bits(6) == pytest.approx(np.pi * np.sqrt(3) / 2 * 2.0 ** -12)
    assert rho_from_bits(6) == pytest.approx(6.642e-4, rel=1e-3)


def test_rho_strictly_decreasing():
    rhos = [rho_from_bits(b) for b in range(1, 15)]
    assert all(a > b for a, b in zip(rhos, rhos[1:]))


@pytest.mark.parametrize("bits", [0, -2, None, 2.5, 6.01])
def test_rho_rejects_invalid_bits(bits):
    with pytest.raises(FdMimoError):
        rho_from_bits(bits)
    if bits is not None:
        with pytest.raises(FdMimoError):
            alpha_from_bits(bits)


def test_integral_bits_of_any_numeric_type():
    assert rho_from_bits(3.0) == rho_from_bits(3)
    assert rho_from_bits(np.int64(7)) == rho_from_bits(7)


def test_alpha_from_bits():
    assert alpha_from_bits(None) == 1.0
    assert alpha_from_bits(1) == pytest.approx(1 - 0.3634)
    model = QuantizerModel.from_bits(2)
    assert model.alpha + model.rho == pytest.approx(1.0)
    assert model.distortion_gain == pytest.approx(0.8825 * 0.1175)
    assert QuantizerModel.from_bits(None).rho == 0.0


def test_quantize_full_resolution_is_identity():
    y = complex_normal(np.random.default_rng(0), (5, 4))
    assert np.allclose(quantize(y, 1.0, np.zeros(4), seed=1), y)


def test_quantize_covariance_identity():
    rng = np.random.default_rng(3)
    n, draws, alpha = 4, 100_000, 0.7
    r_q = np.array([0.2, 0.5, 1.0, 0.05])
    y = complex_normal(rng, (draws, n), 2.0)
    y_q = quantize(y, alpha, r_q, seed=11)

    q = y_q - alpha * y
    assert np.allclose(np.mean(np.abs(q) ** 2, axis=0), r_q, rtol=0.02)
    cov_y = np.mean(np.abs(y) ** 2, axis=0)
    cov_yq = np.mean(np.abs(y_q) ** 2, axis=0)
    assert np.allclose(cov_yq, alpha ** 2 * cov_y + r_q, rtol=0.02)


def test_quantize_mean_scales_with_alpha():
    y = np.full((50_000, 2), 3.0 + 1.0j)
    y_q = quantize(y, 0.6, np.array([0.3, 0.3]), seed=5)
    assert np.allclose(y_q.mean(axis=0), 0.6 * (3.0 + 1.0j), atol=0.02)


def test_quantize_full_matrix_and_psd_check():
    r_q = np.array([[1.0, 0.5], [0.5, 1.0]])
    y = np.zeros((80_000, 2), dtype=complex)
    q = quantize(y, 1.0, r_q, seed=2)
    sample = q.T @ q.conj() / len(q)
    assert np.allclose(sample, r_q, atol=0.03)

    with pytest.raises(FdMimoError):
        quantize(y, 1.0, np.array([[1.0, 2.0], [2.0, 1.0]]), seed=2)
    with pytest.raises(FdMimoError):
        quantize(y, 1.0, np.array([1.0, -0.1]), seed=2)


def test_draw_quantization_noise_variance():
    variance = np.array([[0.5, 2.0]] * 50_000)
    q = draw_quantization_noise(variance, np.random.default_rng(8))
    assert q.shape == variance.shape
    assert np.allclose(np.mean(np.abs(q) ** 2, axis=0), [0.5, 2.0], rtol=0.03)


def test_downlink_noise_cov_cases():
    assert np.allclose(downlink_noise_cov(np.eye(2), 1.0), 0.0)
    assert np.allclose(downlink_noise_cov(np.eye(2), 0.7), 0.7 * 0.3 * np.eye(2))


def test_downlink_noise_cov_matches_elementwise_evaluation():
    rng = np.random.default_rng(4)
    f = complex_normal(rng, (4, 3))
    alpha = 0.65
    expected = alpha * (1 - alpha) * np.diag(np.diag(f @ f.conj().T).real)
    assert np.allclose(downlink_noise_cov(f, alpha), expected)


def test_uplink_noise_cov_matches_elementwise_evaluation():
    rng = np.random.default_rng(9)
    params = small_params(n_antennas=4, p_si=0.8, alpha_ul=0.75, alpha_dl=0.6)
    h = complex_normal(rng, (3, 4))
    powers = np.array([1.0, 0.4, 0.2])
    h_si = complex_normal(rng, (4, 4), params.mu_si2)
    f = complex_normal(rng, (4, 2))

    au, ad = params.alpha_u, params.alpha_d
    gram = sum(powers[k] * np.outer(h[k], h[k].conj()) for k in range(3))
    r_qd = ad * (1 - ad) * np.diag(np.diag(f @ f.conj().T))
    q = params.p_si * h_si @ (ad ** 2 * f @ f.conj().T + r_qd) @ h_si.conj().T
    expected = au * (1 - au) * np.diag(np.diag(gram + q + params.sigma2 * np.eye(4)).real)

    assert np.allclose(uplink_noise_cov(params, h, powers, h_si, f), expected)


def test_uplink_noise_var_special_cases():
    params = small_params(n_antennas=3, p_si=0.0)
    h = np.zeros((1, 3), dtype=complex)
    var = uplink_noise_var(params, h, [0.0], np.zeros((3, 3)), np.zeros((3, 1)))
    assert np.allclose(var, 0.8 * 0.2 * 1.0)
    assert np.allclose(uplink_noise_var(small_params(alpha_ul=1.0), h, [1.0]), 0.0)


def test_noise_variance_decreases_with_bits():
    rng = np.random.default_rng(1)
    h = complex_normal(rng, (2, 4))
    f = complex_normal(rng, (4, 2))
    previous = np.inf
    for bits in range(1, 8):
        params = small_params(n_antennas=4, alpha_ul=None, alpha_dl=None, bits_ul=bits, bits_dl=bits)
        total = uplink_noise_var(params, h, [1.0, 1.0]).sum() + downlink_noise_var(f, params.alpha_d).sum()
        assert total < previous
        previous = total
