"""
Modelo aditivo de ruído de quantização (AQNM)
---------------------------------------------
Conversores de baixa resolução linearizados como y_q = α·y + q, com q
gaussiano de covariância diagonal. Aqui ficam o mapeamento bits -> (ρ, α),
a geração do sinal quantizado e as covariâncias de quantização do uplink
(ADC) e do downlink (DAC).
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import eigh

from utils import FdMimoError, as_rng, complex_normal

logger = logging.getLogger(__name__)

# Distorção de Lloyd-Max para b = 1..5 (valores exatos da tabela)
RHO_TABLE = {
    1: 0.3634,
    2: 0.1175,
    3: 0.03454,
    4: 0.009497,
    5: 0.002499,
}

_RHO_HIGH_RES = np.pi * np.sqrt(3.0) / 2.0

# Tolerância relativa para aceitar autovalores levemente negativos (arredondamento)
_PSD_TOL = 1e-10


def rho_from_bits(bits):
    """ρ(b): tabela para b <= 5, aproximação de alta resolução (π√3/2)·2^(-2b) acima."""
    if bits is None or bits < 1:
        raise FdMimoError(f"bits must be >= 1, got {bits}")
    if bits != int(bits):
        raise FdMimoError(f"bits must be an integer, got {bits}")
    bits = int(bits)
    if bits in RHO_TABLE:
        return RHO_TABLE[bits]
    return float(_RHO_HIGH_RES * 2.0 ** (-2 * bits))


def alpha_from_bits(bits):
    # None = resolução infinita
    if bits is None:
        return 1.0
    return 1.0 - rho_from_bits(bits)


@dataclass(frozen=True)
class QuantizerModel:
    bits: Optional[int]
    rho: float
    alpha: float

    @classmethod
    def from_bits(cls, bits):
        rho = 0.0 if bits is None else rho_from_bits(bits)
        return cls(bits=bits, rho=rho, alpha=1.0 - rho)

    @property
    def distortion_gain(self):
        """α(1−α): fator que multiplica a potência recebida na covariância de q."""
        return self.alpha * (1.0 - self.alpha)


def draw_quantization_noise(variance, rng):
    """q ~ CN(0, diag(variance)); o formato de saída é o de `variance`."""
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise FdMimoError("quantization noise variance must be >= 0")
    return complex_normal(as_rng(rng), variance.shape, variance)


def _covariance_factor(r_q):
    # Fator L com L·L* = R_q, usado para R_q não diagonal
    r_q = np.asarray(r_q)
    if r_q.ndim != 2 or r_q.shape[0] != r_q.shape[1]:
        raise FdMimoError(f"R_q must be a square matrix, got shape {r_q.shape}")
    scale = max(float(np.max(np.abs(r_q))), 1.0)
    if not np.allclose(r_q, r_q.conj().T, atol=_PSD_TOL * scale):
        raise FdMimoError("R_q must be Hermitian")
    eigenvalues, eigenvectors = eigh(r_q)
    if eigenvalues.min() < -_PSD_TOL * scale:
        raise FdMimoError(f"R_q must be positive semidefinite (min eigenvalue {eigenvalues.min():.3e})")
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


def quantize(y, alpha, r_q, seed):
    """y_q = α·y + q, q ~ CN(0, R_q) independente de y.

    `r_q` pode ser o vetor de variâncias (diagonal) ou a matriz completa.
    `y` aceita eixos de lote à esquerda; o último eixo tem tamanho N_a.
    """
    y = np.asarray(y)
    r_q = np.asarray(r_q)
    if not 0 < alpha <= 1:
        raise FdMimoError(f"alpha must lie in (0, 1], got {alpha}")
    rng = as_rng(seed)

    if r_q.ndim == 1:
        if r_q.shape[0] != y.shape[-1]:
            raise FdMimoError("R_q dimension does not match y")
        if np.any(r_q < 0):
            raise FdMimoError("R_q must be positive semidefinite (negative variance)")
        q = complex_normal(rng, y.shape, np.broadcast_to(r_q, y.shape))
    else:
        if r_q.shape[0] != y.shape[-1]:
            raise FdMimoError("R_q dimension does not match y")
        factor = _covariance_factor(r_q)
        z = complex_normal(rng, y.shape)
        q = z @ factor.T
    return alpha * y + q


def downlink_noise_var(precoders, alpha_d):
    """Diagonal de R_qd = α_d(1−α_d)·diag(F F*).

    `precoders` tem forma (..., N_a, K): uma coluna por usuário.
    """
    precoders = np.asarray(precoders)
    return alpha_d * (1.0 - alpha_d) * np.sum(np.abs(precoders) ** 2, axis=-1)


def downlink_noise_cov(precoders, alpha_d):
    return np.diag(downlink_noise_var(precoders, alpha_d))


def _si_diagonal(h_si, precoders, alpha_d):
    # diag(H_SI (α_d² F F* + R_qd) H_SI*) sem formar as matrizes N×N intermediárias
    projected = h_si @ precoders
    beam = np.sum(np.abs(projected) ** 2, axis=-1)
    r_qd = downlink_noise_var(precoders, alpha_d)
    dac = np.sum(np.abs(h_si) ** 2 * r_qd[..., None, :], axis=-1)
    return alpha_d ** 2 * beam + dac


def uplink_noise_var(params, h_ul, powers, h_si=None, precoders=None, alpha_u=None, alpha_d=None):
    """Diagonal de R_qu = α_u(1−α_u)·diag(Σ_k P_k h_k h_k* + Q + σ²I).

    `powers` são as potências recebidas G_k·P_k de cada usuário e
    Q = P_SI·H_SI(α_d² F F* + R_qd)H_SI*. `h_ul` tem forma (..., K_u, N_a),
    `h_si` (..., N_a, N_a) e `precoders` (..., N_a, K_d).
    """
    alpha_u = params.alpha_u if alpha_u is None else alpha_u
    alpha_d = params.alpha_d if alpha_d is None else alpha_d
    h_ul = np.asarray(h_ul)
    powers = np.asarray(powers, dtype=float)
    if h_ul.shape[-2] != powers.shape[-1]:
        raise FdMimoError("one uplink power per user is required")

    received = np.sum(powers[..., :, None] * np.abs(h_ul) ** 2, axis=-2)
    if h_si is not None and precoders is not None and params.si_power > 0:
        received = received + params.si_power * _si_diagonal(np.asarray(h_si), np.asarray(precoders), alpha_d)
    received = received + params.sigma2
    return alpha_u * (1.0 - alpha_u) * received


def uplink_noise_cov(params, h_ul, powers, h_si=None, precoders=None, alpha_u=None, alpha_d=None):
    return np.diag(uplink_noise_var(params, h_ul, powers, h_si, precoders, alpha_u, alpha_d))
