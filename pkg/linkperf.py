"""
Desempenho de enlace (forma fechada)
------------------------------------
SQINR termo a termo para uplink e downlink com filtro casado, eficiência
espectral, variantes com CSI perfeito e os tetos assintóticos (resolução
infinita, potência infinita e escalonamento de potência com N_a).

Convenções: usuários são índices globais do cenário e precisam estar
associados à BS 0; P_SI efetiva e μ_SI² efetiva vêm de SystemParams
(zero em half-duplex, erro de estimação incluído).
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from utils import FdMimoError, linear_to_db, log2_1p

logger = logging.getLogger(__name__)

TERMS_UL = (
    "est_error",
    "intra_cell",
    "inter_cell",
    "noise",
    "fd_self_interference",
    "si_times_dac_noise",
    "adc_noise",
)

TERMS_DL = (
    "est_error",
    "intra_cell",
    "inter_cell",
    "iui_same_cell",
    "iui_other_cells",
    "aqnm",
    "noise",
)

BREAKDOWN_COLUMNS = ["user", "link", "term", "value_W", "sqinr", "se_bps_hz"]


@dataclass(frozen=True)
class SqinrBreakdown:
    user: int
    link: str
    numerator: float
    terms: dict = field(default_factory=dict)
    sqinr: float = 0.0
    se: float = 0.0

    @property
    def denominator(self):
        return float(sum(self.terms.values()))

    @property
    def sqinr_db(self):
        return float(linear_to_db(self.sqinr))


@dataclass(frozen=True)
class Ceiling:
    sqinr: float
    se: float


def _breakdown(user, link, numerator, terms):
    for name, value in terms.items():
        if value < 0:
            raise FdMimoError(f"term {name} is negative ({value})")
    denominator = sum(terms.values())
    if denominator <= 0:
        raise FdMimoError(f"{link} user {user}: interference-plus-noise power is zero")
    sqinr = numerator / denominator
    return SqinrBreakdown(
        user=int(user),
        link=link,
        numerator=float(numerator),
        terms={name: float(value) for name, value in terms.items()},
        sqinr=float(sqinr),
        se=float(log2_1p(sqinr)),
    )


def _ceiling(numerator, denominator):
    if denominator <= 0:
        raise FdMimoError("ceiling denominator is zero")
    sqinr = numerator / denominator
    return Ceiling(sqinr=float(sqinr), se=float(log2_1p(sqinr)))


def _check_user(cells, k, link):
    if len(cells) == 0:
        raise FdMimoError(f"empty scenario: no {link} users")
    if not 0 <= k < len(cells):
        raise FdMimoError(f"{link} user {k} out of range (0..{len(cells) - 1})")
    if cells[k] != 0:
        raise FdMimoError(f"{link} user {k} is served by BS {cells[k]}, not BS 0")


# Filtros casados

def mf_combiner(h_hat):
    """w = ĥ (filtro casado sem normalização)."""
    h_hat = np.asarray(h_hat)
    if not np.all(np.any(h_hat != 0, axis=-1)):
        raise FdMimoError("matched filter of a zero channel estimate")
    return h_hat


def mf_precoder(h_hat, expected_norm2=None):
    """f = √N_a·ĥ/√E[‖ĥ‖²]; com E[‖ĥ‖²] = N_a, f coincide com ĥ."""
    h_hat = mf_combiner(h_hat)
    n = h_hat.shape[-1]
    expected_norm2 = n if expected_norm2 is None else expected_norm2
    return np.sqrt(n / expected_norm2) * h_hat


# SQINR de uplink

def _uplink_sums(scenario, k):
    gp = scenario.g_ul[0] * scenario.ul_power
    own = gp[k]
    in_cell = scenario.ul_cell == 0
    intra = gp[in_cell].sum() - own
    inter = gp[~in_cell].sum()
    return own, intra, inter


def uplink_sqinr(scenario, params, k, perfect_csi=False):
    _check_user(scenario.ul_cell, k, "uplink")
    n = params.n_antennas
    au, ad = params.alpha_u, params.alpha_d
    sigma2 = params.sigma2
    own, intra, inter = _uplink_sums(scenario, k)
    si = params.si_power * params.si_channel_power
    k_dl = scenario.k_dl[0]

    gain = n ** 2 + n if perfect_csi else n ** 2
    terms = {
        "est_error": 0.0 if perfect_csi else au ** 2 * own * n,
        "intra_cell": au ** 2 * intra * n,
        "inter_cell": au ** 2 * inter * n,
        "noise": au ** 2 * sigma2 * n,
        "fd_self_interference": au ** 2 * ad ** 2 * si * k_dl * n ** 2,
        "si_times_dac_noise": au ** 2 * ad * (1.0 - ad) * si * n ** 2,
        # fator 2 em G_k P_k: E|h_i|⁴ = 2 para Rayleigh
        "adc_noise": n * au * (1.0 - au) * (2.0 * own + intra + inter + ad * si * n + sigma2),
    }
    return _breakdown(k, "ul", au ** 2 * own * gain, terms)


def perfect_csi_uplink_sqinr(scenario, params, k):
    return uplink_sqinr(scenario, params, k, perfect_csi=True)


def uplink_sqinr_all(scenario, params, perfect_csi=False):
    return [uplink_sqinr(scenario, params, k, perfect_csi) for k in scenario.ul_users(0)]


# SQINR de downlink

def _iui_sums(scenario, k):
    tp = scenario.t[:, k] * scenario.ul_power
    in_cell = scenario.ul_cell == 0
    return tp[in_cell].sum(), tp[~in_cell].sum()


def downlink_sqinr(scenario, params, k, perfect_csi=False):
    _check_user(scenario.dl_cell, k, "downlink")
    n = params.n_antennas
    ad = params.alpha_d
    g = scenario.g_dl[:, k]
    p_k = scenario.dl_power[k]
    cell_power = scenario.dl_cell_power()
    k_dl = scenario.k_dl
    iui_same, iui_other = _iui_sums(scenario, k)

    gain = n + 1 if perfect_csi else n
    others = np.arange(scenario.n_bs) != 0
    terms = {
        "est_error": 0.0 if perfect_csi else ad ** 2 * g[0] * p_k,
        "intra_cell": ad ** 2 * g[0] * (cell_power[0] - p_k),
        "inter_cell": ad ** 2 * float(np.sum(g[others] * cell_power[others])),
        "iui_same_cell": params.iui_variance * iui_same,
        "iui_other_cells": params.iui_variance * iui_other,
        "aqnm": ad * (1.0 - ad) * float(np.sum(g * scenario.dl_mean_power() * (k_dl + 1) * (k_dl > 0))),
        "noise": params.sigma2,
    }
    return _breakdown(k, "dl", ad ** 2 * g[0] * p_k * gain, terms)


def perfect_csi_downlink_sqinr(scenario, params, k):
    return downlink_sqinr(scenario, params, k, perfect_csi=True)


def downlink_sqinr_all(scenario, params, perfect_csi=False):
    return [downlink_sqinr(scenario, params, k, perfect_csi) for k in scenario.dl_users(0)]


def effective_se(breakdown, params):
    """SE líquida: ½ em half-duplex e 1/fator de reuso."""
    return params.se_prefactor * breakdown.se


def breakdowns_to_frame(breakdowns):
    rows = []
    for item in breakdowns:
        rows.append([item.user, item.link, "numerator", item.numerator, item.sqinr, item.se])
        for name, value in item.terms.items():
            rows.append([item.user, item.link, name, value, item.sqinr, item.se])
    return pd.DataFrame(rows, columns=BREAKDOWN_COLUMNS)


# Tetos assintóticos

def lemma1_uplink(scenario, params, k):
    """Resolução infinita: G_kP_kN_a / (ΣΣ G P + P_SI μ² K^d N_a + σ²)."""
    _check_user(scenario.ul_cell, k, "uplink")
    n = params.n_antennas
    gp = scenario.g_ul[0] * scenario.ul_power
    si = params.si_power * params.si_channel_power * scenario.k_dl[0] * n
    return _ceiling(gp[k] * n, gp.sum() + si + params.sigma2)


def lemma1_downlink(scenario, params, k):
    _check_user(scenario.dl_cell, k, "downlink")
    g = scenario.g_dl[:, k]
    iui = params.iui_variance * float(np.sum(scenario.t[:, k] * scenario.ul_power))
    interference = float(np.sum(g * scenario.dl_cell_power()))
    return _ceiling(g[0] * scenario.dl_power[k], interference + iui + params.sigma2)


def ceiling_ratio(closed, ceiling):
    # teto nulo (potência nula) não tem razão definida
    if ceiling == 0:
        return float("nan")
    return float(closed / ceiling)


def _report_downlink_ratio(k, ratio, ceiling):
    if not np.isnan(ratio) and not np.isclose(ratio, 1.0, rtol=1e-2):
        logger.warning("downlink user %d: closed-form SQINR is %.4g x the %s ceiling", k, ratio, ceiling)
    return ratio


def lemma1_downlink_consistency(scenario, params, k):
    """Razão entre o SQINR de downlink com b -> ∞ e o teto de resolução infinita.

    As duas expressões diferem por um ganho de arranjo; a razão é apenas
    reportada.
    """
    full = params.updated(bits_dl=None, alpha_dl=None, bits_ul=None, alpha_ul=None)
    ratio = ceiling_ratio(downlink_sqinr(scenario, full, k).sqinr, lemma1_downlink(scenario, full, k).sqinr)
    return _report_downlink_ratio(k, ratio, "infinite-resolution")


def lemma2_downlink_consistency(scenario, params, k, power=1e6):
    """Razão entre o SQINR de downlink com P_SI = P^d = P^u = power e o teto de potência infinita.

    O teto também não tem o ganho de arranjo: a razão tende a N_a.
    """
    loud = scenario.with_equal_power(power)
    loud_params = params.updated(p_si=power)
    ratio = ceiling_ratio(downlink_sqinr(loud, loud_params, k).sqinr,
                          lemma2_downlink(loud, loud_params, k).sqinr)
    return _report_downlink_ratio(k, ratio, "high-power")


def lemma2_uplink(scenario, params, k):
    """P_SI = P^d = P^u -> ∞ com N_a e b fixos."""
    _check_user(scenario.ul_cell, k, "uplink")
    n = params.n_antennas
    au, ad = params.alpha_u, params.alpha_d
    g = scenario.g_ul[0]
    si = ad * n * params.si_channel_power * (1.0 + au * ad * (scenario.k_dl[0] - 1))
    if params.si_power == 0:
        si = 0.0
    return _ceiling(au * g[k] * n, g.sum() + (1.0 - au) * g[k] + si)


def lemma2_downlink(scenario, params, k):
    _check_user(scenario.dl_cell, k, "downlink")
    ad = params.alpha_d
    g = scenario.g_dl[:, k]
    k_dl = scenario.k_dl
    denominator = (
        ad ** 2 * float(np.sum(g * k_dl))
        + params.iui_variance * float(np.sum(scenario.t[:, k]))
        + ad * (1.0 - ad) * float(np.sum(g * (k_dl + 1) * (k_dl > 0)))
    )
    return _ceiling(ad ** 2 * g[0], denominator)


def lemma3_uplink(g_k, e_k, e_si, alpha_u, alpha_d, mu_si2, k_dl, sigma2):
    """Escalonamento P = E/N_a, N_a -> ∞ (uplink)."""
    si = alpha_d * mu_si2 * e_si * (1.0 + alpha_u * alpha_d * (k_dl - 1))
    return _ceiling(alpha_u * g_k * e_k, si + sigma2)


def lemma3_downlink(g_k, e_k, alpha_d, sigma2):
    return _ceiling(alpha_d ** 2 * g_k * e_k, sigma2)
