"""
Oráculo de Monte Carlo
----------------------
Sintetiza as cadeias completas de sinal quantizado (uplink e downlink),
separa cada componente da decomposição com filtro casado e mede sua
potência empírica. Também estima CDFs empíricas e verifica os momentos
do filtro casado.

Aleatoriedade em dois níveis: o cenário de larga escala é fixo e os
trials sorteiam desvanecimento, símbolos, ruído e ruído de quantização.
Os trials são agrupados em blocos de tamanho fixo; o bloco b usa o fluxo
(seed, enlace, b), de modo que o número de workers não altera o resultado.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from aqnm import downlink_noise_var, draw_quantization_noise, uplink_noise_var
from channel import sample_realization
from linkperf import TERMS_DL, TERMS_UL
from utils import (
    FdMimoError,
    STREAM_COROLLARY,
    STREAM_ORACLE_DL,
    STREAM_ORACLE_UL,
    complex_normal,
    spawn_rng,
)

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 256
DEFAULT_TRIALS = 100_000

_LINKS = {
    "ul": (STREAM_ORACLE_UL, TERMS_UL),
    "dl": (STREAM_ORACLE_DL, TERMS_DL),
}


@dataclass(frozen=True)
class TrialResult:
    link: str
    users: np.ndarray
    numerator: np.ndarray
    terms: dict
    sqinr: np.ndarray
    seed: int


@dataclass(frozen=True)
class OracleEstimate:
    link: str
    users: np.ndarray
    n_trials: int
    mean: dict
    stderr: dict


@dataclass(frozen=True)
class CdfEstimate:
    values: np.ndarray
    probs: np.ndarray
    n_samples: int

    def evaluate(self, x):
        """F(x) = fração de amostras <= x."""
        idx = np.searchsorted(self.values, x, side="right")
        padded = np.concatenate([[0.0], self.probs])
        return padded[idx]

    def quantile(self, p):
        if not 0 <= p <= 1:
            raise FdMimoError(f"probability must lie in [0, 1], got {p}")
        idx = np.searchsorted(self.probs, p, side="left")
        return float(self.values[min(idx, len(self.values) - 1)])

    def to_frame(self):
        return pd.DataFrame({"sample_db": self.values, "prob": self.probs})


def _power(component):
    return np.abs(component) ** 2


def _uplink_block(scenario, params, rng, n_trials):
    users = scenario.ul_users(0)
    n = params.n_antennas
    au, ad = params.alpha_u, params.alpha_d
    real = sample_realization(scenario, params, rng, n_trials)

    received = scenario.g_ul[0] * scenario.ul_power
    amplitude = np.sqrt(received)
    s_u = complex_normal(rng, (n_trials, len(scenario.ul_cell)))
    v = complex_normal(rng, (n_trials, n), params.sigma2)
    n_dl = real.h_dl.shape[2]
    s_d = complex_normal(rng, (n_trials, n_dl))

    w = real.h_ul[:, users, :]
    inner = np.einsum("tki,tni->tkn", w.conj(), real.h_ul)
    contrib = au * inner * (amplitude * s_u)[:, None, :]

    in_cell = scenario.ul_cell == 0
    intra_mask = in_cell[None, :] & (np.arange(len(scenario.ul_cell))[None, :] != users[:, None])
    own = np.arange(len(users))
    own_gain = inner[:, own, users]
    own_symbol = (amplitude[users] * s_u[:, users])

    # Precoders casados da BS 0 (colunas de F) e o sinal de downlink vazando no receptor
    precoders = np.swapaxes(real.h_dl[:, 0, :, :], -1, -2)
    x_d = np.einsum("tik,tk->ti", precoders, s_d)
    q_d = draw_quantization_noise(downlink_noise_var(precoders, ad), rng)
    si_amplitude = np.sqrt(params.si_power)
    si_signal = np.einsum("tij,tj->ti", real.h_si, x_d)
    si_dac = np.einsum("tij,tj->ti", real.h_si, q_d)
    q_u = draw_quantization_noise(
        uplink_noise_var(params, real.h_ul, received, real.h_si, precoders), rng
    )

    def _filter(vector):
        return np.einsum("tki,ti->tk", w.conj(), vector)

    numerator = _power(au * n * own_symbol)
    terms = {
        "est_error": _power(au * (own_gain - n) * own_symbol),
        "intra_cell": _power(np.sum(contrib * intra_mask[None], axis=-1)),
        "inter_cell": _power(np.sum(contrib * (~in_cell)[None, None, :], axis=-1)),
        "noise": _power(au * _filter(v)),
        "fd_self_interference": _power(au * ad * si_amplitude * _filter(si_signal)),
        "si_times_dac_noise": _power(au * si_amplitude * _filter(si_dac)),
        "adc_noise": _power(_filter(q_u)),
    }
    return numerator, terms


def _downlink_block(scenario, params, rng, n_trials):
    users = scenario.dl_users(0)
    n = params.n_antennas
    ad = params.alpha_d
    real = sample_realization(scenario, params, rng, n_trials)

    g_dl = scenario.g_dl[:, users]
    power = scenario.dl_power
    mean_power = scenario.dl_mean_power()
    s_d = complex_normal(rng, (n_trials, len(scenario.dl_cell)))
    s_u = complex_normal(rng, (n_trials, len(scenario.ul_cell)))
    v = complex_normal(rng, (n_trials, len(users)), params.sigma2)

    # Célula 0: h_k* f_j com f_j = h_j
    h0 = real.h_dl[:, 0, :, :]
    inner0 = np.einsum("tki,tji->tkj", h0.conj(), h0)
    own = np.arange(len(users))
    own_amp = np.sqrt(g_dl[0] * power[users] / n)
    own_symbol = own_amp * s_d[:, users]

    intra_weight = np.sqrt(g_dl[0][:, None] * power[users][None, :] / n) * s_d[:, None, users]
    intra_weight = intra_weight * (1.0 - np.eye(len(users)))[None]
    intra = ad * np.sum(inner0 * intra_weight, axis=-1)

    inter = np.zeros((n_trials, len(users)), dtype=complex)
    aqnm = np.zeros((n_trials, len(users)), dtype=complex)
    precoders0 = np.swapaxes(h0, -1, -2)
    q0 = draw_quantization_noise(downlink_noise_var(precoders0, ad), rng)
    aqnm += np.sqrt(g_dl[0] * mean_power[0] / n) * np.einsum("tki,ti->tk", h0.conj(), q0)
    for cell in range(1, scenario.n_bs):
        own_users = scenario.dl_users(cell)
        if not len(own_users):
            continue
        h_cross = real.h_dl[:, cell, :, :]
        precoders = real.h_own[cell]
        inner = np.einsum("tki,tji->tkj", h_cross.conj(), precoders)
        weight = np.sqrt(g_dl[cell][:, None] * power[own_users][None, :] / n)
        inter += ad * np.sum(inner * weight[None] * s_d[:, None, own_users], axis=-1)
        q_cell = draw_quantization_noise(downlink_noise_var(np.swapaxes(precoders, -1, -2), ad), rng)
        aqnm += np.sqrt(g_dl[cell] * mean_power[cell] / n) * np.einsum("tki,ti->tk", h_cross.conj(), q_cell)

    iui_amp = np.sqrt(scenario.t[:, users] * scenario.ul_power[:, None])
    iui = real.g * iui_amp[None] * s_u[:, :, None]
    in_cell = scenario.ul_cell == 0

    numerator = _power(ad * n * own_symbol)
    terms = {
        "est_error": _power(ad * (inner0[:, own, own] - n) * own_symbol),
        "intra_cell": _power(intra),
        "inter_cell": _power(inter),
        "iui_same_cell": _power(np.sum(iui[:, in_cell, :], axis=1)),
        "iui_other_cells": _power(np.sum(iui[:, ~in_cell, :], axis=1)),
        "aqnm": _power(aqnm),
        "noise": _power(v),
    }
    return numerator, terms


_BLOCKS = {"ul": _uplink_block, "dl": _downlink_block}


def _check_scenario(scenario, link):
    users = scenario.ul_users(0) if link == "ul" else scenario.dl_users(0)
    if not len(users):
        raise FdMimoError(f"empty scenario: BS 0 serves no {link} users")
    return users


def _trial_result(link, users, numerator, terms, seed):
    total = sum(terms.values())
    sqinr = np.divide(numerator, total, out=np.full_like(numerator, np.inf), where=total > 0)
    return TrialResult(link=link, users=users, numerator=numerator, terms=terms, sqinr=sqinr, seed=seed)


def simulate_uplink_trial(scenario, params, seed):
    """Um trial de uplink: potência |componente|² por usuário da BS 0."""
    users = _check_scenario(scenario, "ul")
    numerator, terms = _uplink_block(scenario, params, spawn_rng(seed, STREAM_ORACLE_UL), 1)
    return _trial_result("ul", users, numerator[0], {k: v[0] for k, v in terms.items()}, seed)


def simulate_downlink_trial(scenario, params, seed):
    users = _check_scenario(scenario, "dl")
    numerator, terms = _downlink_block(scenario, params, spawn_rng(seed, STREAM_ORACLE_DL), 1)
    return _trial_result("dl", users, numerator[0], {k: v[0] for k, v in terms.items()}, seed)


def _block_sums(scenario, params, link, seed, index, size):
    stream, names = _LINKS[link]
    rng = spawn_rng(seed, stream, index)
    numerator, terms = _BLOCKS[link](scenario, params, rng, size)
    values = {"numerator": numerator}
    values.update((name, terms[name]) for name in names)
    return {
        name: (value.sum(axis=0), (value ** 2).sum(axis=0))
        for name, value in values.items()
    }


def run_oracle(scenario, params, link, trials, seed, workers=1, block_size=None):
    """Média e erro-padrão de cada termo, por usuário da BS 0."""
    if link not in _LINKS:
        raise FdMimoError(f"link must be 'ul' or 'dl', got {link!r}")
    if trials < 2:
        raise FdMimoError(f"trials must be >= 2, got {trials}")
    users = _check_scenario(scenario, link)
    block_size = DEFAULT_BLOCK_SIZE if block_size is None else int(block_size)
    sizes = [min(block_size, trials - start) for start in range(0, trials, block_size)]

    def _run(index):
        return _block_sums(scenario, params, link, seed, index, sizes[index])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(_run, range(len(sizes))))
    else:
        partials = [_run(index) for index in range(len(sizes))]

    # Redução na ordem dos blocos
    mean, stderr = {}, {}
    for name in partials[0]:
        total = np.zeros(len(users))
        total_sq = np.zeros(len(users))
        for partial in partials:
            total = total + partial[name][0]
            total_sq = total_sq + partial[name][1]
        m = total / trials
        var = np.clip((total_sq - trials * m ** 2) / (trials - 1), 0.0, None)
        mean[name] = m
        stderr[name] = np.sqrt(var / trials)
    logger.debug("oracle %s: %d trials in %d blocks, %d workers", link, trials, len(sizes), workers)
    return OracleEstimate(link=link, users=users, n_trials=int(trials), mean=mean, stderr=stderr)


def compare_with_closed_form(estimate, breakdowns):
    """z-score de cada termo: (empírico − forma fechada) / erro-padrão."""
    position = {int(user): i for i, user in enumerate(estimate.users)}
    rows = []
    for item in breakdowns:
        if item.link != estimate.link or item.user not in position:
            raise FdMimoError(f"breakdown for {item.link} user {item.user} not covered by the estimate")
        i = position[item.user]
        expected = {"numerator": item.numerator}
        expected.update(item.terms)
        for name, closed in expected.items():
            empirical = float(estimate.mean[name][i])
            err = float(estimate.stderr[name][i])
            diff = empirical - closed
            if err > 0:
                z = diff / err
            else:
                z = 0.0 if np.isclose(empirical, closed, rtol=1e-9, atol=1e-300) else np.inf
            rows.append([item.user, item.link, name, closed, empirical, err, z])
    return pd.DataFrame(rows, columns=["user", "link", "term", "closed_form", "empirical", "stderr", "z"])


def estimate_cdf(samples):
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size == 0:
        raise FdMimoError("cannot estimate a CDF from an empty sample")
    values, counts = np.unique(samples, return_counts=True)
    probs = np.cumsum(counts) / samples.size
    probs[-1] = 1.0
    return CdfEstimate(values=values, probs=probs, n_samples=int(samples.size))


def verify_corollary1(n_antennas, trials, seed, block_size=4096):
    """Momentos do filtro casado: E‖w‖², E‖w‖⁴ e E|w*h'|² com h' independente."""
    if trials < 2:
        raise FdMimoError(f"trials must be >= 2, got {trials}")
    n = int(n_antennas)
    sums = np.zeros(3)
    sums_sq = np.zeros(3)
    for index, start in enumerate(range(0, trials, block_size)):
        size = min(block_size, trials - start)
        rng = spawn_rng(seed, STREAM_COROLLARY, index)
        w = complex_normal(rng, (size, n))
        h = complex_normal(rng, (size, n))
        norm2 = np.sum(np.abs(w) ** 2, axis=-1)
        values = np.stack([norm2, norm2 ** 2, np.abs(np.sum(w.conj() * h, axis=-1)) ** 2])
        sums += values.sum(axis=1)
        sums_sq += (values ** 2).sum(axis=1)
    mean = sums / trials
    stderr = np.sqrt(np.clip((sums_sq - trials * mean ** 2) / (trials - 1), 0.0, None) / trials)
    return pd.DataFrame({
        "moment": ["norm2", "norm4", "cross"],
        "empirical": mean,
        "stderr": stderr,
        "expected": [n, n ** 2 + n, n],
    })
