"""
Modelo de canal
---------------
Parâmetros do sistema, ganho de larga escala (perda de percurso com
sombreamento log-normal), desvanecimento de pequena escala Rayleigh, canal
de auto-interferência (SI) e canais escalares entre usuários.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd

from aqnm import alpha_from_bits
from utils import (
    ConfigError,
    FdMimoError,
    STREAM_SHADOW_UU,
    as_rng,
    complex_normal,
    noise_power,
    spawn_rng,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SystemParams:
    eta: float = 3.5
    l_ref: float = 1.0
    sigma_sh_db: float = 5.0
    n_antennas: int = 100
    bandwidth_hz: float = 20e6
    noise_density_dbm_hz: float = -174.0
    noise_power_w: Optional[float] = None
    p_ul: float = 0.25
    p_dl_total: float = 40.0
    p_si: float = 40.0
    mu_si2: float = 10.0
    sigma_iui2: float = 1.0
    si_est_error: float = 0.0
    bits_ul: Optional[int] = None
    bits_dl: Optional[int] = None
    alpha_ul: Optional[float] = None
    alpha_dl: Optional[float] = None
    k_ul: int = 4
    k_dl: int = 4
    d_min: float = 10.0
    duplex: str = "fd"
    reuse: int = 1

    def __post_init__(self):
        if not self.eta > 2:
            raise ConfigError("eta", f"pathloss exponent must be > 2, got {self.eta}")
        if self.l_ref <= 0:
            raise ConfigError("l_ref", f"must be > 0, got {self.l_ref}")
        if self.n_antennas < 1:
            raise ConfigError("n_antennas", f"must be >= 1, got {self.n_antennas}")
        if self.bandwidth_hz <= 0:
            raise ConfigError("bandwidth_hz", f"must be > 0, got {self.bandwidth_hz}")
        for name in ("sigma_sh_db", "p_ul", "p_dl_total", "p_si", "mu_si2",
                     "sigma_iui2", "si_est_error", "d_min"):
            if getattr(self, name) < 0:
                raise ConfigError(name, f"must be >= 0, got {getattr(self, name)}")
        if self.noise_power_w is not None and self.noise_power_w < 0:
            raise ConfigError("noise_power_w", f"must be >= 0, got {self.noise_power_w}")
        for name in ("bits_ul", "bits_dl"):
            bits = getattr(self, name)
            if bits is not None and bits < 1:
                raise ConfigError(name, f"must be >= 1 (or inf), got {bits}")
        for name in ("alpha_ul", "alpha_dl"):
            alpha = getattr(self, name)
            if alpha is not None and not 0 < alpha <= 1:
                raise ConfigError(name, f"must lie in (0, 1], got {alpha}")
        for name in ("k_ul", "k_dl"):
            if getattr(self, name) < 0:
                raise ConfigError(name, f"must be >= 0, got {getattr(self, name)}")
        if self.duplex not in ("fd", "hd"):
            raise ConfigError("duplex", f"must be 'fd' or 'hd', got {self.duplex!r}")
        if self.reuse not in (1, 3, 7):
            raise ConfigError("reuse", f"must be 1, 3 or 7, got {self.reuse}")

    @property
    def sigma2(self):
        if self.noise_power_w is not None:
            return float(self.noise_power_w)
        return noise_power(self.bandwidth_hz, self.noise_density_dbm_hz)

    @property
    def alpha_u(self):
        return self.alpha_ul if self.alpha_ul is not None else alpha_from_bits(self.bits_ul)

    @property
    def alpha_d(self):
        return self.alpha_dl if self.alpha_dl is not None else alpha_from_bits(self.bits_dl)

    @property
    def si_power(self):
        # Em half-duplex não há transmissão simultânea, logo nem SI
        return 0.0 if self.duplex == "hd" else self.p_si

    @property
    def si_channel_power(self):
        return self.mu_si2 * (1.0 + self.si_est_error)

    @property
    def iui_variance(self):
        return 0.0 if self.duplex == "hd" else self.sigma_iui2

    @property
    def se_prefactor(self):
        duplex = 0.5 if self.duplex == "hd" else 1.0
        return duplex / self.reuse

    def updated(self, **changes):
        return replace(self, **changes)


def large_scale_gain(r, chi, params):
    """G = L_ref·χ / r^η (vetorizado)."""
    r = np.asarray(r, dtype=float)
    chi = np.asarray(chi, dtype=float)
    if np.any(r <= 0):
        raise FdMimoError("r must be > 0 (pathloss is singular at r = 0)")
    if np.any(chi <= 0):
        raise FdMimoError("shadowing chi must be > 0")
    return params.l_ref * chi / r ** params.eta


def sample_shadowing(sigma_sh_db, seed, size=None):
    """χ = 10^(X/10), X ~ N(0, σ_sh²) em dB."""
    if sigma_sh_db < 0:
        raise FdMimoError(f"sigma_sh_db must be >= 0, got {sigma_sh_db}")
    rng = as_rng(seed)
    x_db = sigma_sh_db * rng.standard_normal(size)
    return 10.0 ** (x_db / 10.0)


def _shape(size):
    if size is None:
        return ()
    if np.isscalar(size):
        return (int(size),)
    return tuple(int(s) for s in size)


def sample_small_scale(n_antennas, seed, size=None):
    """Vetores h ~ CN(0, I) de tamanho N_a (eixos extras à esquerda)."""
    rng = as_rng(seed)
    return complex_normal(rng, _shape(size) + (int(n_antennas),))


def sample_si_channel(n_antennas, mu_si2, seed, size=None):
    """Matriz H_SI N_a×N_a com entradas i.i.d. CN(0, μ_SI²)."""
    rng = as_rng(seed)
    return complex_normal(rng, _shape(size) + (int(n_antennas), int(n_antennas)), mu_si2)


def sample_iui_channel(sigma_iui2, seed, size=None):
    rng = as_rng(seed)
    return complex_normal(rng, _shape(size), sigma_iui2)


@dataclass(frozen=True)
class LargeScaleScenario:
    """Ganhos de larga escala condicionados a um sorteio da rede.

    g_ul[l, n]: BS l -> usuário de uplink n; g_dl[l, k]: BS l -> usuário de
    downlink k; t[n, k]: usuário de uplink n -> usuário de downlink k.
    """

    g_ul: np.ndarray
    g_dl: np.ndarray
    t: np.ndarray
    ul_cell: np.ndarray
    dl_cell: np.ndarray
    ul_power: np.ndarray
    dl_power: np.ndarray
    r_ul: Optional[np.ndarray] = None
    r_dl: Optional[np.ndarray] = None
    r_uu: Optional[np.ndarray] = None
    chi_ul: Optional[np.ndarray] = None
    chi_dl: Optional[np.ndarray] = None
    chi_uu: Optional[np.ndarray] = None
    bs_ids: Optional[np.ndarray] = field(default=None)

    @property
    def n_bs(self):
        return max(self.g_ul.shape[0], self.g_dl.shape[0])

    @property
    def k_dl(self):
        return np.bincount(self.dl_cell, minlength=self.n_bs)

    @property
    def k_ul(self):
        return np.bincount(self.ul_cell, minlength=self.n_bs)

    def ul_users(self, cell=0):
        return np.flatnonzero(self.ul_cell == cell)

    def dl_users(self, cell=0):
        return np.flatnonzero(self.dl_cell == cell)

    def dl_cell_power(self):
        """Potência total de downlink por célula (Σ_k P_{ℓ,k})."""
        return np.bincount(self.dl_cell, weights=self.dl_power, minlength=self.n_bs)

    def dl_mean_power(self):
        # P_{ℓ,k} por célula; alocação uniforme => média = P/K_ℓ
        k_dl = self.k_dl
        total = self.dl_cell_power()
        return np.divide(total, k_dl, out=np.zeros(self.n_bs), where=k_dl > 0)

    @classmethod
    def from_gains(cls, g_ul, g_dl, t, ul_cell, dl_cell, params, ul_power=None, dl_power=None):
        g_ul = np.atleast_2d(np.asarray(g_ul, dtype=float))
        g_dl = np.atleast_2d(np.asarray(g_dl, dtype=float))
        ul_cell = np.asarray(ul_cell, dtype=int).reshape(-1)
        dl_cell = np.asarray(dl_cell, dtype=int).reshape(-1)
        t = np.asarray(t, dtype=float).reshape(len(ul_cell), len(dl_cell))
        if g_ul.shape[1] != len(ul_cell) or g_dl.shape[1] != len(dl_cell):
            raise FdMimoError("gain matrices do not match the user lists")
        if ul_power is None:
            ul_power = np.full(len(ul_cell), params.p_ul)
        if dl_power is None:
            dl_power = uniform_dl_power(dl_cell, g_dl.shape[0], params.p_dl_total)
        return cls(
            g_ul=g_ul, g_dl=g_dl, t=t, ul_cell=ul_cell, dl_cell=dl_cell,
            ul_power=np.asarray(ul_power, dtype=float),
            dl_power=np.asarray(dl_power, dtype=float),
        )

    def cochannel(self, groups):
        """Mantém apenas as células no mesmo grupo de reuso da BS 0."""
        groups = np.asarray(groups)
        keep = np.flatnonzero(groups == groups[0])
        remap = -np.ones(self.n_bs, dtype=int)
        remap[keep] = np.arange(len(keep))
        ul_keep = np.flatnonzero(np.isin(self.ul_cell, keep))
        dl_keep = np.flatnonzero(np.isin(self.dl_cell, keep))

        def _pick(matrix, rows, cols):
            return None if matrix is None else matrix[np.ix_(rows, cols)]

        return replace(
            self,
            g_ul=self.g_ul[np.ix_(keep, ul_keep)],
            g_dl=self.g_dl[np.ix_(keep, dl_keep)],
            t=self.t[np.ix_(ul_keep, dl_keep)],
            ul_cell=remap[self.ul_cell[ul_keep]],
            dl_cell=remap[self.dl_cell[dl_keep]],
            ul_power=self.ul_power[ul_keep],
            dl_power=self.dl_power[dl_keep],
            r_ul=_pick(self.r_ul, keep, ul_keep),
            r_dl=_pick(self.r_dl, keep, dl_keep),
            r_uu=_pick(self.r_uu, ul_keep, dl_keep),
            chi_ul=_pick(self.chi_ul, keep, ul_keep),
            chi_dl=_pick(self.chi_dl, keep, dl_keep),
            chi_uu=_pick(self.chi_uu, ul_keep, dl_keep),
            bs_ids=keep if self.bs_ids is None else self.bs_ids[keep],
        )

    def with_uniform_powers(self, p_ul, p_dl_total):
        """P^u em todo usuário de uplink e P dividida igualmente em cada célula."""
        return replace(
            self,
            ul_power=np.full(len(self.ul_cell), float(p_ul)),
            dl_power=uniform_dl_power(self.dl_cell, self.n_bs, float(p_dl_total)),
        )

    def with_equal_power(self, power):
        return replace(
            self,
            ul_power=np.full(len(self.ul_cell), float(power)),
            dl_power=np.full(len(self.dl_cell), float(power)),
        )


def uniform_dl_power(dl_cell, n_bs, p_total):
    # Alocação uniforme: Σ_k P_{ℓ,k} = P em cada célula com usuários
    counts = np.bincount(dl_cell, minlength=n_bs)
    return p_total / counts[dl_cell] if len(dl_cell) else np.empty(0)


def build_scenario(layout, params, seed):
    """Sorteia usuários e sombreamento e avalia G e T pela mesma lei de perda."""
    from netgeom import drop_users

    if layout.n_bs == 0:
        raise FdMimoError("empty layout: at least one base station is required")
    drop = drop_users(layout, params.k_ul, params.k_dl, params.d_min, seed, params)

    # Ganhos entre usuários: mesma lei de percurso e sombreamento de G
    rng = spawn_rng(seed, STREAM_SHADOW_UU)
    r_uu = np.linalg.norm(drop.uplink_users[:, None, :] - drop.downlink_users[None, :, :], axis=-1)
    r_uu = np.maximum(r_uu, max(params.d_min, 1e-3))
    chi_uu = sample_shadowing(params.sigma_sh_db, rng, size=r_uu.shape)

    r_ul, r_dl = drop.ul_distance.T, drop.dl_distance.T
    chi_ul, chi_dl = drop.ul_chi.T, drop.dl_chi.T
    scenario = LargeScaleScenario(
        g_ul=large_scale_gain(r_ul, chi_ul, params),
        g_dl=large_scale_gain(r_dl, chi_dl, params),
        t=large_scale_gain(r_uu, chi_uu, params),
        ul_cell=drop.ul_cell,
        dl_cell=drop.dl_cell,
        ul_power=np.full(len(drop.ul_cell), params.p_ul),
        dl_power=uniform_dl_power(drop.dl_cell, layout.n_bs, params.p_dl_total),
        r_ul=r_ul, r_dl=r_dl, r_uu=r_uu,
        chi_ul=chi_ul, chi_dl=chi_dl, chi_uu=chi_uu,
        bs_ids=np.arange(layout.n_bs),
    )
    logger.debug("scenario: %d BSs, %d UL / %d DL users", layout.n_bs,
                 len(drop.ul_cell), len(drop.dl_cell))
    return scenario


@dataclass(frozen=True)
class ChannelRealization:
    """Canais de pequena escala vistos pela BS 0, com eixo de trials à esquerda.

    h_ul[t, n, :]     BS 0 -> usuário de uplink n (canal reverso)
    h_dl[t, l, k, :]  BS l -> usuário de downlink k da célula 0; o precoder
                      casado da BS 0 para esse usuário é o próprio vetor
    h_own[l][t, j, :] BS l -> seus próprios usuários de downlink (l != 0)
    h_si[t, :, :]     canal de SI da BS 0 (inclui o erro de estimação)
    g[t, n, k]        usuário de uplink n -> usuário de downlink k da célula 0
    """

    h_ul: np.ndarray
    h_dl: np.ndarray
    h_own: list
    h_si: np.ndarray
    g: np.ndarray


def sample_realization(scenario, params, seed, n_trials=1):
    rng = as_rng(seed)
    n = params.n_antennas
    dl0 = scenario.dl_users(0)
    h_ul = complex_normal(rng, (n_trials, len(scenario.ul_cell), n))
    h_dl = complex_normal(rng, (n_trials, scenario.n_bs, len(dl0), n))
    h_own = [None] + [
        complex_normal(rng, (n_trials, len(scenario.dl_users(cell)), n))
        for cell in range(1, scenario.n_bs)
    ]
    # Ĥ_SI exato + erro aditivo de variância ε·μ_SI²
    h_si = complex_normal(rng, (n_trials, n, n), params.mu_si2)
    if params.si_est_error > 0:
        h_si = h_si + complex_normal(rng, (n_trials, n, n), params.mu_si2 * params.si_est_error)
    g = complex_normal(rng, (n_trials, len(scenario.ul_cell), len(dl0)), params.iui_variance)
    return ChannelRealization(h_ul=h_ul, h_dl=h_dl, h_own=h_own, h_si=h_si, g=g)


def scenario_to_frame(scenario):
    """Snapshot dos ganhos (para depuração)."""
    rows = []
    for link, gains, cells in (("ul", scenario.g_ul, scenario.ul_cell),
                               ("dl", scenario.g_dl, scenario.dl_cell)):
        for user, cell in enumerate(cells):
            for bs in range(scenario.n_bs):
                rows.append({"link": link, "user": user, "serving_bs": int(cell),
                             "bs_id": bs, "gain": gains[bs, user]})
    return pd.DataFrame(rows, columns=["link", "user", "serving_bs", "bs_id", "gain"])
