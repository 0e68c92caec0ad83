"""Cenários montados à mão para os testes (ganhos explícitos, σ² = 1)."""

import numpy as np
import pytest

from channel import LargeScaleScenario, SystemParams


def small_params(**changes):
    base = dict(
        n_antennas=16,
        noise_power_w=1.0,
        p_ul=1.0,
        p_dl_total=1.0,
        p_si=0.5,
        mu_si2=0.2,
        sigma_iui2=0.5,
        alpha_ul=0.8,
        alpha_dl=0.7,
        sigma_sh_db=0.0,
    )
    base.update(changes)
    return SystemParams(**base)


def three_cell_scenario(params, dl_cell):
    """Três células; uplink: dois usuários na BS 0 e um em cada vizinha."""
    ul_cell = [0, 0, 1, 2]
    dl_cell = list(dl_cell)
    rng = np.random.default_rng(7)
    g_ul = rng.uniform(0.1, 0.5, size=(3, len(ul_cell)))
    g_ul[0] = [1.0, 0.6, 0.3, 0.2]
    g_dl = rng.uniform(0.1, 0.4, size=(3, len(dl_cell)))
    g_dl[0, np.array(dl_cell) == 0] = np.linspace(1.0, 0.7, int(np.sum(np.array(dl_cell) == 0)))
    t = rng.uniform(0.1, 0.6, size=(len(ul_cell), len(dl_cell)))
    return LargeScaleScenario.from_gains(g_ul, g_dl, t, ul_cell, dl_cell, params)


@pytest.fixture
def params():
    return small_params()


@pytest.fixture
def uplink_scenario(params):
    # K^d = 1 na BS 0
    return three_cell_scenario(params, dl_cell=[0, 1, 1, 2, 2])


@pytest.fixture
def downlink_scenario(params):
    return three_cell_scenario(params, dl_cell=[0, 0, 1, 2, 2])


@pytest.fixture
def single_user_scenario():
    params = SystemParams(n_antennas=100, noise_power_w=1.0, p_ul=1.0, p_dl_total=1.0, p_si=0.0)
    scenario = LargeScaleScenario.from_gains(
        g_ul=[[1.0]], g_dl=[[1.0]], t=[[0.0]], ul_cell=[0], dl_cell=[0], params=params,
    )
    return scenario, params
