"""
Estudos reproduzíveis
---------------------
Cada estudo recebe um ExperimentConfig resolvido e devolve um DataFrame
pronto para CSV. Cenários de larga escala são sorteados por índice
(semente derivada de (seed, índice)) e avaliados em paralelo com ordem
de saída fixa.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd

from channel import build_scenario
from linkperf import (
    ceiling_ratio,
    downlink_sqinr,
    downlink_sqinr_all,
    effective_se,
    lemma1_downlink,
    lemma1_downlink_consistency,
    lemma1_uplink,
    lemma2_downlink,
    lemma2_downlink_consistency,
    lemma2_uplink,
    lemma3_downlink,
    lemma3_uplink,
    uplink_sqinr,
    uplink_sqinr_all,
)
from netgeom import (
    LayoutKind,
    Region,
    build_hex_lattice,
    build_ppp_layout,
    hex_density,
    reuse_groups,
)
from powermodel import power_sweep as sweep_power
from simkernel import compare_with_closed_form, estimate_cdf, run_oracle
from utils import FdMimoError, STREAM_SCENARIO, derive_seed

logger = logging.getLogger(__name__)

# Potências escalonadas até o regime de potência infinita
LEMMA2_POWER_SCALE = 1e6

# Razões forma fechada/teto dentro desta tolerância contam como 1 (ou N_a)
RATIO_RTOL = 5e-2


def scenario_seed(config, index):
    return derive_seed(config.run.seed, STREAM_SCENARIO, index)


def make_layout(settings, kind, seed):
    hex_layout = build_hex_lattice(settings.tiers, settings.cell_radius)
    if LayoutKind(kind) == LayoutKind.HEX:
        return hex_layout
    intensity = settings.intensity or hex_density(settings.cell_radius)
    region = hex_layout.region if settings.region_side is None else Region.square(settings.region_side)
    return build_ppp_layout(intensity, region, seed)


def _scenarios(config, params, kind=None):
    kind = config.layout.kind if kind is None else kind

    def _build(index):
        seed = scenario_seed(config, index)
        layout = make_layout(config.layout, kind, seed)
        if layout.n_bs == 0:
            logger.debug("scenario %d: empty PPP draw, skipped", index)
            return None
        return layout, build_scenario(layout, params, seed)

    built = _ordered_map(_build, range(config.run.scenarios), config.run.workers)
    kept = [item for item in built if item is not None]
    if not kept:
        raise FdMimoError("no usable scenario: every layout draw was empty")
    return kept


def _ordered_map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _mean_se(breakdowns, params):
    if not breakdowns:
        return np.nan
    return float(np.mean([effective_se(item, params) for item in breakdowns]))


def outage_curves(config):
    """CDFs empíricas da SQINR de downlink por (layout, α)."""
    curves = {}
    for kind in (LayoutKind.HEX, LayoutKind.PPP):
        built = _scenarios(config, config.system, kind)
        for alpha in config.sweep.alphas:
            params = config.system.updated(alpha_ul=alpha, alpha_dl=alpha, bits_ul=None, bits_dl=None)
            samples = [
                item.sqinr_db
                for _, scenario in built
                for item in downlink_sqinr_all(scenario, params)
            ]
            curves[(kind, alpha)] = estimate_cdf(samples)
            logger.info("outage_cdf %s alpha=%g: %d samples", kind.value, alpha, len(samples))
    return curves


def quantization_gap(curves, level):
    """Distância em dB, no nível `level` da CDF, entre o maior e o menor α de cada layout."""
    gaps = {}
    for kind in dict.fromkeys(kind for kind, _ in curves):
        alphas = sorted(alpha for other, alpha in curves if other == kind)
        if len(alphas) < 2:
            continue
        low, high = curves[(kind, alphas[0])], curves[(kind, alphas[-1])]
        gaps[kind] = high.quantile(level) - low.quantile(level)
    return gaps


def outage_cdf(config):
    """CDF da SQINR de downlink: hex e PPP, baixa e plena resolução."""
    curves = outage_curves(config)
    frames = []
    for (kind, alpha), cdf in curves.items():
        frame = cdf.to_frame()
        frame.insert(0, "curve", f"{kind.value}_alpha{alpha:g}")
        frames.append(frame)
    level = config.sweep.cdf_level
    for kind, gap in quantization_gap(curves, level).items():
        logger.info("outage_cdf %s: SQINR gap at CDF %.2f between lowest and highest alpha is %.2f dB",
                    kind.value, level, gap)
    return pd.concat(frames, ignore_index=True)[["curve", "sample_db", "prob"]]


def se_vs_bits(config):
    """SE média vs. b para cada potência de SI, com o teto de resolução infinita."""
    built = _scenarios(config, config.system)
    rows = []
    for p_si in config.sweep.si_powers:
        base = config.system.updated(p_si=p_si)
        ceiling = np.mean([
            lemma1_uplink(scenario, base, k).se
            for _, scenario in built for k in scenario.ul_users(0)
        ] or [np.nan])
        for b in config.sweep.bits:
            params = base.updated(bits_ul=b, bits_dl=b, alpha_ul=None, alpha_dl=None)
            ul = [item for _, s in built for item in uplink_sqinr_all(s, params)]
            dl = [item for _, s in built for item in downlink_sqinr_all(s, params)]
            rows.append([int(b), p_si, "ul", _mean_se(ul, params), ceiling])
            rows.append([int(b), p_si, "dl", _mean_se(dl, params), np.nan])
        logger.info("se_vs_bits P_SI=%g W done (ceiling %.4f bit/s/Hz)", p_si, ceiling)
    return pd.DataFrame(rows, columns=["b", "p_si_W", "link", "se_bps_hz", "lemma1_se"])


def _scaled_params(config, params, n):
    sweep = config.sweep
    return params.updated(
        n_antennas=int(n),
        p_ul=sweep.energy_ul / n,
        p_dl_total=sweep.energy_dl / n,
        p_si=sweep.energy_si / n,
    )


def _lemma3_ceilings(scenario, params):
    # E = P·N_a recuperado das potências já escalonadas do cenário
    n = params.n_antennas
    k_dl = scenario.k_dl[0]
    ul = [
        lemma3_uplink(scenario.g_ul[0, k], scenario.ul_power[k] * n, params.si_power * n,
                      params.alpha_u, params.alpha_d, params.si_channel_power, k_dl, params.sigma2)
        for k in scenario.ul_users(0)
    ]
    dl = [
        lemma3_downlink(scenario.g_dl[0, k], scenario.dl_power[k] * n, params.alpha_d, params.sigma2)
        for k in scenario.dl_users(0)
    ]
    return ul, dl


def se_vs_antennas(config):
    """SE vs. N_a para FD/HD, baixa/plena resolução e fatores de reuso."""
    sweep = config.sweep
    built = _scenarios(config, config.system)
    rows = []
    for duplex in sweep.duplex_modes:
        for label, bits in (("low", sweep.low_bits), ("full", None)):
            for reuse in sweep.reuse_factors:
                restricted = [
                    scenario.cochannel(reuse_groups(layout, reuse, scenario_seed(config, i)))
                    for i, (layout, scenario) in enumerate(built)
                ]
                base = config.system.updated(duplex=duplex, reuse=reuse, bits_ul=bits, bits_dl=bits,
                                             alpha_ul=None, alpha_dl=None)
                for n in sweep.antennas:
                    if sweep.power_scaling:
                        params = _scaled_params(config, base, n)
                        scenarios = [s.with_uniform_powers(params.p_ul, params.p_dl_total) for s in restricted]
                    else:
                        params = base.updated(n_antennas=int(n))
                        scenarios = restricted
                    ul = [item for s in scenarios for item in uplink_sqinr_all(s, params)]
                    dl = [item for s in scenarios for item in downlink_sqinr_all(s, params)]
                    ceiling_ul = ceiling_dl = np.nan
                    if sweep.power_scaling:
                        pairs = [_lemma3_ceilings(s, params) for s in scenarios]
                        ceiling_ul = params.se_prefactor * np.mean([c.se for p in pairs for c in p[0]] or [np.nan])
                        ceiling_dl = params.se_prefactor * np.mean([c.se for p in pairs for c in p[1]] or [np.nan])
                    rows.append([duplex, label, reuse, int(n), "ul", _mean_se(ul, params), ceiling_ul])
                    rows.append([duplex, label, reuse, int(n), "dl", _mean_se(dl, params), ceiling_dl])
                logger.info("se_vs_antennas %s/%s reuse=%d done", duplex, label, reuse)
    return pd.DataFrame(rows, columns=["duplex", "resolution", "reuse", "N_a", "link", "se_bps_hz", "lemma3_se"])


def _loud_power(params):
    return LEMMA2_POWER_SCALE * (max(params.p_ul, params.p_dl_total) or 1.0)


def _report_ceiling_gaps(frame, config, n_max):
    for (link, check), group in frame.groupby(["link", "check"], sort=False):
        ratio = group["ratio"].median()
        logger.info("lemma_check %s %s: median ratio %.4g", link, check, ratio)
        if np.isnan(ratio) or np.isclose(ratio, 1.0, rtol=RATIO_RTOL):
            continue
        n = n_max if check == "lemma3" else config.system.n_antennas
        if np.isclose(ratio, n, rtol=RATIO_RTOL):
            logger.warning("lemma_check %s %s: closed form is N_a=%d x the ceiling (array gain absent from the ceiling)",
                           link, check, n)
            continue
        se = np.log2(1.0 + group["closed_form_sqinr"]).mean()
        ceiling_se = np.log2(1.0 + group["ceiling_sqinr"]).mean()
        logger.warning("lemma_check %s %s: median ratio %.4g at N_a=%d, mean SE %.2f vs ceiling %.2f bit/s/Hz",
                       link, check, ratio, n, se, ceiling_se)


def lemma_check(config):
    """Forma fechada vs. tetos assintóticos, por usuário da BS 0."""
    sweep = config.sweep
    built = _scenarios(config, config.system)
    n_max = max(sweep.antennas)
    rows = []

    def _row(index, link, user, check, closed, ceiling):
        rows.append([index, link, int(user), check, closed, ceiling, ceiling_ratio(closed, ceiling)])

    fine = config.system.updated(bits_ul=sweep.lemma_bits, bits_dl=sweep.lemma_bits,
                                 alpha_ul=None, alpha_dl=None)
    big = _loud_power(config.system)
    loud_params = config.system.updated(p_si=big)
    scaled = _scaled_params(config, config.system, n_max)

    for index, (_, scenario) in enumerate(built):
        loud = scenario.with_equal_power(big)
        scaled_scenario = scenario.with_uniform_powers(scaled.p_ul, scaled.p_dl_total)
        ul3, dl3 = _lemma3_ceilings(scaled_scenario, scaled)

        for i, k in enumerate(scenario.ul_users(0)):
            _row(index, "ul", k, "lemma1", uplink_sqinr(scenario, fine, k).sqinr,
                 lemma1_uplink(scenario, fine, k).sqinr)
            _row(index, "ul", k, "lemma2", uplink_sqinr(loud, loud_params, k).sqinr,
                 lemma2_uplink(loud, loud_params, k).sqinr)
            _row(index, "ul", k, "lemma3", uplink_sqinr(scaled_scenario, scaled, k).sqinr,
                 ul3[i].sqinr)
        for i, k in enumerate(scenario.dl_users(0)):
            if index == 0:
                lemma1_downlink_consistency(scenario, config.system, k)
                lemma2_downlink_consistency(scenario, config.system, k, big)
            _row(index, "dl", k, "lemma1", downlink_sqinr(scenario, fine, k).sqinr,
                 lemma1_downlink(scenario, fine, k).sqinr)
            _row(index, "dl", k, "lemma2", downlink_sqinr(loud, loud_params, k).sqinr,
                 lemma2_downlink(loud, loud_params, k).sqinr)
            _row(index, "dl", k, "lemma3", downlink_sqinr(scaled_scenario, scaled, k).sqinr,
                 dl3[i].sqinr)
    frame = pd.DataFrame(rows, columns=["scenario", "link", "user", "check",
                                        "closed_form_sqinr", "ceiling_sqinr", "ratio"])
    _report_ceiling_gaps(frame, config, n_max)
    return frame


def power_sweep(config):
    """Potência de recepção e eficiência energética vs. b, N_a e cenário de ADC."""
    sweep = config.sweep
    built = _scenarios(config, config.system)
    rates = {}

    def _rate(b, n):
        if (b, n) not in rates:
            params = config.system.updated(n_antennas=int(n), bits_ul=b, alpha_ul=None)
            se = [
                sum(item.se for item in uplink_sqinr_all(scenario, params))
                for _, scenario in built
            ]
            rates[(b, n)] = params.bandwidth_hz * params.se_prefactor * float(np.mean(se))
        return rates[(b, n)]

    return sweep_power(sweep.adc_scenarios, sweep.bits, sweep.antennas,
                       config.system.bandwidth_hz, _rate)


def oracle_check(config):
    """Termos de forma fechada vs. potências empíricas do oráculo."""
    params = config.system.updated(n_antennas=config.oracle.n_antennas)
    seed = scenario_seed(config, 0)
    layout = make_layout(config.layout, config.layout.kind, seed)
    if layout.n_bs == 0:
        raise FdMimoError("oracle_check: the layout draw has no base stations")
    scenario = build_scenario(layout, params, seed)
    frames = []
    for link, closed_form in (("ul", uplink_sqinr_all), ("dl", downlink_sqinr_all)):
        breakdowns = closed_form(scenario, params)
        if not breakdowns:
            logger.warning("oracle_check: BS 0 serves no %s users", link)
            continue
        estimate = run_oracle(scenario, params, link, config.run.trials, config.run.seed,
                              workers=config.run.workers, block_size=config.run.block_size)
        frame = compare_with_closed_form(estimate, breakdowns)
        outliers = frame[frame["z"].abs() > 4]
        if len(outliers):
            logger.warning("oracle_check %s: %d terms beyond 4 standard errors (%s)", link,
                           len(outliers), ", ".join(sorted(set(outliers["term"]))))
        frames.append(frame)
        logger.info("oracle_check %s: %d users, %d trials", link, len(breakdowns), estimate.n_trials)
    return pd.concat(frames, ignore_index=True)


EXPERIMENTS = {
    "outage_cdf": outage_cdf,
    "se_vs_bits": se_vs_bits,
    "se_vs_antennas": se_vs_antennas,
    "lemma_check": lemma_check,
    "power_sweep": power_sweep,
    "oracle_check": oracle_check,
}

