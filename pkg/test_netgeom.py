import numpy as np
import pytest
from scipy import stats
from scipy.spatial.distance import cdist

from channel import SystemParams
from netgeom import (
    LayoutKind,
    Region,
    associate,
    build_hex_lattice,
    build_ppp_layout,
    drop_users,
    hex_density,
    layout_to_frame,
    reuse_groups,
    users_to_frame,
)
from utils import FdMimoError


def test_hex_lattice_counts_and_spacing():
    for tiers, count in ((0, 1), (1, 7), (2, 19), (3, 37)):
        layout = build_hex_lattice(tiers, 500.0)
        assert layout.n_bs == count
        assert layout.kind == LayoutKind.HEX

    layout = build_hex_lattice(2, 500.0)
    assert np.allclose(layout.bs_positions[0], 0.0)
    distance = cdist(layout.bs_positions, layout.bs_positions)
    np.fill_diagonal(distance, np.inf)
    assert np.allclose(distance.min(axis=1), np.sqrt(3) * 500.0)
    # seis vizinhos à distância mínima em torno da BS central
    assert np.sum(np.isclose(distance[0], np.sqrt(3) * 500.0)) == 6


def test_hex_lattice_rejects_bad_arguments():
    with pytest.raises(FdMimoError):
        build_hex_lattice(-1, 500.0)
    with pytest.raises(FdMimoError):
        build_hex_lattice(1, 0.0)


def test_region_rejects_zero_area():
    with pytest.raises(FdMimoError):
        Region(0.0, 0.0, 0.0, 10.0)
    region = Region.square(100.0)
    assert region.area == pytest.approx(1e4)
    assert region.contains(region.sample(np.random.default_rng(0), 50)).all()


def test_ppp_count_matches_intensity():
    region = Region.square(1000.0)
    mean = 20.0
    intensity = mean / region.area
    counts = np.array([build_ppp_layout(intensity, region, seed).n_bs for seed in range(10_000)])

    # caudas agrupadas para manter a contagem esperada >= 5 por classe
    low, high = 9, 31
    observed = np.concatenate([
        [np.sum(counts <= low)],
        np.bincount(counts, minlength=high)[low + 1:high],
        [np.sum(counts >= high)],
    ])
    probs = np.concatenate([
        [stats.poisson.cdf(low, mean)],
        stats.poisson.pmf(np.arange(low + 1, high), mean),
        [stats.poisson.sf(high - 1, mean)],
    ])
    expected = probs / probs.sum() * len(counts)
    assert expected.min() >= 5
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_ppp_is_deterministic_and_centered():
    region = Region.square(2000.0)
    a = build_ppp_layout(2e-5, region, 42)
    b = build_ppp_layout(2e-5, region, 42)
    assert np.array_equal(a.bs_positions, b.bs_positions)
    distances = np.linalg.norm(a.bs_positions - region.center, axis=1)
    assert distances[0] == distances.min()


def test_ppp_empty_layout_is_rejected_downstream():
    layout = build_ppp_layout(1e-12, Region.square(10.0), 0)
    assert layout.n_bs == 0
    with pytest.raises(FdMimoError):
        drop_users(layout, 1, 1)


def test_ppp_rejects_bad_intensity():
    with pytest.raises(FdMimoError):
        build_ppp_layout(0.0, Region.square(10.0), 0)


def test_hex_density_matches_cell_area():
    assert hex_density(500.0) * (3 * np.sqrt(3) / 2 * 500.0 ** 2) == pytest.approx(1.0)


def test_association_picks_strongest_bs():
    layout = build_hex_lattice(1, 500.0)
    params = SystemParams(sigma_sh_db=0.0)
    users = layout.bs_positions + 20.0
    chi = np.ones((len(users), layout.n_bs))
    result = associate(layout, users, params, chi)
    assert np.array_equal(result.cell, np.arange(layout.n_bs))

    # sombreamento forte favorece uma BS mais distante
    chi[0, 3] = 1e9
    assert associate(layout, users, params, chi).cell[0] == 3


def test_association_ignores_a_common_gain_scale():
    layout = build_hex_lattice(2, 500.0)
    rng = np.random.default_rng(11)
    users = layout.region.sample(rng, 400)
    chi = 10 ** (rng.normal(0.0, 8.0, size=(400, layout.n_bs)) / 10)
    base = associate(layout, users, SystemParams(), chi)
    for scale in (1e-6, 3.7, 1e4):
        louder = associate(layout, users, SystemParams(l_ref=scale), chi)
        assert np.array_equal(louder.cell, base.cell)
        assert np.allclose(louder.gain, scale / SystemParams().l_ref * base.gain)
        assert np.array_equal(associate(layout, users, SystemParams(), scale * chi).cell, base.cell)


def test_drop_users_fills_every_cell():
    layout = build_hex_lattice(1, 500.0)
    drop = drop_users(layout, 3, 2, d_min=10.0, seed=5, params=SystemParams())
    assert np.array_equal(drop.k_ul, np.full(7, 3))
    assert np.array_equal(drop.k_dl, np.full(7, 2))
    assert drop.ul_distance.min() >= 10.0
    assert drop.dl_distance.min() >= 10.0
    assert np.all(np.diff(drop.ul_cell) >= 0)

    again = drop_users(layout, 3, 2, d_min=10.0, seed=5, params=SystemParams())
    assert np.array_equal(drop.uplink_users, again.uplink_users)


def test_drop_users_gives_up_when_region_is_too_small():
    layout = build_hex_lattice(0, 10.0)
    with pytest.raises(FdMimoError):
        drop_users(layout, 1, 0, d_min=100.0, max_rounds=3)


def test_reuse_groups_separate_neighbours():
    layout = build_hex_lattice(2, 500.0)
    distance = cdist(layout.bs_positions, layout.bs_positions)
    adjacent = np.isclose(distance, np.sqrt(3) * 500.0)
    for factor in (3, 7):
        groups = reuse_groups(layout, factor)
        assert set(groups) == set(range(factor))
        rows, cols = np.nonzero(adjacent)
        assert np.all(groups[rows] != groups[cols])
    assert np.all(reuse_groups(layout, 1) == 0)
    with pytest.raises(FdMimoError):
        reuse_groups(layout, 4)


def test_reuse_groups_for_ppp_keep_bs0_in_group_zero():
    layout = build_ppp_layout(3e-5, Region.square(2000.0), 1)
    groups = reuse_groups(layout, 3, seed=9)
    assert groups[0] == 0
    assert set(groups) <= {0, 1, 2}


def test_frames_have_expected_columns():
    layout = build_hex_lattice(1, 500.0)
    drop = drop_users(layout, 1, 1, seed=0)
    assert list(layout_to_frame(layout).columns) == ["bs_id", "x_m", "y_m"]
    frame = users_to_frame(drop)
    assert list(frame.columns) == ["ue_id", "link", "x_m", "y_m", "bs_id"]
    assert len(frame) == 14
    assert set(frame["link"]) == {"ul", "dl"}
