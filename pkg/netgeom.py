"""
Geometria da rede
-----------------
Layouts de estações base (reticulado hexagonal e PPP), sorteio de usuários
e associação pelo maior ganho de larga escala. A BS 0 é sempre a célula de
interesse; as demais atuam apenas como interferentes.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from utils import (
    FdMimoError,
    STREAM_DROP_DL,
    STREAM_DROP_UL,
    STREAM_GROUPS,
    STREAM_LAYOUT,
    spawn_rng,
)

logger = logging.getLogger(__name__)

DEFAULT_CELL_RADIUS = 500.0
DEFAULT_TIERS = 2
DEFAULT_D_MIN = 10.0

# Direções axiais dos seis vizinhos; percorrer o anel nesta ordem fecha o hexágono
_HEX_DIRECTIONS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


class LayoutKind(str, Enum):
    HEX = "hex"
    PPP = "ppp"


@dataclass(frozen=True)
class Region:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise FdMimoError(f"degenerate region {self}: area must be > 0")

    @property
    def area(self):
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def center(self):
        return np.array([(self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0])

    def contains(self, points):
        points = np.atleast_2d(points)
        return (
            (points[:, 0] >= self.x_min) & (points[:, 0] <= self.x_max)
            & (points[:, 1] >= self.y_min) & (points[:, 1] <= self.y_max)
        )

    def sample(self, rng, n):
        x = rng.uniform(self.x_min, self.x_max, n)
        y = rng.uniform(self.y_min, self.y_max, n)
        return np.column_stack([x, y])

    @classmethod
    def square(cls, side):
        half = side / 2.0
        return cls(-half, half, -half, half)


@dataclass(frozen=True)
class NetworkLayout:
    kind: LayoutKind
    bs_positions: np.ndarray
    region: Region
    tiers: Optional[int] = None
    intensity: Optional[float] = None
    cell_radius: Optional[float] = None
    axial: Optional[np.ndarray] = None

    @property
    def n_bs(self):
        return len(self.bs_positions)


@dataclass(frozen=True)
class UserDrop:
    uplink_users: np.ndarray
    downlink_users: np.ndarray
    ul_cell: np.ndarray
    dl_cell: np.ndarray
    ul_distance: np.ndarray
    dl_distance: np.ndarray
    ul_chi: np.ndarray
    dl_chi: np.ndarray

    @property
    def k_ul(self):
        return np.bincount(self.ul_cell, minlength=self.ul_distance.shape[1])

    @property
    def k_dl(self):
        return np.bincount(self.dl_cell, minlength=self.dl_distance.shape[1])


@dataclass(frozen=True)
class AssociationMap:
    cell: np.ndarray
    gain: np.ndarray


def hex_density(cell_radius):
    """BSs por m² de um reticulado hexagonal (área da célula 3√3/2·R²)."""
    return 1.0 / (1.5 * np.sqrt(3.0) * cell_radius ** 2)


def _hex_axial(tiers):
    # Centro, depois anel por anel (ordem determinística)
    coords = [(0, 0)]
    for ring in range(1, tiers + 1):
        # canto inicial: direção 4 multiplicada pelo raio do anel
        q, r = _HEX_DIRECTIONS[4][0] * ring, _HEX_DIRECTIONS[4][1] * ring
        for dq, dr in _HEX_DIRECTIONS:
            for _ in range(ring):
                coords.append((q, r))
                q, r = q + dq, r + dr
    return np.array(coords, dtype=int)


def build_hex_lattice(tiers=DEFAULT_TIERS, cell_radius=DEFAULT_CELL_RADIUS):
    if tiers < 0:
        raise FdMimoError(f"tiers must be >= 0, got {tiers}")
    if cell_radius <= 0:
        raise FdMimoError(f"cell_radius must be > 0, got {cell_radius}")

    axial = _hex_axial(int(tiers))
    spacing = np.sqrt(3.0) * cell_radius
    q = axial[:, 0].astype(float)
    r = axial[:, 1].astype(float)
    positions = np.column_stack([spacing * (q + r / 2.0), spacing * (np.sqrt(3.0) / 2.0) * r])

    pad = cell_radius
    region = Region(
        positions[:, 0].min() - pad, positions[:, 0].max() + pad,
        positions[:, 1].min() - pad, positions[:, 1].max() + pad,
    )
    return NetworkLayout(
        kind=LayoutKind.HEX,
        bs_positions=positions,
        region=region,
        tiers=int(tiers),
        cell_radius=float(cell_radius),
        axial=axial,
    )


def build_ppp_layout(intensity, region, seed):
    if intensity <= 0:
        raise FdMimoError(f"intensity must be > 0, got {intensity}")
    if region.area <= 0:
        raise FdMimoError("degenerate region: area must be > 0")

    rng = spawn_rng(seed, STREAM_LAYOUT)
    count = rng.poisson(intensity * region.area)
    positions = region.sample(rng, count)

    # BS de interesse: a mais próxima do centro da região
    if count:
        order = np.argsort(np.linalg.norm(positions - region.center, axis=1), kind="stable")
        first = order[0]
        rest = np.delete(np.arange(count), first)
        positions = positions[np.concatenate([[first], rest])]
    return NetworkLayout(
        kind=LayoutKind.PPP,
        bs_positions=positions.reshape(-1, 2),
        region=region,
        intensity=float(intensity),
    )


def reuse_groups(layout, factor=1, seed=0):
    """Grupo de frequência de cada BS (fator de reuso 1, 3 ou 7)."""
    if factor not in (1, 3, 7):
        raise FdMimoError(f"reuse factor must be 1, 3 or 7, got {factor}")
    if factor == 1:
        return np.zeros(layout.n_bs, dtype=int)
    if layout.kind == LayoutKind.HEX:
        q, r = layout.axial[:, 0], layout.axial[:, 1]
        if factor == 3:
            return np.mod(q - r, 3)
        return np.mod(q + 3 * r, 7)
    rng = spawn_rng(seed, STREAM_GROUPS)
    groups = rng.integers(0, factor, layout.n_bs)
    if layout.n_bs:
        groups[0] = 0
    return groups


def associate(layout, users, params, chi):
    """Associa cada usuário à BS de maior ganho G = L_ref·χ/r^η.

    Empates ficam com o menor índice de BS (np.argmax devolve o primeiro).
    """
    from channel import large_scale_gain

    if layout.n_bs == 0:
        raise FdMimoError("empty layout: no base stations to associate with")
    users = np.atleast_2d(users)
    distance = cdist(users, layout.bs_positions)
    gains = large_scale_gain(distance, chi, params)
    cell = np.argmax(gains, axis=1)
    return AssociationMap(cell=cell, gain=gains[np.arange(len(users)), cell])


def _fill_quota(layout, quota, d_min, params, rng, max_rounds):
    from channel import sample_shadowing

    n_bs = layout.n_bs
    need = np.full(n_bs, int(quota))
    batch = max(64, 4 * n_bs * int(quota))
    accepted = [[] for _ in range(n_bs)]

    for round_ in range(max_rounds):
        if not need.any():
            break
        points = layout.region.sample(rng, batch)
        chi = sample_shadowing(params.sigma_sh_db, rng, size=(batch, n_bs))
        distance = cdist(points, layout.bs_positions)
        keep = distance.min(axis=1) >= max(d_min, np.finfo(float).tiny)
        if not keep.any():
            continue
        points, chi, distance = points[keep], chi[keep], distance[keep]
        cells = associate(layout, points, params, chi).cell
        for c in np.flatnonzero(need):
            idx = np.flatnonzero(cells == c)[: need[c]]
            for i in idx:
                accepted[c].append((points[i], distance[i], chi[i]))
            need[c] -= len(idx)
        logger.debug("drop round %d: %d slots still open", round_, int(need.sum()))
    if need.any():
        raise FdMimoError(
            f"could not place users at d_min={d_min} m after {max_rounds} rounds "
            f"({int(need.sum())} slots open); region too small"
        )

    rows = [(c, p, d, x) for c in range(n_bs) for (p, d, x) in accepted[c]]
    if not rows:
        return (np.empty((0, 2)), np.empty(0, dtype=int),
                np.empty((0, n_bs)), np.empty((0, n_bs)))
    cell = np.array([row[0] for row in rows], dtype=int)
    points = np.array([row[1] for row in rows])
    distance = np.array([row[2] for row in rows])
    chi = np.array([row[3] for row in rows])
    return points, cell, distance, chi


def drop_users(layout, k_ul, k_dl, d_min=DEFAULT_D_MIN, seed=0, params=None, max_rounds=200):
    """Sorteia K_u e K_d usuários por célula, uniformes na região.

    Candidatos a menos de d_min de alguma BS são rejeitados; os demais são
    associados (com o sombreamento do próprio sorteio) e aceitos enquanto a
    célula escolhida tiver vaga. Usuários saem ordenados por célula.
    """
    if k_ul < 0 or k_dl < 0:
        raise FdMimoError(f"user counts must be >= 0, got K_u={k_ul}, K_d={k_dl}")
    if d_min < 0:
        raise FdMimoError(f"d_min must be >= 0, got {d_min}")
    if layout.n_bs == 0:
        raise FdMimoError("empty layout: no base stations to drop users around")
    if params is None:
        from channel import SystemParams
        params = SystemParams(sigma_sh_db=0.0)

    ul = _fill_quota(layout, k_ul, d_min, params, spawn_rng(seed, STREAM_DROP_UL), max_rounds)
    dl = _fill_quota(layout, k_dl, d_min, params, spawn_rng(seed, STREAM_DROP_DL), max_rounds)
    return UserDrop(
        uplink_users=ul[0], downlink_users=dl[0],
        ul_cell=ul[1], dl_cell=dl[1],
        ul_distance=ul[2], dl_distance=dl[2],
        ul_chi=ul[3], dl_chi=dl[3],
    )


def layout_to_frame(layout):
    return pd.DataFrame({
        "bs_id": np.arange(layout.n_bs),
        "x_m": layout.bs_positions[:, 0],
        "y_m": layout.bs_positions[:, 1],
    })


def users_to_frame(drop):
    ul = pd.DataFrame({
        "link": "ul",
        "x_m": drop.uplink_users[:, 0],
        "y_m": drop.uplink_users[:, 1],
        "bs_id": drop.ul_cell,
    })
    dl = pd.DataFrame({
        "link": "dl",
        "x_m": drop.downlink_users[:, 0],
        "y_m": drop.downlink_users[:, 1],
        "bs_id": drop.dl_cell,
    })
    frame = pd.concat([ul, dl], ignore_index=True)
    frame.insert(0, "ue_id", np.arange(len(frame)))
    return frame[["ue_id", "link", "x_m", "y_m", "bs_id"]]
