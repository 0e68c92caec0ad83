"""
Utilitários compartilhados
--------------------------
Erros do domínio, conversões em dB, fluxos de números aleatórios
reprodutíveis, configuração de logging e leitura do ambiente (.env).
"""

import logging
import os

import numpy as np
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Fluxos de RNG (primeiro elemento da chave do SeedSequence)
STREAM_LAYOUT = 1
STREAM_DROP_UL = 2
STREAM_DROP_DL = 3
STREAM_SHADOW_UU = 4
STREAM_GROUPS = 5
STREAM_SCENARIO = 20
STREAM_ORACLE_UL = 30
STREAM_ORACLE_DL = 31
STREAM_COROLLARY = 40

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class FdMimoError(ValueError):
    """Erro de domínio (pré-condição violada, cenário inválido...)."""


class ConfigError(FdMimoError):
    """Parâmetro de configuração inválido; `field` identifica a chave."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


def load_environment():
    # Primeiro o .env local, depois o ambiente do processo (mesma ordem do deploy)
    load_dotenv()
    return {
        "log_level": os.getenv("FDMIMO_LOG_LEVEL", "INFO"),
        "workers": os.getenv("FDMIMO_WORKERS"),
    }


def setup_logging(level=None):
    if level is None:
        level = load_environment()["log_level"]
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)


def default_workers():
    value = load_environment()["workers"]
    if not value:
        return 1
    try:
        workers = int(value)
    except ValueError:
        raise ConfigError("FDMIMO_WORKERS", f"expected an integer, got {value!r}")
    return max(1, workers)


# Conversões (fonte única para dB/dBm)
def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(value)


def dbm_to_watts(value_dbm):
    return 10.0 ** ((np.asarray(value_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(value_w):
    return 10.0 * np.log10(value_w) + 30.0


def noise_power(bandwidth_hz, density_dbm_hz=-174.0):
    """σ² = N0·B, N0 em dBm/Hz -> W."""
    return float(dbm_to_watts(density_dbm_hz) * bandwidth_hz)


def spawn_rng(seed, *key):
    """Gerador independente para o fluxo (seed, *key).

    A chave funciona como contador: o mesmo (seed, key) gera sempre a mesma
    sequência, independentemente de quais outros fluxos foram usados.
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


def derive_seed(seed, *key):
    """Semente inteira do fluxo (seed, *key), para quem espera um int."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise FdMimoError("seed is required for reproducible sampling")
    return np.random.default_rng(int(seed))


def complex_normal(rng, shape, variance=1.0):
    """Amostras CN(0, variance): partes real e imaginária com variância variance/2."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def log2_1p(x):
    # log2(1 + x) preciso também para x muito pequeno
    return np.log1p(x) / np.log(2.0)
