"""
Linha de comando
----------------
fdmimo <experimento> [--config ARQUIVO] [--chave=valor ...] --out DIR --seed N

Configuração em texto plano com chaves pontuadas (system.eta=3.5,
layout.tiers=2, run.scenarios=500). Precedência: padrões < --config <
--chave=valor < --seed. Cada execução grava <out>/<experimento>.csv e
<out>/manifest.txt com todos os parâmetros resolvidos, no mesmo formato
aceito por --config.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Tuple, Union, get_args, get_origin, get_type_hints

from channel import SystemParams
from experiments import EXPERIMENTS
from powermodel import AdcScenario
from simkernel import DEFAULT_BLOCK_SIZE, DEFAULT_TRIALS
from utils import ConfigError, FdMimoError, default_workers, setup_logging

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.txt"

# Como None é escrito no manifesto (qualquer um dos três é aceito na leitura)
_NONE_TOKENS = {
    "bits_ul": "inf",
    "bits_dl": "inf",
    "intensity": "auto",
    "region_side": "auto",
}
_NONE_INPUTS = ("none", "auto", "inf")


@dataclass(frozen=True)
class LayoutSettings:
    kind: str = "ppp"
    tiers: int = 2
    cell_radius: float = 500.0
    intensity: Optional[float] = None
    region_side: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("hex", "ppp"):
            raise ConfigError("layout.kind", f"must be 'hex' or 'ppp', got {self.kind!r}")
        if self.tiers < 0:
            raise ConfigError("layout.tiers", f"must be >= 0, got {self.tiers}")
        if self.cell_radius <= 0:
            raise ConfigError("layout.cell_radius", f"must be > 0, got {self.cell_radius}")
        if self.intensity is not None and self.intensity <= 0:
            raise ConfigError("layout.intensity", f"must be > 0 (or auto), got {self.intensity}")
        if self.region_side is not None and self.region_side <= 0:
            raise ConfigError("layout.region_side", f"must be > 0 (or auto), got {self.region_side}")


@dataclass(frozen=True)
class RunSettings:
    scenarios: int = 500
    trials: int = DEFAULT_TRIALS
    workers: int = 1
    block_size: int = DEFAULT_BLOCK_SIZE
    seed: int = 0

    def __post_init__(self):
        for name, minimum in (("scenarios", 1), ("trials", 2), ("workers", 1), ("block_size", 1)):
            if getattr(self, name) < minimum:
                raise ConfigError(f"run.{name}", f"must be >= {minimum}, got {getattr(self, name)}")
        if self.seed < 0:
            raise ConfigError("run.seed", f"must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class SweepSettings:
    bits: Tuple[int, ...] = tuple(range(1, 13))
    antennas: Tuple[int, ...] = (64, 128, 256, 512, 1024, 2048, 4096)
    si_powers: Tuple[float, ...] = (0.0, 10.0, 40.0)
    alphas: Tuple[float, ...] = (0.6, 1.0)
    cdf_level: float = 0.9
    duplex_modes: Tuple[str, ...] = ("fd", "hd")
    low_bits: int = 3
    reuse_factors: Tuple[int, ...] = (1, 3)
    power_scaling: bool = True
    energy_ul: float = 25.0
    energy_dl: float = 4000.0
    energy_si: float = 4000.0
    lemma_bits: int = 14
    adc_scenarios: Tuple[str, ...] = ("LPADC", "IPADC", "HPADC")

    def __post_init__(self):
        checks = (
            ("bits", all(b >= 1 for b in self.bits) and len(self.bits) > 0, "positive integers"),
            ("antennas", all(n >= 1 for n in self.antennas) and len(self.antennas) > 0, "positive integers"),
            ("si_powers", all(p >= 0 for p in self.si_powers), "non-negative powers"),
            ("alphas", all(0 < a <= 1 for a in self.alphas) and len(self.alphas) > 0, "values in (0, 1]"),
            ("cdf_level", 0 < self.cdf_level < 1, "a probability in (0, 1)"),
            ("duplex_modes", set(self.duplex_modes) <= {"fd", "hd"}, "fd and/or hd"),
            ("low_bits", self.low_bits >= 1, "an integer >= 1"),
            ("reuse_factors", set(self.reuse_factors) <= {1, 3, 7}, "factors among 1, 3, 7"),
            ("energy_ul", self.energy_ul > 0, "> 0"),
            ("energy_dl", self.energy_dl > 0, "> 0"),
            ("energy_si", self.energy_si >= 0, ">= 0"),
            ("lemma_bits", self.lemma_bits >= 1, "an integer >= 1"),
            ("adc_scenarios", set(self.adc_scenarios) <= {s.value for s in AdcScenario}, "LPADC, IPADC, HPADC"),
        )
        for name, ok, expected in checks:
            if not ok:
                raise ConfigError(f"sweep.{name}", f"expected {expected}, got {getattr(self, name)!r}")


@dataclass(frozen=True)
class OracleSettings:
    n_antennas: int = 16

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ConfigError("oracle.n_antennas", f"must be >= 1, got {self.n_antennas}")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    system: SystemParams = field(default_factory=SystemParams)
    layout: LayoutSettings = field(default_factory=LayoutSettings)
    run: RunSettings = field(default_factory=RunSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    oracle: OracleSettings = field(default_factory=OracleSettings)


SECTIONS = {
    "system": SystemParams,
    "layout": LayoutSettings,
    "run": RunSettings,
    "sweep": SweepSettings,
    "oracle": OracleSettings,
}


def experiment_names():
    return sorted(EXPERIMENTS)


def parse_kv_text(text, source="config"):
    """Linhas `chave=valor`; `#` inicia comentário, linhas vazias são ignoradas."""
    mapping = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}", f"expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{number}", "empty key")
        mapping[key] = value
    return mapping


def _parse_value(key, text, hint):
    text = text.strip()
    origin = get_origin(hint)
    if origin is Union:
        inner = [arg for arg in get_args(hint) if arg is not type(None)][0]
        if text.lower() in _NONE_INPUTS:
            return None
        return _parse_value(key, text, inner)
    if origin is tuple:
        element = get_args(hint)[0]
        return tuple(_parse_value(key, item, element) for item in text.split(",") if item.strip())
    try:
        if hint is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {hint.__name__}")
    return text


def _format_value(name, value):
    if value is None:
        return _NONE_TOKENS.get(name, "none")
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format_value(name, item) for item in value)
    return str(value)


def config_from_mapping(mapping, experiment=None):
    values = {section: {} for section in SECTIONS}
    hints = {section: get_type_hints(cls) for section, cls in SECTIONS.items()}
    for key, text in mapping.items():
        if key == "experiment":
            experiment = experiment or text.strip()
            continue
        section, _, name = key.partition(".")
        if section not in SECTIONS or name not in hints[section]:
            raise ConfigError(key, "unknown configuration key")
        values[section][name] = _parse_value(key, text, hints[section][name])

    if not experiment:
        raise ConfigError("experiment", "no experiment given")
    if experiment not in experiment_names():
        raise ConfigError("experiment", f"unknown experiment {experiment!r} (choose from {', '.join(experiment_names())})")

    try:
        system = SystemParams(**values["system"])
    except ConfigError as error:
        raise ConfigError(f"system.{error.field}", error.message)
    return ExperimentConfig(
        experiment=experiment,
        system=system,
        layout=LayoutSettings(**values["layout"]),
        run=RunSettings(**values["run"]),
        sweep=SweepSettings(**values["sweep"]),
        oracle=OracleSettings(**values["oracle"]),
    )


def config_to_text(config):
    """Manifesto: uma linha por chave, em ordem alfabética."""
    lines = {"experiment": config.experiment}
    for section in SECTIONS:
        settings = getattr(config, section)
        for item in fields(settings):
            lines[f"{section}.{item.name}"] = _format_value(item.name, getattr(settings, item.name))
    return "".join(f"{key}={lines[key]}\n" for key in sorted(lines))


def _parse_overrides(extra):
    overrides = {}
    for token in extra:
        if not token.startswith("--") or "=" not in token:
            raise ConfigError("argv", f"expected --key=value, got {token!r}")
        key, value = token[2:].split("=", 1)
        overrides[key.strip()] = value
    return overrides


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fdmimo",
        allow_abbrev=False,
        description="Full-duplex massive MIMO link-level studies with low-resolution ADC/DAC.",
        epilog="Any configuration key can be overridden with --section.key=value.",
    )
    parser.add_argument("experiment", nargs="?", help="outage_cdf, se_vs_bits, se_vs_antennas, "
                        "lemma_check, power_sweep or oracle_check")
    parser.add_argument("--config", help="key=value file (a manifest.txt from a previous run works)")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides run.seed)")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING... (default: FDMIMO_LOG_LEVEL)")
    return parser


def resolve_config(args, extra):
    mapping = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError("config", f"file not found: {path}")
        mapping.update(parse_kv_text(path.read_text(encoding="utf-8"), source=str(path)))
    mapping.update(_parse_overrides(extra))
    if args.seed is not None:
        mapping["run.seed"] = str(args.seed)
    if "run.workers" not in mapping:
        mapping["run.workers"] = str(default_workers())
    return config_from_mapping(mapping, args.experiment)


def run(config, out_dir):
    """Executa o experimento e grava o CSV e o manifesto."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info("running %s (seed %d, %d workers)", config.experiment, config.run.seed, config.run.workers)
    frame = EXPERIMENTS[config.experiment](config)

    csv_path = out_dir / f"{config.experiment}.csv"
    frame.to_csv(csv_path, index=False, encoding="utf-8")
    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text(config_to_text(config), encoding="utf-8")
    logger.info("wrote %s and %s", csv_path, manifest_path)
    return 0


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    setup_logging(args.log_level)
    try:
        config = resolve_config(args, extra)
        return run(config, args.out)
    except ConfigError as error:
        print(f"error: {error}", file=sys.stderr)
        return 2
    except FdMimoError as error:
        logger.error("%s", error)
        print(f"error: {error}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
