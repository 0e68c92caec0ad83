"""
Consumo de potência do receptor
-------------------------------
Potência de ADC (c·B·2^b), composição da cadeia de recepção digital por
antena e eficiência energética.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import pandas as pd

from utils import FdMimoError

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["scenario", "b", "N_a", "power_W", "ee_bits_per_J"]


class AdcScenario(str, Enum):
    LPADC = "LPADC"
    IPADC = "IPADC"
    HPADC = "HPADC"

    @property
    def c(self):
        """Energia por passo de conversão por Hz (J)."""
        return _ADC_C[self]

    @classmethod
    def parse(cls, value):
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(item.value for item in cls)
            raise FdMimoError(f"unknown ADC scenario {value!r}, expected one of {names}") from None


_ADC_C = {
    AdcScenario.LPADC: 5e-15,
    AdcScenario.IPADC: 65e-15,
    AdcScenario.HPADC: 494e-15,
}

# Dispositivos replicados por antena; "adc" conta uma vez por via (I e Q)
DEFAULT_PER_ANTENNA = ("lna", "mixer", "lpf", "bb_amp", "adc", "adc")
DEFAULT_SHARED = ("lo", "combiner")


@dataclass(frozen=True)
class DevicePowerTable:
    lna: float = 39e-3
    splitter: float = 19.5e-3
    combiner: float = 19.5e-3
    phase_shifter: float = 2e-3
    mixer: float = 16.8e-3
    lo: float = 5e-3
    lpf: float = 14e-3
    bb_amp: float = 5e-3
    scenario: AdcScenario = AdcScenario.HPADC
    c: Optional[float] = None
    per_antenna: tuple = field(default=DEFAULT_PER_ANTENNA)
    shared: tuple = field(default=DEFAULT_SHARED)

    def __post_init__(self):
        object.__setattr__(self, "scenario", AdcScenario.parse(self.scenario))
        if self.c is None:
            object.__setattr__(self, "c", self.scenario.c)
        for name in ("lna", "splitter", "combiner", "phase_shifter", "mixer", "lo", "lpf", "bb_amp", "c"):
            if getattr(self, name) < 0:
                raise FdMimoError(f"{name} power must be >= 0, got {getattr(self, name)}")
        for device in self.per_antenna + self.shared:
            if device != "adc" and device not in self.device_names():
                raise FdMimoError(f"unknown device {device!r}")

    @staticmethod
    def device_names():
        return ("lna", "splitter", "combiner", "phase_shifter", "mixer", "lo", "lpf", "bb_amp")

    def for_scenario(self, scenario):
        scenario = AdcScenario.parse(scenario)
        return replace(self, scenario=scenario, c=scenario.c)


def adc_power(c, bandwidth_hz, bits):
    """ρ_ADC = c·B·2^b."""
    if bits < 1:
        raise FdMimoError(f"bits must be >= 1, got {bits}")
    if bandwidth_hz <= 0:
        raise FdMimoError(f"bandwidth must be > 0, got {bandwidth_hz}")
    return c * bandwidth_hz * 2.0 ** bits


def _device_power(table, device, bandwidth_hz, bits):
    if device == "adc":
        return adc_power(table.c, bandwidth_hz, bits)
    return getattr(table, device)


def rx_power(n_antennas, bits, table=None, bandwidth_hz=20e6):
    """Potência total da recepção totalmente digital com N_a cadeias."""
    if n_antennas < 1:
        raise FdMimoError(f"n_antennas must be >= 1, got {n_antennas}")
    table = DevicePowerTable() if table is None else table
    chain = sum(_device_power(table, d, bandwidth_hz, bits) for d in table.per_antenna)
    shared = sum(_device_power(table, d, bandwidth_hz, bits) for d in table.shared)
    return n_antennas * chain + shared


def energy_efficiency(sum_rate_bps, total_power_w):
    if total_power_w <= 0:
        raise FdMimoError(f"total power must be > 0, got {total_power_w}")
    return sum_rate_bps / total_power_w


def power_sweep(scenarios, bits, antennas, bandwidth_hz, rate_fn, table=None):
    """Varre cenário de ADC × b × N_a.

    `rate_fn(b, n_antennas)` devolve a taxa agregada em bit/s.
    """
    table = DevicePowerTable() if table is None else table
    rows = []
    for scenario in scenarios:
        current = table.for_scenario(scenario)
        for b in bits:
            for n in antennas:
                power = rx_power(n, b, current, bandwidth_hz)
                rate = rate_fn(b, n)
                rows.append([current.scenario.value, int(b), int(n), power, energy_efficiency(rate, power)])
    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    for (scenario, n), group in frame.groupby(["scenario", "N_a"], sort=False):
        best = group.loc[group["ee_bits_per_J"].idxmax()]
        logger.info("EE peak %s N_a=%d: b=%d (%.3g bit/J)", scenario, n, best["b"], best["ee_bits_per_J"])
    return frame
