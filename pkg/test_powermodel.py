import numpy as np
import pytest

from powermodel import (
    SWEEP_COLUMNS,
    AdcScenario,
    DevicePowerTable,
    adc_power,
    energy_efficiency,
    power_sweep,
    rx_power,
)
from utils import FdMimoError


def test_adc_power_values():
    assert adc_power(494e-15, 20e6, 4) == pytest.approx(494e-15 * 20e6 * 16)
    assert adc_power(5e-15, 20e6, 1) == pytest.approx(2e-7)
    # cada bit a mais dobra o consumo
    assert adc_power(65e-15, 20e6, 9) == pytest.approx(2 * adc_power(65e-15, 20e6, 8))


@pytest.mark.parametrize("bits, bandwidth", [(0, 20e6), (4, 0.0)])
def test_adc_power_rejects_bad_input(bits, bandwidth):
    with pytest.raises(FdMimoError):
        adc_power(5e-15, bandwidth, bits)


def test_reference_receiver_power():
    assert rx_power(100, 4) == pytest.approx(7.536, rel=1e-3)
    assert rx_power(1, 4) < rx_power(2, 4)


def test_scenarios_are_ordered():
    table = DevicePowerTable()
    powers = [rx_power(64, 10, table.for_scenario(s)) for s in ("LPADC", "IPADC", "HPADC")]
    assert powers[0] < powers[1] < powers[2]
    assert AdcScenario("IPADC").c == 65e-15
    assert DevicePowerTable(scenario="LPADC").c == 5e-15
    assert DevicePowerTable(c=1e-12).c == 1e-12


def test_device_table_validation():
    with pytest.raises(FdMimoError):
        DevicePowerTable(lna=-1.0)
    with pytest.raises(FdMimoError):
        DevicePowerTable(per_antenna=("lna", "antenna_tuner"))


def test_unknown_adc_scenario_is_a_domain_error():
    with pytest.raises(FdMimoError, match="XPADC"):
        DevicePowerTable(scenario="XPADC")
    with pytest.raises(FdMimoError, match="LPADC, IPADC, HPADC"):
        DevicePowerTable().for_scenario("lpadc")
    assert AdcScenario.parse("LPADC") is AdcScenario.LPADC


def test_energy_efficiency():
    assert energy_efficiency(10.0, 2.0) == 5.0
    with pytest.raises(FdMimoError):
        energy_efficiency(10.0, 0.0)


def test_power_sweep_has_interior_peak(caplog):
    def rate(b, n):
        # taxa saturando em b, como a SE com quantização
        return 20e6 * n * np.log2(1.0 + 10.0 * (1.0 - 2.0 ** (-2 * b)))

    with caplog.at_level("INFO", logger="powermodel"):
        frame = power_sweep(["HPADC"], range(1, 13), [64, 128], 20e6, rate)
    assert list(frame.columns) == SWEEP_COLUMNS
    assert len(frame) == 24
    for _, group in frame.groupby("N_a"):
        best = group.loc[group["ee_bits_per_J"].idxmax(), "b"]
        assert 1 < best < 12
    assert "EE peak" in caplog.text
