"""Physical-layer link model: antenna gains, noise floor, channel gain and rate.

All links are AWGN unicast channels. The channel coefficient ``h_squared`` is
the end-to-end power gain divided by the receiver noise power, so that the
received SNR for a transmit power ``p`` (W) is simply ``p * h_squared``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

SPEED_OF_LIGHT = 299_792_458.0  # m/s
BOLTZMANN = 1.380649e-23  # J/K
REFERENCE_TEMP_K = 290.0


@dataclass(frozen=True)
class RfParams:
    """RF configuration of one link class (ISL or downlink)."""

    carrier_hz: float
    bandwidth_hz: float
    tx_diameter_m: float
    rx_diameter_m: float
    tx_efficiency: float
    rx_efficiency: float
    tx_pointing_loss_db: float
    rx_pointing_loss_db: float
    antenna_noise_temp_k: float
    noise_figure_db: float
    max_tx_power_w: float
    extra_loss_db: float = 0.0

    def __post_init__(self) -> None:
        positive = ("carrier_hz", "bandwidth_hz", "tx_diameter_m", "rx_diameter_m",
                    "antenna_noise_temp_k", "max_tx_power_w")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("tx_efficiency", "rx_efficiency"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {value!r}")
        for name in ("tx_pointing_loss_db", "rx_pointing_loss_db", "noise_figure_db", "extra_loss_db"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def tx_gain_db(self) -> float:
        return antenna_gain_db(self.tx_diameter_m, self.carrier_hz, self.tx_efficiency)

    @property
    def rx_gain_db(self) -> float:
        return antenna_gain_db(self.rx_diameter_m, self.carrier_hz, self.rx_efficiency)

    @property
    def noise_power_dbw(self) -> float:
        return noise_power_dbw(self.antenna_noise_temp_k, self.noise_figure_db, self.bandwidth_hz)


@dataclass(frozen=True)
class LinkCoefficient:
    """Normalized channel gain and propagation delay of one hop."""

    h_squared: float  # 1/W
    prop_delay_s: float
    distance_km: float
    bandwidth_hz: float


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def antenna_gain_db(diameter_m: float, freq_hz: float, efficiency: float) -> float:
    """Boresight gain of a parabolic aperture, ``eta * (pi D f / c)^2`` in dB."""
    return 10.0 * math.log10(efficiency * (math.pi * diameter_m * freq_hz / SPEED_OF_LIGHT) ** 2)


def system_noise_temp_k(antenna_noise_temp_k: float, noise_figure_db: float) -> float:
    return antenna_noise_temp_k + REFERENCE_TEMP_K * (db_to_linear(noise_figure_db) - 1.0)


def noise_power_dbw(antenna_noise_temp_k: float, noise_figure_db: float, bandwidth_hz: float) -> float:
    """Receiver noise power ``k T_sys B`` in dBW.

    The system temperature adds the receiver's noise figure, referred to
    290 K, on top of the antenna temperature.
    """
    t_sys = system_noise_temp_k(antenna_noise_temp_k, noise_figure_db)
    return 10.0 * math.log10(BOLTZMANN * t_sys * bandwidth_hz)


def free_space_path_loss_db(distance_km: float, freq_hz: float) -> float:
    return 20.0 * math.log10(4.0 * math.pi * distance_km * 1e3 * freq_hz / SPEED_OF_LIGHT)


def propagation_delay_s(distance_km: float) -> float:
    return distance_km * 1e3 / SPEED_OF_LIGHT


def channel_coefficient(distance_km: float, rf: RfParams) -> LinkCoefficient:
    """Channel gain normalized by receive noise power for a hop of ``distance_km``.

    Computed in linear units:
    ``G_tx G_rx L_tx L_rx L_extra / (FSPL(d, f) * N)``.
    """
    if distance_km <= 0:
        raise ValueError("distance must be positive")
    g_tx = rf.tx_efficiency * (math.pi * rf.tx_diameter_m * rf.carrier_hz / SPEED_OF_LIGHT) ** 2
    g_rx = rf.rx_efficiency * (math.pi * rf.rx_diameter_m * rf.carrier_hz / SPEED_OF_LIGHT) ** 2
    losses = db_to_linear(-(rf.tx_pointing_loss_db + rf.rx_pointing_loss_db + rf.extra_loss_db))
    fspl = (4.0 * math.pi * distance_km * 1e3 * rf.carrier_hz / SPEED_OF_LIGHT) ** 2
    noise_w = BOLTZMANN * system_noise_temp_k(rf.antenna_noise_temp_k, rf.noise_figure_db) * rf.bandwidth_hz
    h_squared = g_tx * g_rx * losses / (fspl * noise_w)
    return LinkCoefficient(h_squared=h_squared, prop_delay_s=propagation_delay_s(distance_km),
                           distance_km=distance_km, bandwidth_hz=rf.bandwidth_hz)


def data_rate(power_w: float, h_squared: float, bandwidth_hz: float) -> float:
    """Shannon rate ``B log2(1 + p h^2)`` in bit/s."""
    if power_w < 0:
        raise ValueError("power must be non-negative")
    return bandwidth_hz * math.log1p(power_w * h_squared) / math.log(2.0)
