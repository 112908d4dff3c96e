"""Link budget: free-space path loss, SNR, Shannon rate, and transfer delays.

The channel model is deterministic: fixed transmit power, average antenna
gains, and thermal noise N0 = k_B * T * B. Rates are zero without LOS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import CONSTANTS
from .orbital import OrbitPlane


class LinkError(ValueError):
    """Raised for invalid link-budget inputs or impossible link configurations."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(linear: float) -> float:
    return 10.0 * math.log10(linear)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class LinkParams:
    tx_power_w: float
    gain_tx_dbi: float
    gain_rx_dbi: float
    bandwidth_hz: float
    carrier_hz: float
    noise_temp_k: float

    def __post_init__(self):
        for name in ("tx_power_w", "bandwidth_hz", "carrier_hz", "noise_temp_k"):
            if getattr(self, name) <= 0:
                raise LinkError(f"{name} must be strictly positive")

    @property
    def noise_power_w(self) -> float:
        return CONSTANTS.boltzmann * self.noise_temp_k * self.bandwidth_hz

    @property
    def gain_product_linear(self) -> float:
        return db_to_linear(self.gain_tx_dbi) * db_to_linear(self.gain_rx_dbi)


@dataclass(frozen=True)
class LinkBudget:
    distance_m: float
    path_loss_linear: float
    snr_linear: float
    rate_bps: float


def path_loss(distance_m: float, carrier_hz: float) -> float:
    """Free-space path loss (4*pi*f*d/c)^2 as a linear power ratio."""
    if distance_m <= 0:
        raise LinkError(f"distance must be positive, got {distance_m}")
    x = 4.0 * math.pi * carrier_hz * distance_m / CONSTANTS.light_speed
    return x * x


def snr(params: LinkParams, distance_m: float, los: bool) -> float:
    """Received SNR as a linear ratio; zero without line of sight."""
    if distance_m <= 0:
        raise LinkError(f"distance must be positive, got {distance_m}")
    if not los:
        return 0.0
    loss = path_loss(distance_m, params.carrier_hz)
    return params.tx_power_w * params.gain_product_linear / (params.noise_power_w * loss)


def data_rate(params: LinkParams, distance_m: float, los: bool) -> float:
    """Shannon rate B*log2(1+SNR) in bits/s; zero without LOS."""
    return params.bandwidth_hz * math.log2(1.0 + snr(params, distance_m, los))


def link_budget(params: LinkParams, distance_m: float, los: bool = True) -> LinkBudget:
    s = snr(params, distance_m, los)
    return LinkBudget(
        distance_m=distance_m,
        path_loss_linear=path_loss(distance_m, params.carrier_hz),
        snr_linear=s,
        rate_bps=params.bandwidth_hz * math.log2(1.0 + s),
    )


def ring_neighbor_distance(plane: OrbitPlane) -> float:
    """Chord length between adjacent satellites of an equidistant ring."""
    return 2.0 * plane.radius_m * math.sin(math.pi / plane.num_sats)


def ring_neighbors_visible(plane: OrbitPlane) -> bool:
    """Adjacent-neighbor chords clear the Earth iff their perigee exceeds r_E."""
    return plane.radius_m * math.cos(math.pi / plane.num_sats) > CONSTANTS.earth_radius_m


def fixed_link_rate(params: LinkParams, plane: OrbitPlane) -> float:
    """Fixed ISL rate: the rate at the worst (here: constant) neighbor distance."""
    if not ring_neighbors_visible(plane):
        raise LinkError(
            f"ring of {plane.num_sats} satellites at {plane.altitude_m/1e3:.0f} km: "
            "neighbor chord intersects the Earth, no ring can form"
        )
    return data_rate(params, ring_neighbor_distance(plane), los=True)


def tx_duration(bits: float, rate_bps: float) -> float:
    """Serialization delay of a message; propagation delay is the caller's job."""
    if bits < 0:
        raise LinkError("bit count must be non-negative")
    if rate_bps <= 0:
        raise LinkError("cannot transmit over a zero-rate link")
    return bits / rate_bps


def propagation_delay(distance_m: float) -> float:
    return distance_m / CONSTANTS.light_speed
