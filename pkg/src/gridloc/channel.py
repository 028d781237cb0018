"""Log-distance radio channel: RSS from distance, inverse ranging, shadowing, quantization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

DEFAULT_A_DBM = -45.0
DEFAULT_RSSI_OFFSET_DBM = -45.0

# Inverse-ranging clamp. Noisy RSS above the 1 m reference power would map to
# sub-reference distances; RSS far below it would map to absurd ranges.
D_MIN_M = 0.1
D_MAX_FACTOR = 4.0


@dataclass(frozen=True)
class ChannelParams:
    """Propagation constants.

    a_dbm is the power received 1 m from the transmitter, n_exp the
    path-loss exponent, sigma_dbm the shadowing standard deviation.
    Packets sent from beyond reception_radius_m are never received.
    """

    a_dbm: float = DEFAULT_A_DBM
    n_exp: float = 2.0
    sigma_dbm: float = 0.0
    rssi_offset_dbm: float = DEFAULT_RSSI_OFFSET_DBM
    reception_radius_m: float = 30.0

    def __post_init__(self) -> None:
        if self.n_exp <= 0:
            raise ValueError("n_exp must be positive")
        if self.sigma_dbm < 0:
            raise ValueError("sigma_dbm must be >= 0")
        if self.reception_radius_m <= 0:
            raise ValueError("reception_radius_m must be positive")

    @property
    def d_max_m(self) -> float:
        """Upper clamp for inverse ranging."""
        return D_MAX_FACTOR * self.reception_radius_m


class RssMeasurement(NamedTuple):
    rss_dbm: float
    register_dbm: int


class RangeEstimate(NamedTuple):
    distance_m: float
    clamped: bool


def distance_to_rss(d: float, params: ChannelParams) -> float:
    """Deterministic received power in dBm at distance d, strictly decreasing in d."""
    if d <= 0:
        raise ValueError("distance must be positive")
    return params.a_dbm - 10.0 * params.n_exp * math.log10(d)


def rss_to_distance(rss: float, a_dbm: float, n_exp: float,
                    d_min: float = D_MIN_M,
                    d_max: float = D_MAX_FACTOR * 30.0) -> RangeEstimate:
    """Invert the log-distance model; result clamped to [d_min, d_max].

    The clamped flag records whether the raw inverse fell outside the window.
    """
    if n_exp <= 0:
        raise ValueError("n_exp must be positive")
    d = 10.0 ** ((a_dbm - rss) / (10.0 * n_exp))
    if d < d_min:
        return RangeEstimate(d_min, True)
    if d > d_max:
        return RangeEstimate(d_max, True)
    return RangeEstimate(d, False)


def round_half_away(value: float) -> int:
    """Round to the nearest integer with halves away from zero."""
    if value >= 0:
        return int(math.floor(value + 0.5))
    return int(math.ceil(value - 0.5))


def sample_rss(d: float, params: ChannelParams,
               rng: np.random.Generator) -> Optional[RssMeasurement]:
    """One shadowed RSS draw at distance d, or None beyond the reception radius.

    The Gaussian term is drawn even when sigma_dbm is zero so a scenario
    consumes the same stream positions regardless of noise level.
    """
    if d <= 0:
        raise ValueError("distance must be positive")
    if d > params.reception_radius_m:
        return None
    rss = distance_to_rss(d, params) + rng.normal(0.0, params.sigma_dbm)
    return RssMeasurement(rss, round_half_away(rss))


def register_to_rss(register_val: float, params: ChannelParams) -> float:
    """Raw register reading to dBm: value plus the radio's fixed offset."""
    return register_val + params.rssi_offset_dbm
