import math
from typing import Iterable

import numpy as np
from numpy.typing import NDArray

from mmwave_map_localization.common import SPEED_OF_LIGHT
from mmwave_map_localization.config_def import InteractionKind, TraceConfig

GAMMA_SLOPE = 0.56
""" Slope of the linear reflection coefficient model (1/rad) """

GAMMA_INTERCEPT = 0.096
""" Reflection coefficient magnitude at normal incidence """


def reflection_coefficient(theta_i: float) -> float:
    """ Magnitude of the reflection coefficient for an incidence angle

    |Gamma| = clamp(0.56 * theta_i + 0.096, 0, 1), with theta_i in radians measured
    from the surface normal.

    Args:
        theta_i (float): angle of incidence in [0, pi/2] (rad)

    Returns:
        float: |Gamma|; the reflected power multiplier is |Gamma|^2

    Raises:
        ValueError: angle outside [0, pi/2]
    """
    if not (0.0 <= theta_i <= math.pi / 2.0):
        raise ValueError(f'incidence angle must lie in [0, pi/2] rad, got {theta_i}')
    return min(1.0, max(0.0, GAMMA_SLOPE * theta_i + GAMMA_INTERCEPT))


def fspl_db(distance: float | NDArray[np.float64], frequency_hz: float) -> float | NDArray[np.float64]:
    """ Free space path loss 20 log10(4 pi d f / c) (dB), elementwise for arrays """
    return 20.0 * np.log10(4.0 * np.pi * distance * frequency_hz / SPEED_OF_LIGHT)


def path_power_dbm(cfg: TraceConfig, path_length: float,
                   interactions: Iterable[tuple[InteractionKind, float]]) -> float:
    """ Received power of a path

    Args:
        cfg (TraceConfig): carrier frequency and transmit power
        path_length (float): total propagated length (m), > 0
        interactions (Iterable[tuple[InteractionKind, float]]): (kind, value) per interaction;
            value is the incidence angle (rad) for a reflection and the surface's
            transmission loss (dB) for a transmission

    Returns:
        float: received power (dBm)
    """
    if path_length <= 0.0:
        raise ValueError(f'path length must be positive, got {path_length}')

    power = cfg.tx_power_dbm - fspl_db(path_length, cfg.frequency_hz)
    for kind, value in interactions:
        if kind is InteractionKind.REFLECTION:
            power += 20.0 * math.log10(reflection_coefficient(value))
        else:
            power -= value

    return power
