import math

import pytest

from mmwave_map_localization.config_def import InteractionKind, TraceConfig
from mmwave_map_localization.raytracer import fspl_db, path_power_dbm, reflection_coefficient


@pytest.mark.parametrize('theta, gamma', [(0.0, 0.096), (1.0, 0.656), (math.pi / 2, 0.9756)])
def test_reflection_coefficient(theta, gamma):
    assert reflection_coefficient(theta) == pytest.approx(gamma, abs=5e-5)


@pytest.mark.parametrize('theta', [-0.1, math.pi / 2 + 0.01])
def test_reflection_coefficient_domain(theta):
    with pytest.raises(ValueError):
        reflection_coefficient(theta)


def test_fspl_one_metre():
    assert fspl_db(1.0, 73e9) == pytest.approx(69.71, abs=0.01)


def test_fspl_grows_6db_per_doubling():
    assert fspl_db(2.0, 73e9) - fspl_db(1.0, 73e9) == pytest.approx(20 * math.log10(2))


def test_path_power():
    cfg = TraceConfig()

    assert path_power_dbm(cfg, 1.0, []) == pytest.approx(-69.71, abs=0.01)
    assert path_power_dbm(cfg, 1.0, [(InteractionKind.TRANSMISSION, 7.2)]) == pytest.approx(-76.91, abs=0.01)
    assert path_power_dbm(cfg, 1.0, [(InteractionKind.REFLECTION, 0.0)]) == pytest.approx(-90.06, abs=0.02)


def test_path_power_tx_power_offset():
    assert path_power_dbm(TraceConfig(tx_power_dbm=10.0), 1.0, []) == pytest.approx(-59.71, abs=0.01)


def test_path_power_rejects_zero_length():
    with pytest.raises(ValueError):
        path_power_dbm(TraceConfig(), 0.0, [])
