import pytest

from qperc.calibration import calibrate_t1, edge_distance, enclosed_radius
from qperc.ensemble import PRESET_SIZES
from qperc.hamiltonian import DEFAULT_T1, CouplingModel
from qperc.lattice import LatticeSpec


@pytest.mark.parametrize("size", sorted(PRESET_SIZES))
def test_calibration_reproduces_default(size):
    z_max = PRESET_SIZES[size][0]
    assert calibrate_t1(LatticeSpec(size, size), z_max) == DEFAULT_T1


def test_enclosed_radius_grows_with_coupling():
    spec = LatticeSpec(40, 40)
    r = [enclosed_radius(spec, CouplingModel.from_ratio(t1), 20.0) for t1 in (0.1, 0.2, 0.3)]
    assert r[0] < r[1] < r[2] <= edge_distance(spec)
