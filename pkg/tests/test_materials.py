import numpy as np
import pytest

from alefsi.errors import ConfigError, MeshDegenerationError
from alefsi.materials import (
    MaterialParams,
    deformation_state,
    fluid_stress,
    inflow_profile,
    shape_derivatives,
    smoothing_factor,
    stvk_stress,
)

PARAMS = MaterialParams()


class TestDeformationState:
    def test_rest(self):
        kin = deformation_state(np.zeros((2, 2)))
        assert np.allclose(kin.F, np.eye(2))
        assert kin.J == pytest.approx(1.0)
        assert np.allclose(kin.E, 0.0)

    def test_isotropic_stretch(self):
        a = 0.3
        kin = deformation_state(a * np.eye(2))
        assert kin.J == pytest.approx((1 + a) ** 2, abs=1e-14)
        assert np.allclose(kin.E, (a + a * a / 2) * np.eye(2), atol=1e-14)

    def test_inverse_property(self):
        rng = np.random.default_rng(5)
        g = 0.1 * rng.standard_normal((7, 3, 3))
        kin = deformation_state(g)
        assert np.allclose(kin.F @ kin.F_inv, np.eye(3), atol=1e-12)
        assert np.allclose(kin.E, np.swapaxes(kin.E, -1, -2))

    def test_degenerate_raises_with_cell(self):
        g = np.array([[[0.0, 0.0], [0.0, 0.0]], [[-2.0, 0.0], [0.0, 0.0]]])
        with pytest.raises(MeshDegenerationError) as exc:
            deformation_state(g, cell_of_point=np.array([4, 9]))
        assert exc.value.cell == 9
        assert exc.value.det < 0


class TestStvkStress:
    def test_zero(self):
        assert np.allclose(stvk_stress(np.zeros((2, 2)), PARAMS), 0.0)

    def test_uniaxial(self):
        e = 1.0e-3
        sig = stvk_stress(np.diag([e, 0.0]), PARAMS)
        assert np.allclose(sig, np.diag([3.0e6 * e, 2.0e6 * e]), rtol=1e-14)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        E = rng.standard_normal((2, 2))
        E = 0.5 * (E + E.T)
        assert np.allclose(stvk_stress(3.5 * E, PARAMS), 3.5 * stvk_stress(E, PARAMS))


class TestFluidStress:
    def test_pressure_only(self):
        kin = deformation_state(np.zeros((2, 2)))
        sig = fluid_stress(np.zeros((2, 2)), 7.0, kin, PARAMS)
        assert np.allclose(sig, -7.0 * np.eye(2))

    def test_newtonian_limit(self):
        rng = np.random.default_rng(8)
        gv = rng.standard_normal((2, 2))
        kin = deformation_state(np.zeros((2, 2)))
        sig = fluid_stress(gv, 1.3, kin, PARAMS)
        expect = -1.3 * np.eye(2) + PARAMS.rho_f * PARAMS.nu_f * (gv + gv.T)
        assert np.allclose(sig, expect, atol=1e-12)


class TestShapeDerivatives:
    def test_at_identity(self):
        kin = deformation_state(np.zeros((2, 2)))
        G = np.array([[1.0, 2.0], [3.0, 4.0]])
        dF, dJ, dF_inv, dF_invT, dE = shape_derivatives(kin, G)
        assert np.allclose(dF, G)
        assert dJ == pytest.approx(np.trace(G))
        assert np.allclose(dF_inv, -G)
        assert np.allclose(dE, 0.5 * (G + G.T))

    def test_transpose_identity(self):
        rng = np.random.default_rng(4)
        kin = deformation_state(0.1 * rng.standard_normal((2, 2)))
        _, _, dF_inv, dF_invT, _ = shape_derivatives(kin, rng.standard_normal((2, 2)))
        assert np.array_equal(dF_invT, dF_inv.T)

    def test_fd_oracle(self):
        rng = np.random.default_rng(6)
        g = 0.1 * rng.standard_normal((3, 3))
        du = rng.standard_normal((3, 3))
        kin = deformation_state(g)
        dF, dJ, dF_inv, _, dE = shape_derivatives(kin, du)
        h = 1.0e-6
        kp = deformation_state(g + h * du)
        km = deformation_state(g - h * du)
        assert dJ == pytest.approx((kp.J - km.J) / (2 * h), rel=1e-5)
        assert np.allclose(dF_inv, (kp.F_inv - km.F_inv) / (2 * h), rtol=1e-5, atol=1e-8)
        assert np.allclose(dE, (kp.E - km.E) / (2 * h), rtol=1e-5, atol=1e-8)


class TestInflow:
    def test_smoothing(self):
        assert smoothing_factor(0.0) == 0.0
        assert smoothing_factor(2.0) == 1.0
        assert smoothing_factor(10.0) == 1.0
        assert 0.0 < smoothing_factor(1.0) < 1.0

    def test_midline_peak(self):
        v = inflow_profile(5.0, [[0.0, 0.205]], "fsi2")
        assert v[0, 0] == pytest.approx(1.5, rel=1e-12)
        assert v[0, 1] == 0.0

    def test_wall_zero(self):
        assert np.allclose(inflow_profile(5.0, [[0.0, 0.0]], "fsi2"), 0.0)
        assert np.allclose(inflow_profile(0.0, [[0.0, 0.2]], "fsi2"), 0.0)

    def test_box3d_peak(self):
        # center of the inflow face: y = H/2, z = 0
        v = inflow_profile(5.0, [[0.0, 0.2, 0.0]], "box3d")
        assert v[0, 0] == pytest.approx(81.0 / 16.0 * 0.2 * 0.2 * 0.16 / 0.4**4 * 3.0)
        assert np.allclose(inflow_profile(5.0, [[0.0, 0.0, 0.0]], "box3d"), 0.0)
        assert np.allclose(inflow_profile(5.0, [[0.0, 0.2, 0.4]], "box3d"), 0.0)

    def test_unknown_case(self):
        with pytest.raises(ConfigError):
            inflow_profile(1.0, [[0.0, 0.1]], "nope")


class TestParams:
    def test_positive_required(self):
        with pytest.raises(ConfigError):
            MaterialParams(rho_f=-1.0)
