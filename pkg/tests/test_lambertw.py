import numpy as np
import pytest

from vdm.lambertw import INV_E, lambert_w, lambert_w_exp


class TestLambertW:
    def test_known_values(self):
        # reference values from scipy.special.lambertw
        np.testing.assert_allclose(lambert_w(1.0), 0.5671432904097838, rtol=1e-15)
        np.testing.assert_allclose(lambert_w(10.0), 1.7455280027406994, rtol=1e-15)
        np.testing.assert_allclose(lambert_w(-0.3), -0.4894022271802149, rtol=1e-14)
        assert lambert_w(np.e) == pytest.approx(1.0, abs=1e-15)
        assert lambert_w(0.0) == 0.0

    def test_branch_point(self):
        assert lambert_w(-INV_E) == pytest.approx(-1.0, abs=1e-7)
        assert lambert_w(-0.36787) > -1.0

    def test_small_arguments_keep_relative_accuracy(self):
        np.testing.assert_allclose(lambert_w(1e-8), 9.999999900000002e-09, rtol=1e-14)

    def test_inverse_identity(self):
        x = np.concatenate([np.linspace(-0.36, 0.0, 50), np.logspace(-6, 300, 200)])
        w = lambert_w(x)
        np.testing.assert_allclose(w * np.exp(w), x, rtol=1e-12, atol=1e-300)

    def test_domain(self):
        with pytest.raises(ValueError):
            lambert_w(-0.5)
        with pytest.raises(ValueError):
            lambert_w(np.array([0.0, -1.0]))

    def test_array_shape(self):
        assert lambert_w(np.ones((3, 2))).shape == (3, 2)
        assert isinstance(lambert_w(2.0), float)


class TestLambertWExp:
    def test_large_exponent(self):
        # W(e^1000) from mpmath at 40 digits
        np.testing.assert_allclose(lambert_w_exp(1000.0), 993.0991694723891, rtol=1e-15)

    def test_very_negative_exponent(self):
        np.testing.assert_allclose(lambert_w_exp(-50.0), 1.928749847963918e-22, rtol=1e-14)

    def test_matches_direct_form(self):
        y = np.linspace(-30.0, 600.0, 400)
        np.testing.assert_allclose(lambert_w_exp(y), lambert_w(np.exp(y)), rtol=1e-14)

    def test_defining_equation(self):
        y = np.linspace(-5.0, 5000.0, 300)
        w = lambert_w_exp(y)
        np.testing.assert_allclose(w + np.log(w), y, rtol=1e-14, atol=1e-13)
