import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defectbeam.core import (
    BeamCoefficients,
    BoundaryConditionError,
    BoundaryConditions,
    Essential,
    Grid1D,
    InvalidParameterError,
    LoadCase,
    ModelKind,
    Natural,
    ScalarField1D,
    SingularSystemError,
    finite_difference,
    fornberg_weights,
    make_rect_section,
    stencil_width,
    validate_bcs,
)

EB = ModelKind.EULER_BERNOULLI
TIMO = ModelKind.TIMOSHENKO


class TestGrid:
    def test_nodes_and_spacing(self):
        g = Grid1D.from_elements(2.0, 8)
        assert g.n_nodes == 9
        assert g.h == 0.25
        assert g.nodes[0] == 0.0 and g.nodes[-1] == 2.0
        np.testing.assert_allclose(np.diff(g.nodes), 0.25)

    @pytest.mark.parametrize("length,n", [(0.0, 5), (-1.0, 5), (1.0, 2), (float("inf"), 5)])
    def test_invalid(self, length, n):
        with pytest.raises(InvalidParameterError):
            Grid1D(length, n)

    def test_refined_doubles_elements(self):
        g = Grid1D.from_elements(1.0, 4).refined()
        assert g.n_elements == 8


class TestFiniteDifference:
    def test_second_derivative_weights(self):
        np.testing.assert_allclose(fornberg_weights(np.array([-1, 0, 1]), 2), [1, -2, 1], atol=1e-14)

    def test_first_derivative_weights(self):
        np.testing.assert_allclose(fornberg_weights(np.array([-1, 0, 1]), 1), [-0.5, 0, 0.5], atol=1e-14)

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_exact_on_polynomials(self, order):
        # stencils of accuracy 4 reproduce derivatives of degree <= order + 3 exactly
        g = Grid1D.from_elements(1.0, 20)
        x = g.nodes
        deg = order + 3
        coeffs = np.arange(1, deg + 2) / 7.0
        p = np.polynomial.Polynomial(coeffs)
        got = finite_difference(p(x), g.h, order)
        np.testing.assert_allclose(got, p.deriv(order)(x), atol=1e-7 * np.max(np.abs(p.deriv(order)(x))))

    def test_fourth_order_convergence(self):
        errs = []
        for n in (20, 40):
            g = Grid1D.from_elements(1.0, n)
            errs.append(np.max(np.abs(finite_difference(np.sin(3 * g.nodes), g.h, 1) - 3 * np.cos(3 * g.nodes))))
        assert np.log2(errs[0] / errs[1]) > 3.7

    def test_too_few_nodes(self):
        lo, hi = stencil_width(3, 4)
        with pytest.raises(InvalidParameterError):
            finite_difference(np.zeros(hi - lo), 0.1, 3)


class TestScalarField:
    def test_carried_derivatives(self):
        g = Grid1D.from_elements(1.0, 10)
        f = ScalarField1D.from_function(g, lambda x: x**3, (lambda x: 3 * x**2, lambda x: 6 * x))
        np.testing.assert_array_equal(f.derivative(2).values, 6 * g.nodes)

    def test_rejects_nonfinite(self):
        g = Grid1D.from_elements(1.0, 4)
        with pytest.raises(InvalidParameterError):
            ScalarField1D(g, np.array([0, 1, np.nan, 0, 0.0]))

    def test_grid_mismatch(self):
        a = ScalarField1D.zeros(Grid1D.from_elements(1.0, 4))
        b = ScalarField1D.zeros(Grid1D.from_elements(1.0, 5))
        with pytest.raises(InvalidParameterError):
            a + b

    @settings(max_examples=30, deadline=None)
    @given(a=st.floats(-5, 5), k=st.floats(0.5, 4))
    def test_derivative_linearity(self, a, k):
        g = Grid1D.from_elements(1.0, 32)
        f = ScalarField1D.from_function(g, lambda x: np.sin(k * x))
        h = ScalarField1D.from_function(g, lambda x: np.exp(x))
        lhs = (f * a + h).diff(2).values
        rhs = a * f.diff(2).values + h.diff(2).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + abs(a)) * np.max(np.abs(rhs)) + 1e-9)


class TestCoefficients:
    def test_unit_rectangle(self):
        c = make_rect_section(12.0, 0.0, 0.0, 0.0, 1.0)
        assert c.I2 == pytest.approx(1 / 12)
        assert c.b == pytest.approx(1.0) and c.c == 0.0

    def test_fourth_moment(self):
        c = make_rect_section(1.0, 80.0, 0.0, 0.0, 1.0)
        assert c.I4 == pytest.approx(1 / 80) and c.c == pytest.approx(1.0)

    def test_thickness_two(self):
        c = make_rect_section(3.0, 0.0, 0.0, 0.0, 2.0)
        assert c.I2 == pytest.approx(8 / 12) and c.b == pytest.approx(2.0)

    @pytest.mark.parametrize("E,l", [(0.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
    def test_invalid(self, E, l):
        with pytest.raises(InvalidParameterError):
            make_rect_section(E, 1.0, 1.0, 1.0, l)

    def test_thickness_must_be_below_length(self):
        with pytest.raises(InvalidParameterError):
            make_rect_section(1.0, 1.0, 1.0, 1.0, 2.0, L=1.0)

    @settings(max_examples=50, deadline=None)
    @given(E=st.floats(0.1, 100), F=st.floats(0, 100), l=st.floats(0.01, 3))
    def test_scaling_ratio(self, E, F, l):
        c = make_rect_section(E, F, 1.0, 1.0, l)
        assert c.c / c.b == pytest.approx(F / E * 3 / 20 * l**2, rel=1e-12, abs=1e-300)

    def test_negative_rejected(self):
        with pytest.raises(InvalidParameterError):
            BeamCoefficients.from_stiffness(1.0, -1.0)


class TestModelKind:
    @pytest.mark.parametrize("name,kind", [("eb", EB), ("Euler_Bernoulli", EB), ("timo", TIMO), (TIMO, TIMO)])
    def test_parse(self, name, kind):
        assert ModelKind.parse(name) is kind

    def test_unknown(self):
        with pytest.raises(InvalidParameterError):
            ModelKind.parse("plate")


class TestBoundaryConditions:
    def test_build_defaults_to_free(self):
        bcs = BoundaryConditions.build({"w": 1.0, "T1": 2.0})
        assert bcs.left == (Essential(1.0), Natural(2.0), Natural(0.0))
        assert bcs.right == (Natural(), Natural(), Natural())

    def test_exclusive_channel(self):
        with pytest.raises(BoundaryConditionError):
            BoundaryConditions.build({"w": 0.0, "T0": 1.0})

    def test_unknown_channel(self):
        with pytest.raises(BoundaryConditionError):
            BoundaryConditions.build({"q": 0.0})

    def test_all_natural_eb_is_translation(self):
        with pytest.raises(SingularSystemError, match="translation"):
            validate_bcs(EB, BoundaryConditions())

    def test_cantilever_ok(self):
        validate_bcs(EB, BoundaryConditions.cantilever())

    def test_rotation_left_free(self):
        with pytest.raises(SingularSystemError, match="rotation"):
            validate_bcs(EB, BoundaryConditions.build({"w": 0.0}))

    def test_timoshenko_clamp_ok(self):
        validate_bcs(TIMO, BoundaryConditions.build({"u": 0.0, "p": 0.0}))

    def test_simply_supported_ok(self):
        validate_bcs(EB, BoundaryConditions.build({"w": 0.0}, {"w": 0.0}))


class TestLoadCase:
    def test_constant_and_callable(self):
        loads = LoadCase(2.0, lambda x: x)
        np.testing.assert_array_equal(loads.evaluate("f0", [0.0, 1.0]), [2.0, 2.0])
        np.testing.assert_array_equal(loads.evaluate("f1", [0.5]), [0.5])
        np.testing.assert_array_equal(loads.evaluate("f2", [0.5]), [0.0])

    def test_eb_rejects_extra_loads(self):
        with pytest.raises(InvalidParameterError):
            LoadCase(1.0, 0.0).check(EB)

    def test_sampled_field_interpolates(self):
        g = Grid1D.from_elements(1.0, 16)
        loads = LoadCase(ScalarField1D.from_function(g, lambda x: x**2))
        assert loads.evaluate("f0", [0.3])[0] == pytest.approx(0.09, abs=1e-12)
