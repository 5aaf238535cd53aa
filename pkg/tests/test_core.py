import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from savanna_pdmp.core import (
    IntensitySpec,
    ModelParams,
    State,
    clamp_state,
    drift,
    figure_params,
    intensity,
    jump,
    jump_inverse,
    validate_params,
)
from savanna_pdmp.errors import (
    DomainConsistencyError,
    IntensityViolatesAssumptions,
    LossFractionOutOfRange,
    NonPositiveRate,
    ParameterError,
)

unit = st.floats(0.0, 1.0)


def test_figure_parameters_validate():
    p = validate_params({"r_w": 0.25, "r_g": 0.5, "M_w": 0.4, "M_g": 0.1})
    assert (p.r_w, p.r_g, p.M_w, p.M_g) == (0.25, 0.5, 0.4, 0.1)
    assert p.lambda_sup == 1.0
    assert p.K_w == p.K_g == 1.0


def test_string_values_from_parameter_file():
    p = validate_params(
        {"r_w": "0.25", "r_g": "0.5", "M_w": "0.4", "M_g": "0.1", "lambda.family": "power", "lambda.c": "2", "lambda.p": "2", "lambda.sup": "2.5"}
    )
    assert p.intensity.c == 2.0 and p.intensity.p == 2.0
    assert p.lambda_sup == 2.5


@pytest.mark.parametrize("M_w", [1.0, 0.0, -0.1, 1.5])
def test_loss_fraction_out_of_range(M_w):
    with pytest.raises(LossFractionOutOfRange):
        validate_params({"r_w": 0.25, "r_g": 0.5, "M_w": M_w, "M_g": 0.1})


@pytest.mark.parametrize("key", ["r_w", "r_g"])
def test_non_positive_rate(key):
    raw = {"r_w": 0.25, "r_g": 0.5, "M_w": 0.4, "M_g": 0.1, key: 0.0}
    with pytest.raises(NonPositiveRate):
        validate_params(raw)


def test_constant_intensity_rejected():
    with pytest.raises(IntensityViolatesAssumptions):
        validate_params({"r_w": 0.25, "r_g": 0.5, "M_w": 0.4, "M_g": 0.1, "lambda.family": "constant"})


def test_custom_intensity_checks():
    ok = IntensitySpec.custom(lambda w, g: g * (1 + w), sup=2.0)
    figure_params(intensity=ok)
    with pytest.raises(IntensityViolatesAssumptions):
        figure_params(intensity=IntensitySpec.custom(lambda w, g: g * (1 + w), sup=1.5))
    with pytest.raises(IntensityViolatesAssumptions):
        # vanishes on part of {g > 0}
        figure_params(intensity=IntensitySpec.custom(lambda w, g: g * w, sup=1.0))


def test_scalar_only_custom_intensity():
    def lam(w, g):
        return float(g) ** 2

    p = figure_params(intensity=IntensitySpec.custom(lam, sup=1.0))
    assert intensity(p, (0.2, 0.5)) == 0.25


def test_missing_and_bad_keys():
    with pytest.raises(ParameterError):
        validate_params({"r_w": 0.25, "r_g": 0.5, "M_w": 0.4})
    with pytest.raises(ParameterError):
        validate_params({"r_w": "abc", "r_g": 0.5, "M_w": 0.4, "M_g": 0.1})
    with pytest.raises(IntensityViolatesAssumptions):
        figure_params(intensity=IntensitySpec.power(c=1.0, p=0.5))


def test_drift_examples(params):
    assert drift(params, (0.5, 0.5)) == (0.0625, 0.0)
    assert drift(params, (1.0, 0.0)) == (0.0, 0.0)
    dw, dg = drift(params, (0.3, 0.45))
    assert dw == pytest.approx(0.0525, abs=1e-15)
    assert dg == pytest.approx(0.05625, abs=1e-15)


def test_drift_zeros_at_corners(params):
    for corner in [(0, 0), (1, 0), (0, 1)]:
        assert drift(params, corner) == (0.0, 0.0)
    assert drift(params, (1, 1)) != (0.0, 0.0)


def test_intensity_examples(params):
    assert intensity(params, (0.7, 0.0)) == 0.0
    assert intensity(params, (0.3, 0.45)) == 0.45
    p = figure_params(intensity=IntensitySpec.power(c=2, p=2))
    assert intensity(p, (0.1, 0.5)) == 0.5


def test_jump_examples(params):
    assert jump(params, (0.5, 0.5)) == pytest.approx((0.3, 0.45), abs=1e-15)
    assert jump(params, (0.0, 0.0)) == (0.0, 0.0)
    assert jump(params, (1.0, 1.0)) == pytest.approx((0.6, 0.9), abs=1e-15)


def test_jump_inverse_examples(params):
    assert jump_inverse(params, (0.3, 0.45)) == pytest.approx((0.5, 0.5), abs=1e-15)
    assert jump_inverse(params, (0.9, 0.5)) is None
    assert jump_inverse(params, (0.0, 0.0)) == (0.0, 0.0)


@given(unit, unit)
def test_jump_range_and_inverse(w, g):
    p = figure_params()
    y = jump(p, (w, g))
    assert 0 <= y.w <= 1 - p.M_w and 0 <= y.g <= 1 - p.M_g
    back = jump_inverse(p, y)
    assert back is not None
    assert abs(back.w - w) <= 1e-14 and abs(back.g - g) <= 1e-14


@given(unit)
def test_no_grass_no_fire(w):
    assert intensity(figure_params(), (w, 0.0)) == 0.0


@given(unit, st.floats(1e-300, 1.0))
def test_positive_intensity_with_grass(w, g):
    assert intensity(figure_params(), (w, g)) > 0


def test_intensity_bounded_on_grid(params):
    axis = np.linspace(0, 1, 101)
    W, G = np.meshgrid(axis, axis)
    assert np.all(params.intensity(W, G) <= params.lambda_sup)


def test_clamp_state():
    assert clamp_state(1.0 + 5e-13, -5e-13) == State(1.0, 0.0)
    with pytest.raises(DomainConsistencyError):
        clamp_state(1.0 + 1e-9, 0.5)


def test_unnormalized_conversion():
    p = figure_params(K_w=200.0, K_g=50.0)
    assert p.to_normalized(100.0, 10.0) == (0.5, 0.2)
    assert p.from_normalized(0.5, 0.2) == (100.0, 10.0)


def test_disabled_fire_is_explicit():
    p = figure_params(intensity=IntensitySpec.none())
    assert not p.fire_enabled
    assert p.lambda_sup == 0.0
    assert math.isfinite(intensity(p, (0.5, 0.5)))
