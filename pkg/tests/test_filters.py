import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from felab.filters import (
    DomainError,
    RadialFilterSpec,
    builtin_filter,
    scaled_profile,
    validate_filter,
)


@pytest.mark.parametrize("name", ["gaussian", "algebraic_blob", "euler_alpha"])
def test_unit_mass_by_independent_quadrature(name):
    spec = builtin_filter(name)
    val, _ = integrate.quad(lambda s: 2 * math.pi * s * spec.profile(np.array(s)), 0, np.inf, limit=400)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_blob_w3_sup_matches_calculus_maximum():
    # r^3 / (pi (1 + r^2)^2) peaks at r = sqrt(3) with value 3 sqrt(3) / (16 pi)
    spec = builtin_filter("algebraic_blob")
    r = np.geomspace(1e-3, 1e3, 200001)
    dense = np.max(r**3 * spec.profile(r))
    assert dense == pytest.approx(3 * math.sqrt(3) / (16 * math.pi), rel=1e-9)


def test_euler_alpha_half_power_weight_bounded_near_origin():
    spec = builtin_filter("euler_alpha")
    r = np.geomspace(1e-12, 1e-2, 50)
    w = np.sqrt(r) * spec.profile(r)
    assert np.all(np.isfinite(w))
    assert np.all(np.diff(w) > 0)  # r^(1/2) log(1/r) decreases to 0 as r -> 0
    assert w[0] < 1e-4


@pytest.mark.parametrize("name", ["gaussian", "algebraic_blob", "euler_alpha"])
def test_builtins_pass_validation(name):
    rep = validate_filter(builtin_filter(name))
    assert rep.passed, rep.to_json()


def test_r_cubed_tail_fails_first_moment():
    # unit mass, but r^2 h ~ 1/r at infinity so the w_1 h integral diverges logarithmically
    prof = lambda r: (1 + np.asarray(r, float) ** 2) ** -1.5 / (2 * math.pi)  # noqa: E731
    spec = RadialFilterSpec("r3_tail", prof)
    rep = validate_filter(spec)
    assert rep.conditions["unit_mass"].status == "pass"
    assert rep.conditions["w1_h_L1"].status == "fail"
    assert not rep.passed


def test_zero_profile_fails_unit_mass():
    spec = RadialFilterSpec("zero", lambda r: np.zeros_like(np.asarray(r, float)))
    rep = validate_filter(spec)
    assert rep.conditions["unit_mass"].status == "fail"


def test_report_json_roundtrip_fields():
    rep = validate_filter(builtin_filter("gaussian"))
    d = rep.to_dict()
    assert set(d["conditions"]) >= {"unit_mass", "w1_h_L1", "grad_h_L1", "w3_h_Linf"}
    assert '"unit_mass"' in rep.to_json()


@pytest.mark.parametrize(
    "name,eps,r,expected",
    [
        ("gaussian", 1.0, 0.0, 1 / math.pi),
        ("gaussian", 0.5, 0.0, 4 / math.pi),
        ("algebraic_blob", 2.0, 2.0, 1 / (16 * math.pi)),
    ],
)
def test_scaled_profile_values(name, eps, r, expected):
    assert scaled_profile(builtin_filter(name), eps, r) == pytest.approx(expected, rel=1e-14)


def test_scaled_profile_domain():
    with pytest.raises(ValueError):
        scaled_profile(builtin_filter("gaussian"), 0.0, 1.0)
    with pytest.raises(ValueError):
        scaled_profile(builtin_filter("gaussian"), 1.0, -1.0)
    with pytest.raises(DomainError):
        scaled_profile(builtin_filter("euler_alpha"), 0.1, 0.0)


def test_builtin_parameter_checks():
    with pytest.raises(ValueError):
        builtin_filter("nope")
    with pytest.raises(ValueError):
        builtin_filter("gaussian", {"width": 2.0})
    with pytest.raises(ValueError):
        builtin_filter("euler_alpha", {"alpha": 0.0})
    with pytest.raises(ValueError):
        builtin_filter("gaussian", {"alpha": 1.0})


@given(eps=st.floats(0.01, 10.0), r=st.floats(0.0, 50.0))
def test_scaled_profile_is_a_dilation(eps, r):
    spec = builtin_filter("algebraic_blob")
    assert scaled_profile(spec, eps, r) == pytest.approx(spec.profile(np.array(r / eps)) / eps**2, rel=1e-12)


@given(eps=st.floats(0.05, 5.0))
def test_scaled_mass_is_one(eps):
    spec = builtin_filter("gaussian")
    val, _ = integrate.quad(lambda s: 2 * math.pi * s * scaled_profile(spec, eps, s), 0, 40 * eps, limit=200)
    assert val == pytest.approx(1.0, abs=1e-10)
