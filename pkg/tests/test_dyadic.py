import math

import pytest
from hypothesis import given, strategies as st

from slitcarpet.dyadic import Dyadic, as_dyadic


dyadics = st.builds(Dyadic, st.integers(-(2**20), 2**20), st.integers(0, 24))


def test_reduction_canonical():
    assert Dyadic(4, 2) == Dyadic(1, 0)
    assert Dyadic(4, 2).num == 1 and Dyadic(4, 2).exp == 0
    assert Dyadic(0, 7).exp == 0
    assert Dyadic(6, 3).num == 3 and Dyadic(6, 3).exp == 2


def test_negative_exponent_means_scaling():
    assert Dyadic(3, -2) == 12


@given(dyadics, dyadics)
def test_add_sub_roundtrip(a, b):
    assert (a + b) - b == a


@given(dyadics, dyadics)
def test_mul_matches_float(a, b):
    assert math.isclose(float(a * b), float(a) * float(b), rel_tol=1e-12, abs_tol=1e-12)


@given(dyadics)
def test_float_roundtrip_exact(a):
    assert Dyadic.from_float(float(a)) == a


@given(dyadics, dyadics)
def test_order_consistent_with_float(a, b):
    if float(a) != float(b):
        assert (a < b) == (float(a) < float(b))


def test_scale_pow2():
    assert Dyadic(3, 4).scale_pow2(2) == Dyadic(3, 2)
    assert Dyadic(3, 0).scale_pow2(-3) == Dyadic(3, 3)


def test_parse_forms():
    assert Dyadic.parse("3/2^3") == Dyadic(3, 3)
    assert Dyadic.parse("-5/2^1") == Dyadic(-5, 1)
    assert Dyadic.parse("2") == 2
    assert Dyadic.parse("0.375") == Dyadic(3, 3)
    assert Dyadic.parse("-0.5") == Dyadic(-1, 1)
    with pytest.raises(ValueError):
        Dyadic.parse("0.3")
    with pytest.raises(ValueError):
        Dyadic.parse("x")


def test_numerator_at():
    assert Dyadic(3, 2).numerator_at(5) == 24
    with pytest.raises(ValueError):
        Dyadic(1, 5).numerator_at(3)


def test_as_dyadic_lossless_float():
    d = as_dyadic(1 / 3)
    assert float(d) == 1 / 3  # floats are dyadic; conversion is exact
    assert d.exp > 24
