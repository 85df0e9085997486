import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from semifix import extreal
from semifix.extreal import INF, ExtRealError

nonneg = st.floats(min_value=0, allow_nan=False, allow_infinity=True)


def test_ext_accepts_range_and_strings():
    assert extreal.ext(0) == 0.0
    assert extreal.ext("inf") == INF
    assert extreal.ext(" Infinity ") == INF
    assert extreal.ext("2.5") == 2.5


@pytest.mark.parametrize("bad", [-1e-300, math.nan, "-3", "nan", -INF])
def test_ext_rejects_negative_and_nan(bad):
    with pytest.raises(ExtRealError):
        extreal.ext(bad)


def test_infinity_absorbs():
    assert extreal.add(1.0, INF) == INF
    assert extreal.sup([0.5, INF, 2.0]) == INF
    assert extreal.mul(INF, 2.0) == INF
    with pytest.raises(ExtRealError):
        extreal.mul(0.0, INF)


def test_empty_sup_is_zero():
    assert extreal.sup([]) == 0.0


def test_formatting_round_trips():
    assert extreal.fmt(INF) == "inf"
    assert extreal.fmt(0.1) == "0.1"
    assert extreal.to_json(INF) == "inf"
    assert extreal.to_json(3.0) == 3.0


@given(nonneg)
def test_fmt_parse_round_trip(v):
    assert extreal.parse(extreal.fmt(v)) == v


@given(nonneg, nonneg)
def test_add_is_total_order_compatible(a, b):
    s = extreal.add(a, b)
    assert s >= a and s >= b
    assert extreal.is_finite(s) == (extreal.is_finite(a) and extreal.is_finite(b) and s != INF)
