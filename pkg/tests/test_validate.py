import math

import pytest

from boomtrack.displacement import DisplacementSample as S
from boomtrack.validate import (
    align,
    compare,
    count_gaps,
    dumps_report,
    empty_report,
    manual_check,
    parse_report_footer,
)


def test_manual_check():
    assert manual_check(0.0, 0.625, 0.626) == pytest.approx(0.001)
    assert manual_check(0.0, 0.5, 0.5) == 0.0
    assert manual_check(0.0, 0.5, 0.53) == pytest.approx(0.03)


def test_zero_order_hold():
    sensor = [S(0.0, 0, 0.0, "inclinometer"), S(0.1, 0, 0.1, "inclinometer"), S(0.2, 0, 0.2, "inclinometer")]
    vision = [S(0.05, 0, 0), S(0.1, 0, 0), S(0.19, 0, 0)]
    al = align(vision, sensor, 0.15)
    assert [p.sensor.t for p in al.pairs] == [0.0, 0.1, 0.1]
    assert all(p.lag >= 0 for p in al.pairs)


def test_align_drops_stale_and_early():
    sensor = [S(1.0, 0, 0, "inclinometer")]
    vision = [S(0.5, 0, 0), S(1.05, 0, 0), S(2.0, 0, 0)]
    al = align(vision, sensor, 0.15)
    assert [p.t_frame for p in al.pairs] == [1.05]
    assert al.dropped == (0.5, 2.0)
    assert len(al.pairs) + len(al.dropped) == len(vision)


def test_self_compare_passes():
    s = [S(i / 10, 0.01 * i, -0.02 * i) for i in range(10)]
    r = compare(align(s, s, 0.15).pairs, 1e-9)
    assert r.max_error == 0 and r.passed


def test_tolerance_boundary():
    v = [S(0, 0, 0.05)]
    s = [S(0, 0, 0.0, "inclinometer")]
    r = compare(align(v, s).pairs, 0.026)
    assert not r.passed and r.max_error == pytest.approx(0.05)
    assert compare(align(v, s).pairs, 0.06).passed


def test_magnitude_mode():
    v = [S(0, 0.3, 0.4)]
    s = [S(0, 0.0, 0.5, "inclinometer")]
    assert compare(align(v, s).pairs, 0.026, use_magnitude=True).passed
    assert not compare(align(v, s).pairs, 0.026).passed


def test_aggregate_order():
    v = [S(i, 0, e) for i, e in enumerate([0.0, 0.01, 0.03])]
    s = [S(i, 0, 0.0, "inclinometer") for i in range(3)]
    r = compare(align(v, s).pairs, 0.1)
    assert r.mean_error <= r.rmse <= r.max_error


def test_count_gaps():
    assert count_gaps([0.0, 0.1, 0.2, 0.3], [S(0.1, 0, 0), S(0.3, 0, 0)]) == 2
    assert count_gaps([0.0], []) == 1


def test_report_text():
    v = [S(0, 0, 0.0), S(0.1, 0, 0.01)]
    s = [S(0, 0, 0.0, "inclinometer")]
    text = dumps_report(compare(align(v, s).pairs, 0.026, gap_count=3))
    assert text.splitlines()[0].startswith("t_s,vision_dy_m,sensor_dy_m,abs_error_m")
    foot = parse_report_footer(text)
    assert foot["pass"] == "true" and foot["gap_count"] == "3" and foot["max_error_m"] == "0.010000"


def test_empty_report_fails():
    r = empty_report(0.026, 5)
    assert not r.passed and math.isnan(r.max_error)
    assert parse_report_footer(dumps_report(r))["pass"] == "false"
