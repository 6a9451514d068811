import io
import json
import math

import pytest
from hypothesis import given, strategies as st

from momentbounds.report import HEADER, STATUSES, Report, Row, emit, format_float, render

HEADER_LINE = "check_id,theorem,q,lhs,rhs,margin,status,method,ci_halfwidth"


def _row(i=0, status="pass"):
    return Row(f"s/{i}/thm2.plus_tight", "thm2", 2.0, 0.5, 1.0, 0.5, status, "exact", 0.0)


def test_header_fixed():
    assert ",".join(HEADER) == HEADER_LINE


def test_empty_report_is_header_only():
    assert render(Report([])) == HEADER_LINE + "\n"
    assert render(Report([]), "jsonl") == ""


def test_three_rows_four_lines():
    text = render(Report([_row(i) for i in range(3)]))
    assert len(text.splitlines()) == 4


def test_jsonl_keys():
    lines = render(Report([_row(0), _row(1)]), "jsonl").splitlines()
    assert len(lines) == 2
    for line in lines:
        assert tuple(json.loads(line)) == HEADER


def test_unknown_format_and_status():
    with pytest.raises(ValueError):
        emit(Report([]), "xml", io.StringIO())
    with pytest.raises(ValueError):
        _row(status="maybe")


@pytest.mark.parametrize("x, expected", [
    (None, ""), (math.nan, "nan"), (math.inf, "inf"), (-math.inf, "-inf"), (0.1, "0.10000000000000001"),
    (2.0, "2"),
])
def test_format_float(x, expected):
    assert format_float(x) == expected


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(x):
    assert float(format_float(x)) == x


def test_csv_quoting():
    r = Row('a,"b"', "thm1", None, 1.0, 2.0, 1.0, "pass", "exact", 0.0)
    assert render(Report([r])).splitlines()[1].startswith('"a,""b""",thm1,,')


def test_counts_and_failed():
    rep = Report([_row(0), _row(1, "fail"), _row(2, "not_asserted")])
    assert rep.failed
    assert rep.counts() == {"pass": 1, "fail": 1, "not_asserted": 1, "inapplicable": 0, "unavailable": 0}
    assert set(rep.counts()) == set(STATUSES)
    assert [r.check_id for r in rep.by_status("fail")] == ["s/1/thm2.plus_tight"]
    assert not Report([_row()]).failed
