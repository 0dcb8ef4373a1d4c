import io

import numpy as np
import pytest

from liqflow.errors import DataError, TickOrderError
from liqflow.tickio import Tick, TickArrays, format_price, parse_ticks, read_ticks, write_ticks


def test_roundtrip(tmp_path):
    ticks = TickArrays([1, 2, 2, 5], [10.0, 10.01, 9.99, 123.456789], [100, 0, 3, 7])
    path = tmp_path / "t.csv"
    write_ticks(ticks, path)
    back = read_ticks(path)
    assert np.array_equal(back.t_ns, ticks.t_ns)
    assert np.array_equal(back.price, ticks.price)
    assert np.array_equal(back.volume, ticks.volume)
    assert path.read_text().splitlines()[0] == "t_ns,price,volume"


def test_header_only_is_empty():
    assert len(parse_ticks(["t_ns,price,volume\n"])) == 0
    assert len(parse_ticks([])) == 0


@pytest.mark.parametrize(
    "body,line",
    [
        ("1,10.0,5\nx,10,5\n", 3),
        ("1,10.0,5\n2,-1,5\n", 3),
        ("1,10.0,5\n2,10.0,-3\n", 3),
        ("5,10.0,5\n2,10.0,3\n", 3),
        ("1,10.0\n", 2),
        ("1,nan,1\n", 2),
    ],
)
def test_bad_rows_report_line(body, line):
    with pytest.raises(DataError) as info:
        parse_ticks(io.StringIO("t_ns,price,volume\n" + body))
    assert info.value.line == line


def test_bad_header():
    with pytest.raises(DataError):
        parse_ticks(["time,price,volume\n"])


def test_arrays_validation():
    with pytest.raises(TickOrderError):
        TickArrays([3, 2], [1.0, 1.0], [0, 0])
    with pytest.raises(DataError):
        TickArrays([1, 2], [1.0, 0.0], [0, 0])
    with pytest.raises(ValueError):
        TickArrays([1, 2], [1.0], [0, 0])


def test_arrays_access():
    ticks = TickArrays.from_ticks([Tick(1, 10.0, 5), Tick(2, 11.0, 6)])
    assert ticks[1] == Tick(2, 11.0, 6)
    assert len(ticks[1:]) == 1
    assert list(ticks)[0].price == 10.0
    with pytest.raises(ValueError):
        ticks.price[0] = 3.0


def test_format_price():
    assert format_price(10.0) == "10"
    assert format_price(10.01) == "10.01"
    assert float(format_price(1 / 3)) == 1 / 3
