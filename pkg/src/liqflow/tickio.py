"""Tick containers and the `t_ns,price,volume` CSV format."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, TickOrderError

TICK_HEADER = ("t_ns", "price", "volume")


@dataclass(frozen=True)
class Tick:
    t_ns: int
    price: float
    volume: int = 0


@dataclass(frozen=True)
class TickArrays:
    """Columnar tick stream; validated on construction."""

    t_ns: np.ndarray
    price: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_ns, dtype=np.int64).reshape(-1)
        p = np.asarray(self.price, dtype=float).reshape(-1)
        v = np.asarray(self.volume, dtype=float).reshape(-1)
        if not (t.size == p.size == v.size):
            raise ValueError("column lengths differ")
        if t.size:
            if not np.all(np.isfinite(p)) or np.any(p <= 0):
                bad = int(np.nonzero(~(np.isfinite(p) & (p > 0)))[0][0])
                raise DataError(f"price must be finite and positive, got {p[bad]!r} at tick {bad}")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                bad = int(np.nonzero(~(np.isfinite(v) & (v >= 0)))[0][0])
                raise DataError(f"volume must be non-negative, got {v[bad]!r} at tick {bad}")
            back = np.nonzero(np.diff(t) < 0)[0]
            if back.size:
                raise TickOrderError(f"timestamps go backwards at tick {int(back[0]) + 1}")
        for name, arr in (("t_ns", t), ("price", p), ("volume", v)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self):
        return int(self.t_ns.size)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return TickArrays(self.t_ns[idx], self.price[idx], self.volume[idx])
        return Tick(int(self.t_ns[idx]), float(self.price[idx]), int(self.volume[idx]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_ticks(cls, ticks) -> "TickArrays":
        ticks = list(ticks)
        return cls(
            np.array([t.t_ns for t in ticks], dtype=np.int64),
            np.array([t.price for t in ticks], dtype=float),
            np.array([t.volume for t in ticks], dtype=float),
        )

    @classmethod
    def empty(cls) -> "TickArrays":
        return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0))


def parse_ticks(lines, source: str = "<input>") -> TickArrays:
    """Parse CSV text lines with header t_ns,price,volume."""
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        return TickArrays.empty()
    header = [h.strip() for h in header]
    if tuple(header) != TICK_HEADER:
        raise DataError(f"{source}: expected header {','.join(TICK_HEADER)}, got {','.join(header)}", line=1)
    t, p, v = [], [], []
    prev = None
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise DataError(f"{source}: expected 3 fields, got {len(row)}", line=line)
        try:
            ti = int(row[0])
            pi = float(row[1])
            vi = int(row[2])
        except ValueError as exc:
            raise DataError(f"{source}: {exc}", line=line) from None
        if not math.isfinite(pi) or pi <= 0:
            raise DataError(f"{source}: price must be finite and positive", line=line)
        if vi < 0:
            raise DataError(f"{source}: volume must be non-negative", line=line)
        if prev is not None and ti < prev:
            raise DataError(f"{source}: timestamp {ti} earlier than {prev}", line=line)
        prev = ti
        t.append(ti)
        p.append(pi)
        v.append(vi)
    return TickArrays(np.array(t, dtype=np.int64), np.array(p, dtype=float), np.array(v, dtype=float))


def read_ticks(path) -> TickArrays:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        return parse_ticks(fh, source=str(path))


def format_price(p: float) -> str:
    return f"{p:.6f}".rstrip("0").rstrip(".") if p == round(p, 6) else repr(float(p))


def write_ticks(ticks: TickArrays, dest) -> None:
    """Write ticks as CSV to a path or a text stream."""
    if isinstance(dest, (str, Path)):
        with Path(dest).open("w", encoding="utf-8", newline="") as fh:
            write_ticks(ticks, fh)
        return
    dest.write(",".join(TICK_HEADER) + "\n")
    buf = io.StringIO()
    for t, p, v in zip(ticks.t_ns.tolist(), ticks.price.tolist(), ticks.volume.tolist()):
        buf.write(f"{t},{format_price(p)},{int(v)}\n")
    dest.write(buf.getvalue())
