"""Correspondence files: a header line then ``pair_a pair_b x1 y1 x2 y2`` rows."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..epipolar import MatchSet
from ..errors import InvalidInput, IoError, ParseError

HEADER = "pair_a pair_b x1 y1 x2 y2"


def read_matches(path) -> list[MatchSet]:
    """Group rows by ``(pair_a, pair_b)`` in order of first appearance.

    Duplicate rows are kept.
    """
    path = Path(path)
    groups: dict[tuple[int, int], list] = {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            if n == 1:
                continue
            line = raw.strip()
            if not line:
                continue
            el = line.split()
            if len(el) != 6:
                raise ParseError(f"expected 6 fields, got {len(el)}", n, path)
            try:
                a, b = int(el[0]), int(el[1])
                xs = [float(t) for t in el[2:]]
            except ValueError:
                raise ParseError("non-numeric field", n, path) from None
            if not all(math.isfinite(x) for x in xs):
                raise ParseError("non-finite coordinate", n, path)
            if a == b:
                raise ParseError("pair links a frame to itself", n, path)
            groups.setdefault((a, b), []).append(xs)
    return [MatchSet(k, np.array(rows)) for k, rows in groups.items()]


def write_matches(path, match_sets) -> Path:
    path = Path(path)
    lines = [HEADER]
    for ms in match_sets:
        a, b = ms.pair_id
        for row in ms.matches:
            if not np.all(np.isfinite(row)):
                raise InvalidInput("refusing to write non-finite coordinates")
            lines.append(" ".join([str(a), str(b), *("%.17g" % x for x in row)]))
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path
