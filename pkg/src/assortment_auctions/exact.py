"""Shared exact-arithmetic helpers.

Every quantity in this package is a ``fractions.Fraction``; the only floats
allowed are the two infinite sentinels below, used for scores of lists that
can never win. Linear systems and concave envelopes are therefore solved
here by hand instead of through numpy, which cannot carry Fraction entries.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence, Union

NEG_INF = float("-inf")
POS_INF = float("inf")

#: A finite exact rational, or one of the infinite sentinels.
Value = Union[Fraction, float]

ZERO = Fraction(0)
ONE = Fraction(1)


class EnumerationCapError(RuntimeError):
    """An enumeration would exceed its configured size cap."""


def is_finite(value: Value) -> bool:
    return isinstance(value, Fraction)


def parse_rational(raw) -> Fraction:
    """Convert an int, Fraction, or string like ``"7/2"`` / ``"7.5"`` exactly.

    Decimal strings are scaled in base 10, so ``"0.1"`` becomes 1/10, not the
    nearest binary float. Raw binary floats are rejected to keep exactness.
    """
    if isinstance(raw, bool):
        raise ValueError(f"expected a rational number, got {raw!r}")
    if isinstance(raw, (int, Fraction)):
        return Fraction(raw)
    if isinstance(raw, str):
        text = raw.strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse {raw!r} as a rational") from exc
    raise ValueError(
        f"expected int or string for an exact rational, got {type(raw).__name__}"
    )


def format_value(value: Value) -> str:
    """Render a Value as an exact fraction string, or ``-inf`` / ``inf``."""
    if isinstance(value, Fraction):
        return str(value)
    if value == NEG_INF:
        return "-inf"
    if value == POS_INF:
        return "inf"
    raise ValueError(f"not an exact value: {value!r}")


def solve_linear_system(
    matrix: Sequence[Sequence[Fraction]],
    rhs_columns: Sequence[Sequence[Fraction]],
) -> list[list[Fraction]]:
    """Solve ``matrix @ x = rhs`` exactly for several right-hand sides.

    ``rhs_columns`` is given row-wise (one entry per matrix row, each holding
    the row's value in every right-hand side). Returns the solutions in the
    same row-wise layout. Raises ``ValueError`` on a singular matrix.
    """
    n = len(matrix)
    if n == 0:
        return []
    width = len(rhs_columns[0])
    rows = [list(matrix[i]) + list(rhs_columns[i]) for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if pivot is None:
            raise ValueError("singular linear system")
        if pivot != col:
            rows[col], rows[pivot] = rows[pivot], rows[col]
        pivot_row = rows[col]
        inv = ONE / pivot_row[col]
        for k in range(col, n + width):
            pivot_row[k] *= inv
        for r in range(n):
            if r == col or rows[r][col] == 0:
                continue
            factor = rows[r][col]
            row = rows[r]
            for k in range(col, n + width):
                row[k] -= factor * pivot_row[k]
    return [rows[i][n:] for i in range(n)]


def upper_concave_envelope(
    points: Iterable[tuple[Fraction, Fraction]],
) -> list[tuple[Fraction, Fraction]]:
    """Vertices of the upper concave envelope of a point cloud, sorted by x.

    Collinear interior points are dropped, so slopes between consecutive
    vertices are strictly decreasing.
    """
    best_y: dict[Fraction, Fraction] = {}
    for x, y in points:
        if x not in best_y or y > best_y[x]:
            best_y[x] = y
    ordered = sorted(best_y.items())
    hull: list[tuple[Fraction, Fraction]] = []
    for point in ordered:
        while len(hull) >= 2:
            (ox, oy), (ax, ay) = hull[-2], hull[-1]
            # middle point on or below the chord: not a vertex
            if (ax - ox) * (point[1] - oy) - (ay - oy) * (point[0] - ox) >= 0:
                hull.pop()
            else:
                break
        hull.append(point)
    return hull
