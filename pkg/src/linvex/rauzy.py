"""Rauzy induction as an exact combinatorial-arithmetic step.

One induction step compares the widths of the two critical bands (the
rightmost on each side).  The wider band keeps its critical position and
loses the narrower band's width; the induced exchange is computed by the
first-return oracle of the exchange module rather than by a combinatorial
insertion table, and the elementary matrix relation ``old = E @ new`` is
checked on every step.

A stage is a finite splitting sequence with its accumulated integer
matrix, the product of the elementary step factors.  The product is
maintained by column operations: at each step the winner's column adds to
the loser's column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import (
    EndpointHit,
    InconsistentStage,
    InvalidInput,
    NotReturning,
    PositiveMatrixRequired,
    SplitInfeasible,
    SplitUndefined,
    SplitUndefinedSameBand,
    SplitUndefinedTie,
)
from .exchange import Exchange, Point
from .genperm import GeneralizedPermutation, Orientation, critical_bands
from .rationals import format_fraction


class Matrix:
    """A square integer matrix indexed by a fixed tuple of band labels."""

    __slots__ = ("labels", "rows", "_index")

    def __init__(self, labels: Sequence[str], rows: list[list[int]]):
        self.labels = tuple(labels)
        self.rows = rows
        self._index = {label: i for i, label in enumerate(self.labels)}

    @classmethod
    def identity(cls, labels: Sequence[str]) -> "Matrix":
        n = len(labels)
        return cls(labels, [[1 if i == j else 0 for j in range(n)] for i in range(n)])

    def copy(self) -> "Matrix":
        return Matrix(self.labels, [row[:] for row in self.rows])

    def entry(self, row_label: str, col_label: str) -> int:
        return self.rows[self._index[row_label]][self._index[col_label]]

    def column(self, label: str) -> list[int]:
        j = self._index[label]
        return [row[j] for row in self.rows]

    def column_norm(self, label: str) -> int:
        return sum(self.column(label))

    def column_norms(self) -> dict[str, int]:
        return {label: self.column_norm(label) for label in self.labels}

    def add_column(self, source: str, target: str) -> None:
        """target column += source column (right multiplication by E)."""
        i, j = self._index[source], self._index[target]
        for row in self.rows:
            row[j] += row[i]

    def is_nonnegative(self) -> bool:
        return all(v >= 0 for row in self.rows for v in row)

    def is_positive(self) -> bool:
        return all(v > 0 for row in self.rows for v in row)

    def mul(self, other: "Matrix") -> "Matrix":
        if self.labels != other.labels:
            raise InvalidInput("matrix label sets differ")
        n = len(self.labels)
        rows = [
            [sum(self.rows[i][k] * other.rows[k][j] for k in range(n)) for j in range(n)]
            for i in range(n)
        ]
        return Matrix(self.labels, rows)

    def apply_to_widths(self, widths: Mapping[str, Fraction]) -> dict[str, Fraction]:
        return {
            row_label: sum(
                (self.entry(row_label, col) * widths[col] for col in self.labels),
                Fraction(0),
            )
            for row_label in self.labels
        }

    def determinant(self) -> int:
        """Exact determinant by fraction-free Bareiss elimination."""
        n = len(self.labels)
        m = [row[:] for row in self.rows]
        sign = 1
        prev = 1
        for k in range(n - 1):
            if m[k][k] == 0:
                for r in range(k + 1, n):
                    if m[r][k] != 0:
                        m[k], m[r] = m[r], m[k]
                        sign = -sign
                        break
                else:
                    return 0
            for i in range(k + 1, n):
                for j in range(k + 1, n):
                    m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
                m[i][k] = 0
            prev = m[k][k]
        return sign * m[n - 1][n - 1]

    def column_norm_gcd(self) -> int:
        return math.gcd(*(self.column_norm(a) for a in self.labels))

    def to_json_rows(self) -> list[list[str]]:
        return [[str(v) for v in row] for row in self.rows]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.labels == other.labels and self.rows == other.rows

    def __repr__(self) -> str:
        return f"Matrix({self.labels}, {self.rows})"


class SplitKind(Enum):
    TOP_WINS = "top"
    BOTTOM_WINS = "bottom"


@dataclass(frozen=True)
class SplitStep:
    """One induction step: which side won, and the elementary factor."""

    kind: SplitKind
    winner: str
    loser: str
    matrix: Matrix = field(compare=False, repr=False)

    def to_json_dict(self) -> dict:
        return {"kind": self.kind.value, "winner": self.winner, "loser": self.loser}


def elementary_matrix(labels: Sequence[str], winner: str, loser: str) -> Matrix:
    m = Matrix.identity(labels)
    m.rows[m._index[winner]][m._index[loser]] = 1
    return m


@dataclass
class Stage:
    """A finite splitting sequence with its accumulated cocycle matrix."""

    nodes: list[GeneralizedPermutation]
    steps: list[SplitStep]
    matrix: Matrix
    halted: SplitUndefined | None = None

    @property
    def depth(self) -> int:
        return len(self.steps)

    @property
    def start(self) -> GeneralizedPermutation:
        return self.nodes[0]

    @property
    def end(self) -> GeneralizedPermutation:
        return self.nodes[-1]

    def to_json_dict(self) -> dict:
        return {
            "nodes": [node.to_json_dict() for node in self.nodes],
            "steps": [step.to_json_dict() for step in self.steps],
            "matrix": {
                "labels": list(self.matrix.labels),
                "rows": self.matrix.to_json_rows(),
            },
            "halted": None if self.halted is None else type(self.halted).__name__,
        }


def split(x: Exchange) -> tuple[Exchange, SplitStep]:
    """One induction step, with the induced exchange from the return oracle.

    Raises the undefined-case errors when the critical bands coincide or
    tie; verifies the elementary width relation exactly before returning.
    """
    alpha_top, alpha_bottom = critical_bands(x.perm)
    if alpha_top == alpha_bottom:
        raise SplitUndefinedSameBand(f"band {alpha_top} occupies both critical positions")
    w_top = x.widths[alpha_top]
    w_bottom = x.widths[alpha_bottom]
    if w_top == w_bottom:
        raise SplitUndefinedTie(f"critical widths tie at {w_top}")
    if w_top > w_bottom:
        kind, winner, loser = SplitKind.TOP_WINS, alpha_top, alpha_bottom
    else:
        kind, winner, loser = SplitKind.BOTTOM_WINS, alpha_bottom, alpha_top

    cut = x.side_length - x.widths[loser]
    induced = x.first_return_map(cut)
    if induced.perm.alphabet != x.perm.alphabet:
        raise SplitInfeasible(
            f"induced exchange lost label correspondence: {induced.perm.alphabet}"
        )
    # old = E @ new with E = I + (winner row, loser column).
    for band in x.perm.alphabet:
        expected = induced.widths[band]
        if band == winner:
            expected = expected + induced.widths[loser]
        if x.widths[band] != expected:
            raise InconsistentStage(
                f"width relation failed on band {band}: {x.widths[band]} vs {expected}"
            )
    step = SplitStep(kind, winner, loser, elementary_matrix(sorted(x.perm.alphabet), winner, loser))
    return induced, step


def expand(x: Exchange, n: int) -> Stage:
    """Iterate the split n times, accumulating nodes, steps and the matrix.

    An undefined split ends the stage early; the cause is attached rather
    than raised because halting is data for rational widths.
    """
    if n < 0:
        raise InvalidInput("expansion depth must be nonnegative")
    labels = sorted(x.perm.alphabet)
    stage = Stage(nodes=[x.perm], steps=[], matrix=Matrix.identity(labels))
    current = x
    for _ in range(n):
        try:
            current, step = split(current)
        except SplitUndefined as err:
            stage.halted = err
            break
        stage.steps.append(step)
        stage.nodes.append(current.perm)
        stage.matrix.add_column(step.winner, step.loser)
    return stage


def widths_at(stage: Stage, x: Exchange) -> dict[str, Fraction]:
    """Induced widths after the stage, by factor-wise back-substitution.

    Each elementary factor inverts to ``winner -= loser``; no matrix
    inversion is ever performed and the common denominator never grows.
    """
    if stage.nodes[0] != x.perm:
        raise InconsistentStage("stage does not start at this exchange")
    values = dict(x.widths)
    for step in stage.steps:
        values[step.winner] -= values[step.loser]
        if values[step.winner] <= 0:
            raise InconsistentStage(
                f"back-substitution made band {step.winner} nonpositive"
            )
    return values


def induced_exchange(stage: Stage, x: Exchange) -> Exchange:
    return Exchange(stage.end, widths_at(stage, x))


_PROBE_FRACTIONS = (
    Fraction(1, 2),
    Fraction(1, 3),
    Fraction(2, 5),
    Fraction(3, 7),
    Fraction(5, 11),
    Fraction(4, 13),
)


def visit_counts(x: Exchange, n: int, step_budget: int = 10**7) -> Matrix:
    """Count band visits of depth-n return orbits, one probe per band.

    For each band of the depth-n induced exchange, a probe point inside
    one of its ends is iterated under the original map until it returns to
    the truncated domain, counting how many times it lands in each
    original band (the start point included, the return point excluded).
    Probe points sit at interior fractions of the end and are re-sampled
    on an endpoint hit.
    """
    stage = expand(x, n)
    if stage.depth < n:
        raise stage.halted  # type: ignore[misc]
    induced = induced_exchange(stage, x)
    cut = induced.side_length
    labels = sorted(x.perm.alphabet)
    index = {label: i for i, label in enumerate(labels)}
    rows = [[0] * len(labels) for _ in labels]
    for band in labels:
        side, lo, hi = induced.end_intervals(band)[0]
        for probe in _PROBE_FRACTIONS:
            point = Point(side, lo + (hi - lo) * probe)
            counts = [0] * len(labels)
            try:
                for _ in range(step_budget):
                    counts[index[x.band_at(point.side, point.offset)]] += 1
                    point = x.apply(point)
                    if point.offset < cut:
                        break
                else:
                    raise NotReturning(f"probe for band {band} did not return")
            except EndpointHit:
                continue
            for row_label in labels:
                rows[index[row_label]][index[band]] = counts[index[row_label]]
            break
        else:
            raise EndpointHit(None, f"all probe points for band {band} hit endpoints")
    return Matrix(labels, rows)


def return_time(x: Exchange, n: int, band: str, step_budget: int = 10**7) -> int:
    """First-return time of the depth-n end of ``band``, by direct orbit."""
    stage = expand(x, n)
    if stage.depth < n:
        raise stage.halted  # type: ignore[misc]
    induced = induced_exchange(stage, x)
    cut = induced.side_length
    side, lo, hi = induced.end_intervals(band)[0]
    for probe in _PROBE_FRACTIONS:
        point = Point(side, lo + (hi - lo) * probe)
        steps = 0
        try:
            while True:
                point = x.apply(point)
                steps += 1
                if point.offset < cut:
                    return steps
                if steps > step_budget:
                    raise NotReturning(f"band {band} did not return in {step_budget}")
        except EndpointHit:
            continue
    raise EndpointHit(None, f"all probe points for band {band} hit endpoints")


def max_entry_ratio(matrix: Matrix) -> Fraction:
    """Largest ratio of two entries sharing a row; positive matrices only."""
    if not matrix.is_positive():
        raise PositiveMatrixRequired("entry ratio needs a strictly positive matrix")
    best = Fraction(1)
    for row in matrix.rows:
        ratio = Fraction(max(row), min(row))
        if ratio > best:
            best = ratio
    return best


@dataclass(frozen=True)
class DistortionReport:
    """Column balance of a stage matrix and its row-entry spread."""

    column_ratio: Fraction
    entry_ratio: Fraction | None
    positive: bool

    def to_json_dict(self) -> dict:
        return {
            "column_ratio": format_fraction(self.column_ratio),
            "entry_ratio": None if self.entry_ratio is None else format_fraction(self.entry_ratio),
            "positive": self.positive,
        }


def distortion_report(stage: Stage) -> DistortionReport:
    norms = [stage.matrix.column_norm(a) for a in stage.matrix.labels]
    column_ratio = Fraction(max(norms), min(norms))
    positive = stage.matrix.is_positive()
    entry_ratio = max_entry_ratio(stage.matrix) if positive else None
    return DistortionReport(column_ratio=column_ratio, entry_ratio=entry_ratio, positive=positive)


def jacobian_ratio(
    stage: Stage, y: Mapping[str, Fraction], y_prime: Mapping[str, Fraction]
) -> Fraction:
    """Exact ratio of the projective map's volume factors at two widths.

    The stage constant cancels, leaving (|Q y'| / |Q y|) ** (d - 1).
    """
    qy = sum((v for v in stage.matrix.apply_to_widths(y).values()), Fraction(0))
    qyp = sum((v for v in stage.matrix.apply_to_widths(y_prime).values()), Fraction(0))
    d = len(stage.matrix.labels)
    return (qyp / qy) ** (d - 1)


def direction_witness(
    perm: GeneralizedPermutation, kind: SplitKind
) -> dict[str, Fraction] | None:
    """Integer widths making the given split direction strictly feasible.

    Returns None when the switch condition forces the opposite comparison,
    which happens exactly when the would-be winner is a reversing band and
    the loser is alone in the opposite reversing class.
    """
    alpha_top, alpha_bottom = critical_bands(perm)
    if alpha_top == alpha_bottom:
        return None
    if kind is SplitKind.TOP_WINS:
        winner, loser = alpha_top, alpha_bottom
    else:
        winner, loser = alpha_bottom, alpha_top

    top_rev = set(perm.reversing_top_bands())
    bottom_rev = set(perm.reversing_bottom_bands())
    if bool(top_rev) != bool(bottom_rev):
        return None  # no positive widths satisfy the switch at all

    widths: dict[str, Fraction] = {}
    base_top = Fraction(max(len(bottom_rev), 1))
    base_bottom = Fraction(max(len(top_rev), 1))
    for label in perm.alphabet:
        if label in top_rev:
            widths[label] = base_top
        elif label in bottom_rev:
            widths[label] = base_bottom
        else:
            widths[label] = Fraction(1)

    if widths[winner] <= widths[loser]:
        bump = widths[loser] - widths[winner] + 1
        if perm.orientation_of(winner) is Orientation.PRESERVING:
            widths[winner] += bump
        elif winner in top_rev:
            partners = sorted(bottom_rev - {loser})
            if not partners:
                return None
            widths[winner] += bump
            widths[partners[0]] += bump
        else:
            partners = sorted(top_rev - {loser})
            if not partners:
                return None
            widths[winner] += bump
            widths[partners[0]] += bump
    return widths
