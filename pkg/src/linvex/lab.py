"""Seeded samplers and desk-scale statistical experiments.

Width sampling draws sorted-uniform gaps on a rational grid and then
rescales the two reversing groups to a common total, so every sample
satisfies the switch condition exactly.  The result is not exactly the
Lebesgue measure of the configuration polytope; it is documented as an
approximation adequate for full-measure phenomena.

Orbit statistics run on an integer grid: all layout data shares one
common denominator, so a million-step orbit is exact integer arithmetic.
Experiments are deterministic given their seed; per-sample substreams
derive from (seed, index).  The environment variable LINVEX_SEED
overrides configured seeds.
"""

from __future__ import annotations

import csv
import io
import os
import random
from dataclasses import dataclass, field
from fractions import Fraction

from . import approx, modp
from .errors import DegenerateSample, InvalidInput
from .exchange import Exchange, Side
from .genperm import GeneralizedPermutation
from .rationals import canonical_json_bytes, format_fraction

DEFAULT_DENOMINATOR_BOUND = 2**40
RESAMPLE_CAP = 100


def effective_seed(seed: int) -> int:
    env = os.environ.get("LINVEX_SEED")
    if env is not None:
        return int(env)
    return int(seed)


def substream(seed: int, index) -> random.Random:
    """Deterministic per-sample stream; str seeding hashes with sha512."""
    return random.Random(f"{seed}:{index}")


@dataclass(frozen=True)
class SamplerConfig:
    perm: GeneralizedPermutation
    denominator_bound: int = DEFAULT_DENOMINATOR_BOUND
    seed: int = 0
    count: int = 1


@dataclass
class ExperimentReport:
    experiment: str
    parameters: dict
    records: list[dict]
    aggregates: dict = field(default_factory=dict)
    passed: bool | None = None

    def to_json_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "parameters": self.parameters,
            "records": self.records,
            "aggregates": self.aggregates,
            "passed": self.passed,
        }

    def to_json_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_json_dict())

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        keys: list[str] = []
        for record in self.records:
            for key in record:
                if key not in keys:
                    keys.append(key)
        writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        for record in self.records:
            writer.writerow(record)
        return buf.getvalue()


def _gaps(rng: random.Random, parts: int, grid: int) -> list[Fraction]:
    """Widths of a sorted-uniform partition of [0, 1] on a 1/grid grid."""
    for _ in range(RESAMPLE_CAP):
        cuts = sorted(rng.randrange(0, grid + 1) for _ in range(parts - 1))
        values = []
        prev = 0
        for c in cuts + [grid]:
            values.append(c - prev)
            prev = c
        if all(v > 0 for v in values):
            return [Fraction(v, grid) for v in values]
    raise DegenerateSample(f"could not draw {parts} positive gaps on grid {grid}")


def sample_widths(cfg: SamplerConfig) -> list[dict[str, Fraction]]:
    """Draw ``count`` exact width vectors for the configured permutation."""
    perm = cfg.perm
    if cfg.denominator_bound < perm.band_count:
        raise InvalidInput("denominator bound must be at least the band count")
    seed = effective_seed(cfg.seed)
    out = []
    labels = list(perm.alphabet)
    top_rev = set(perm.reversing_top_bands())
    bottom_rev = set(perm.reversing_bottom_bands())
    for index in range(cfg.count):
        rng = substream(seed, index)
        for _ in range(RESAMPLE_CAP):
            gaps = _gaps(rng, perm.band_count, cfg.denominator_bound)
            widths = dict(zip(labels, gaps))
            if top_rev:
                top_sum = sum((widths[a] for a in top_rev), Fraction(0))
                bottom_sum = sum((widths[a] for a in bottom_rev), Fraction(0))
                level = (top_sum + bottom_sum) / 2
                for a in top_rev:
                    widths[a] = widths[a] * level / top_sum
                for a in bottom_rev:
                    widths[a] = widths[a] * level / bottom_sum
            if all(v > 0 for v in widths.values()):
                out.append(widths)
                break
        else:
            raise DegenerateSample("sampler kept producing zero widths")
    return out


def _random_start(layout, rng: random.Random) -> tuple[Side, int]:
    side = Side.TOP if rng.randrange(2) == 0 else Side.BOTTOM
    return side, rng.randrange(layout.length)


def _occupancy_run(
    x: Exchange, start_rng: random.Random, iters: int, substeps: int, bins_per_side: int
) -> tuple[list[int], int]:
    """Iterate substeps-at-a-time and bin positions; returns counts, restarts."""
    orbit = x.integer_layout()
    counts = [0] * (2 * bins_per_side)
    restarts = 0
    while True:
        side, offset = _random_start(orbit, start_rng)
        done = 0
        counts_try = [0] * (2 * bins_per_side)
        ok = True
        for _ in range(iters):
            base = 0 if side is Side.TOP else bins_per_side
            counts_try[base + offset * bins_per_side // orbit.length] += 1
            for _ in range(substeps):
                step = orbit.step(side, offset)
                if step is None:
                    ok = False
                    break
                side, offset = step
            if not ok:
                break
            done += 1
        if ok:
            for i, c in enumerate(counts_try):
                counts[i] = c
            return counts, restarts
        restarts += 1
        if restarts > RESAMPLE_CAP:
            raise DegenerateSample("orbit kept hitting endpoints")


def total_ergodicity_experiment(
    x: Exchange,
    p: int,
    bins: int,
    iters: int,
    seed: int = 0,
    tower_delta: Fraction = Fraction(1, 4),
    tower_budget: int = 10_000,
    tolerance: float = 0.05,
) -> ExperimentReport:
    """Two evidence streams for total ergodicity at a prime.

    Stream one asks for a verified tower with height coprime to p (or a
    structural obstruction).  Stream two measures how evenly an orbit of
    the p-th power fills a uniform bin partition of both sides.
    """
    if p < 2:
        raise InvalidInput("p must be a prime, at least 2")
    seed = effective_seed(seed)
    params = {
        "prime": p,
        "bins_per_side": bins,
        "iterations": iters,
        "seed": seed,
        "tower_delta": format_fraction(tower_delta),
        "tower_budget": tower_budget,
        "tolerance": tolerance,
    }
    records: list[dict] = []

    tower_outcome: dict
    try:
        result = modp.find_coprime_tower(x, tower_delta, p, budget=tower_budget)
    except Exception as err:  # noqa: BLE001 - outcome recorded, not hidden
        tower_outcome = {"kind": type(err).__name__, "detail": str(err)}
    else:
        if isinstance(result, modp.StructuralObstruction):
            tower_outcome = {"kind": "StructuralObstruction", "detail": result.reason}
        else:
            tower_outcome = {
                "kind": "CyclicTower",
                "band": result.band,
                "height": result.height,
                "depth": result.depth,
            }
    records.append({"stream": "coprime_tower", **tower_outcome})

    if iters > 0:
        counts, restarts = _occupancy_run(x, substream(seed, "birkhoff"), iters, p, bins)
        assert sum(counts) == iters
        expected = iters / (2 * bins)
        max_dev = max(abs(c - expected) / expected for c in counts)
        records.append(
            {
                "stream": "birkhoff",
                "max_bin_deviation": max_dev,
                "restarts": restarts,
                "occupied_bins": sum(1 for c in counts if c),
            }
        )
        passed = max_dev < tolerance
        aggregates = {"max_bin_deviation": max_dev, "tower": tower_outcome["kind"]}
    else:
        records.append({"stream": "birkhoff", "insufficient": True})
        passed = None
        aggregates = {"insufficient": True, "tower": tower_outcome["kind"]}
    return ExperimentReport(
        experiment="total_ergodicity",
        parameters=params,
        records=records,
        aggregates=aggregates,
        passed=passed,
    )


def product_experiment(
    x1: Exchange,
    x2: Exchange,
    boxes: int,
    iters: int,
    seed: int = 0,
    tolerance: float = 0.05,
) -> ExperimentReport:
    """Joint occupancy of two orbits on a boxes-by-boxes grid.

    Statistical evidence only: near-uniform joint occupancy is consistent
    with the product system having no invariant measure beyond the
    product; concentration flags the opposite.

    A classical factor keeps each side invariant, so its coordinate is the
    offset within the starting side; a non-classical factor flattens both
    sides into one coordinate.
    """
    seed = effective_seed(seed)
    params = {
        "boxes": boxes,
        "iterations": iters,
        "seed": seed,
        "tolerance": tolerance,
    }
    if iters <= 0:
        return ExperimentReport(
            experiment="product_equidistribution",
            parameters=params,
            records=[{"insufficient": True}],
            aggregates={"insufficient": True},
            passed=None,
        )
    orbits = (x1.integer_layout(), x2.integer_layout())
    classical = (x1.perm.is_classical, x2.perm.is_classical)
    rng = substream(seed, "product")
    counts = [0] * (boxes * boxes)
    for attempt in range(RESAMPLE_CAP):
        state = [_random_start(orbits[0], rng), _random_start(orbits[1], rng)]
        counts = [0] * (boxes * boxes)
        ok = True
        for _ in range(iters):
            cell = 0
            for k in (0, 1):
                side, offset = state[k]
                if classical[k]:
                    cell = cell * boxes + offset * boxes // orbits[k].length
                else:
                    flat = offset + (orbits[k].length if side is Side.BOTTOM else 0)
                    cell = cell * boxes + flat * boxes // (2 * orbits[k].length)
            counts[cell] += 1
            nxt0 = orbits[0].step(*state[0])
            nxt1 = orbits[1].step(*state[1])
            if nxt0 is None or nxt1 is None:
                ok = False
                break
            state = [nxt0, nxt1]
        if ok:
            break
    else:
        raise DegenerateSample("joint orbit kept hitting endpoints")
    assert sum(counts) == iters
    expected = iters / (boxes * boxes)
    max_dev = max(abs(c - expected) / expected for c in counts)
    empty = sum(1 for c in counts if c == 0)
    records = [
        {
            "max_box_deviation": max_dev,
            "empty_boxes": empty,
            "attempts": attempt + 1,
        }
    ]
    return ExperimentReport(
        experiment="product_equidistribution",
        parameters=params,
        records=records,
        aggregates={"max_box_deviation": max_dev, "empty_boxes": empty},
        passed=max_dev < tolerance,
    )


def rigidity_scan(
    cfg: SamplerConfig,
    xi: Fraction,
    horizon: int,
    tower_budget: int = 2_000,
) -> ExperimentReport:
    """Empirical density of dyadic windows holding a rigidity time.

    For each sampled exchange, tower heights from a shrinking ladder are
    graded by exact defect; window i in 0 .. horizon-1 counts as covered
    when some flagged time lands in [2^i, 2^(i+1)).
    """
    xi = Fraction(xi)
    seed = effective_seed(cfg.seed)
    params = {
        "xi": format_fraction(xi),
        "horizon": horizon,
        "seed": seed,
        "samples": cfg.count,
        "denominator_bound": cfg.denominator_bound,
    }
    records = []
    densities = []
    for index, widths in enumerate(sample_widths(cfg)):
        x = Exchange(cfg.perm, widths)
        try:
            recs = approx.find_rigidity_times(x, xi, [], tower_budget=tower_budget)
        except Exception as err:  # noqa: BLE001
            records.append({"sample": index, "error": type(err).__name__})
            continue
        flagged = [r.n for r in recs if r.flagged]
        covered = set()
        for n in flagged:
            if 1 <= n < 2**horizon:
                covered.add(n.bit_length() - 1)
        density = len(covered) / horizon if horizon else 0.0
        densities.append(density)
        records.append(
            {
                "sample": index,
                "flagged_times": ",".join(str(n) for n in flagged),
                "covered_windows": len(covered),
                "density": density,
            }
        )
    aggregates = {
        "mean_density": sum(densities) / len(densities) if densities else 0.0,
        "samples_with_flagged_time": sum(1 for r in records if r.get("flagged_times")),
    }
    return ExperimentReport(
        experiment="rigidity_scan",
        parameters=params,
        records=records,
        aggregates=aggregates,
        passed=None,
    )
