"""Precision scoring against abstracted runtime snapshots.

The baseline for a program point is the join of the abstractions of
every concrete heap observed there: by construction an
under-approximation of the ideal result expressible in the domain, and
in the limit of all executions the ideal itself.  The static result is
scored against it three ways: how many baseline regions the static heap
matches at all, and how many matched regions agree on the shape tag and
on per-label injectivity.  Separately, the baseline's own rates say how
much of the runtime behavior the domain can state precisely at all.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

from .concrete import ConcreteHeap, Point, abstract_lift, format_point, interpret
from .fixpoint import AnalysisConfig, AnalysisResult, analyze_program
from .heap import AbstractHeap, Shape
from .domain_ops import upper_approx
from .ir import Program


def runtime_baseline(heaps: list[ConcreteHeap]) -> AbstractHeap:
    """Join of the lifted snapshots, in list order."""
    if not heaps:
        raise ValueError("need at least one snapshot")
    out = abstract_lift(heaps[0])
    for h in heaps[1:]:
        out = upper_approx(out, abstract_lift(h))
    return out


# Pairing maps a baseline (runtime) node to the static node it matched.
Pairing = dict[int, int]


def match_regions(static_h: AbstractHeap, runtime_h: AbstractHeap) -> tuple[Pairing, float]:
    """Greedy root-driven pairing tolerating unmatched leftovers.

    Targets pair exactly like the equality isomorphism (unique
    type-intersecting candidate), but ambiguity or a missing candidate
    leaves a node unmatched instead of failing.  The match percentage is
    over the runtime heap's nodes.
    """
    pairing: Pairing = {}
    used: set[int] = set()
    queue: deque[tuple[int, int]] = deque()

    def try_pair(rt_targets, st_targets) -> None:
        for rt in sorted(rt_targets):
            cands = [
                st
                for st in sorted(st_targets)
                if runtime_h.nodes[rt].types & static_h.nodes[st].types
            ]
            if len(cands) != 1:
                continue
            st = cands[0]
            if rt in pairing:
                continue
            if st in used:
                continue
            pairing[rt] = st
            used.add(st)
            queue.append((rt, st))

    for name in sorted(set(runtime_h.env) & set(static_h.env)):
        try_pair(
            runtime_h.store[runtime_h.env[name]].targets,
            static_h.store[static_h.env[name]].targets,
        )
    for name in sorted(set(runtime_h.statics) & set(static_h.statics)):
        try_pair(
            runtime_h.store[runtime_h.statics[name]].targets,
            static_h.store[static_h.statics[name]].targets,
        )
    while queue:
        rt, st = queue.popleft()
        rt_node, st_node = runtime_h.nodes[rt], static_h.nodes[st]
        for label in sorted(set(rt_node.fields) & set(st_node.fields)):
            try_pair(
                runtime_h.store[rt_node.fields[label]].targets,
                static_h.store[st_node.fields[label]].targets,
            )

    if not runtime_h.nodes:
        return pairing, 100.0
    return pairing, 100.0 * len(pairing) / len(runtime_h.nodes)


def property_match_rates(
    pairing: Pairing, static_h: AbstractHeap, runtime_h: AbstractHeap
) -> tuple[float, float]:
    """Over paired nodes: % of equal shape tags; over paired nodes'
    shared labels: % of equal injectivity flags."""
    if not pairing:
        return 100.0, 100.0
    shape_hits = 0
    inj_hits = 0
    inj_total = 0
    for rt, st in pairing.items():
        rt_node, st_node = runtime_h.nodes[rt], static_h.nodes[st]
        if rt_node.shape == st_node.shape:
            shape_hits += 1
        for label in sorted(set(rt_node.fields) & set(st_node.fields)):
            inj_total += 1
            rt_inj = runtime_h.store[rt_node.fields[label]].injective
            st_inj = static_h.store[st_node.fields[label]].injective
            if rt_inj == st_inj:
                inj_hits += 1
    shape_pct = 100.0 * shape_hits / len(pairing)
    inj_pct = 100.0 if inj_total == 0 else 100.0 * inj_hits / inj_total
    return shape_pct, inj_pct


def runtime_precise_rates(heap: AbstractHeap) -> tuple[float, float]:
    """How much of the baseline the domain states precisely.

    Shape: % of nodes tagged NONE or TREE.  Injectivity: % of
    cross-region edges (one per address/target-class pair, self edges
    and root cells excluded) whose cell is injective — a self edge's
    sharing story is already told by the shape tag, and root cells are
    injective by construction and would only inflate the rate.
    """
    if not heap.nodes:
        return 100.0, 100.0
    precise_shapes = sum(
        1 for n in heap.nodes.values() if n.shape in (Shape.NONE, Shape.TREE)
    )
    shape_pct = 100.0 * precise_shapes / len(heap.nodes)
    edges = 0
    precise_edges = 0
    for nid in sorted(heap.nodes):
        node = heap.nodes[nid]
        for label in sorted(node.fields):
            entry = heap.store[node.fields[label]]
            for tgt in sorted(entry.targets):
                if tgt == nid:
                    continue
                edges += 1
                if entry.injective:
                    precise_edges += 1
    inj_pct = 100.0 if edges == 0 else 100.0 * precise_edges / edges
    return shape_pct, inj_pct


@dataclass(frozen=True)
class PointPrecision:
    point: Point
    samples: int
    region_match_pct: float
    shape_match_pct: float
    injectivity_match_pct: float
    runtime_shape_pct: float
    runtime_injectivity_pct: float

    def as_record(self) -> dict:
        return {
            "point": format_point(self.point),
            "samples": self.samples,
            "region_match_pct": round(self.region_match_pct, 3),
            "shape_match_pct": round(self.shape_match_pct, 3),
            "injectivity_match_pct": round(self.injectivity_match_pct, 3),
            "runtime_shape_pct": round(self.runtime_shape_pct, 3),
            "runtime_injectivity_pct": round(self.runtime_injectivity_pct, 3),
        }


_COLUMNS = (
    "region_match_pct",
    "shape_match_pct",
    "injectivity_match_pct",
    "runtime_shape_pct",
    "runtime_injectivity_pct",
)


@dataclass
class PrecisionReport:
    program: str
    points: list[PointPrecision]

    def _mean(self, attr: str) -> float:
        if not self.points:
            return 100.0
        return sum(getattr(p, attr) for p in self.points) / len(self.points)

    @property
    def region_match_pct(self) -> float:
        return self._mean("region_match_pct")

    @property
    def shape_match_pct(self) -> float:
        return self._mean("shape_match_pct")

    @property
    def injectivity_match_pct(self) -> float:
        return self._mean("injectivity_match_pct")

    @property
    def runtime_shape_pct(self) -> float:
        return self._mean("runtime_shape_pct")

    @property
    def runtime_injectivity_pct(self) -> float:
        return self._mean("runtime_injectivity_pct")

    def to_tsv(self) -> str:
        lines = ["point\tsamples\t" + "\t".join(_COLUMNS)]
        for p in self.points:
            rec = p.as_record()
            lines.append(
                f"{rec['point']}\t{rec['samples']}\t"
                + "\t".join(f"{rec[c]:.1f}" for c in _COLUMNS)
            )
        lines.append(
            f"average\t{len(self.points)}\t"
            + "\t".join(f"{self._mean(c):.1f}" for c in _COLUMNS)
        )
        return "\n".join(lines) + "\n"

    def to_json_lines(self) -> str:
        lines = [json.dumps(p.as_record(), sort_keys=True) for p in self.points]
        summary = {
            "point": "average",
            "samples": len(self.points),
            **{c: round(self._mean(c), 3) for c in _COLUMNS},
        }
        lines.append(json.dumps(summary, sort_keys=True))
        return "\n".join(lines) + "\n"


def compare_precision(
    program: Program,
    seeds: list[int],
    points: set[Point],
    step_budget: int = 100_000,
    config: AnalysisConfig | None = None,
    analysis: AnalysisResult | None = None,
    program_name: str = "",
) -> PrecisionReport:
    """Run the interpreter over the seeds, join the per-point baselines,
    and score the static result at every point that was both reached at
    runtime and covered by the analysis."""
    if analysis is None:
        analysis = analyze_program(program, config)
    by_point: dict[Point, list[ConcreteHeap]] = {}
    for seed in seeds:
        res = interpret(program, seed=seed, step_budget=step_budget, snapshot_points=points)
        for snap in res.snapshots:
            by_point.setdefault(snap.point, []).append(snap.heap)
    out: list[PointPrecision] = []
    for point in sorted(by_point):
        static_h = analysis.state_at(point)
        if static_h is None:
            continue
        baseline = runtime_baseline(by_point[point])
        pairing, region = match_regions(static_h, baseline)
        shape, inj = property_match_rates(pairing, static_h, baseline)
        rt_shape, rt_inj = runtime_precise_rates(baseline)
        out.append(
            PointPrecision(
                point=point,
                samples=len(by_point[point]),
                region_match_pct=region,
                shape_match_pct=shape,
                injectivity_match_pct=inj,
                runtime_shape_pct=rt_shape,
                runtime_injectivity_pct=rt_inj,
            )
        )
    return PrecisionReport(program=program_name, points=out)
