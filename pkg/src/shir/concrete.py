"""Concrete execution and the concrete/abstract bridge.

The interpreter runs programs with a seeded generator deciding nondet
branches, taking deep-copied heap snapshots at requested program points.
A snapshot keeps the objects reachable from the current frame's
variables and the statics, so it matches the scope the per-method
analysis sees.

The same module holds the ground-truth predicates (pointer sets,
injectivity, shape), the lift of a concrete heap into an isomorphic
abstract heap (one node per object) and its normalized form, and the
membership check that searches for an embedding of a concrete heap into
an abstract heap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Union

from . import ir
from .ir import ARRAY_LABEL, Method, Program, Statement
from .heap import AbstractHeap, AbstractNode, AddrEntry, Shape
from .normalform import normalize

# Concrete addresses: 0 is null, objects live at oid + 1.
NULL_ADDR = 0

# A program point: (method name, block label, statement index); the
# point is reached just before the indexed statement executes.
Point = tuple[str, str, int]


def format_point(point: Point) -> str:
    return f"{point[0]}:{point[1]}:{point[2]}"


def parse_point(text: str) -> Point:
    m, b, i = text.rsplit(":", 2)
    return (m, b, int(i))


# Pointer label instances: a field name or a concrete array index.
LabelInstance = Union[str, int]


@dataclass
class ConcreteObject:
    oid: int
    type_name: str
    # Field name -> address or int value; array index -> address.
    slots: dict[LabelInstance, int]

    def copy(self) -> "ConcreteObject":
        return ConcreteObject(self.oid, self.type_name, dict(self.slots))


@dataclass
class ConcreteHeap:
    program: Program
    env: dict[str, int]       # ref vars -> address, int vars -> value
    statics: dict[str, int]   # ref statics -> address
    objects: dict[int, ConcreteObject]
    method: str | None = None  # frame the env belongs to, when known

    def var_is_ref(self, name: str) -> bool:
        if self.method is not None:
            vt = self.program.methods[self.method].var_types()
            if name in vt:
                return vt[name].is_heap
        for m in self.program.methods.values():
            vt = m.var_types()
            if name in vt:
                return vt[name].is_heap
        return True  # hand-built heaps: treat unknown names as refs

    @property
    def store(self) -> dict[int, ConcreteObject | None]:
        out: dict[int, ConcreteObject | None] = {NULL_ADDR: None}
        for oid, obj in self.objects.items():
            out[oid + 1] = obj
        return out

    def object_at(self, addr: int) -> ConcreteObject | None:
        if addr == NULL_ADDR:
            return None
        return self.objects[addr - 1]

    def ref_roots(self) -> list[tuple[str, str, int | None]]:
        """(kind, name, target oid or None) for every reference root."""
        out: list[tuple[str, str, int | None]] = []
        for name in sorted(self.env):
            if self.var_is_ref(name):
                addr = self.env[name]
                out.append(("var", name, None if addr == NULL_ADDR else addr - 1))
        for name in sorted(self.statics):
            addr = self.statics[name]
            out.append(("static", name, None if addr == NULL_ADDR else addr - 1))
        return out

    def heap_slot_items(self, obj: ConcreteObject):
        """(label instance, target oid or None) pairs for the heap-typed
        slots of one object; int slots are skipped."""
        if self.program.is_array_type(obj.type_name):
            for i in sorted(k for k in obj.slots if isinstance(k, int)):
                addr = obj.slots[i]
                yield i, (None if addr == NULL_ADDR else addr - 1)
            return
        for name, ft in self.program.all_fields(obj.type_name):
            if not ft.is_heap:
                continue
            addr = obj.slots[name]
            yield name, (None if addr == NULL_ADDR else addr - 1)


@dataclass(frozen=True)
class Snapshot:
    point: Point
    heap: ConcreteHeap


@dataclass(frozen=True)
class RuntimeFault:
    kind: str  # "null-deref" | "out-of-bounds" | "budget-exhausted"
    point: Point

    def __str__(self) -> str:
        return f"{self.kind} at {format_point(self.point)}"


@dataclass
class InterpretResult:
    snapshots: list[Snapshot]
    fault: RuntimeFault | None = None
    steps: int = 0

    @property
    def ok(self) -> bool:
        return self.fault is None


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------


@dataclass
class _Frame:
    method: Method
    env: dict[str, int]
    block: str
    idx: int
    ret_var: str | None = None  # caller variable awaiting our return


class _Halt(Exception):
    def __init__(self, fault: RuntimeFault | None):
        self.fault = fault


def interpret(
    program: Program,
    seed: int,
    step_budget: int,
    snapshot_points: Iterable[Point] = (),
) -> InterpretResult:
    """Run main to completion or budget exhaustion.

    Deterministic for a fixed seed.  Snapshots are taken whenever
    control reaches a listed point, before the statement at that point
    executes; on a fault the snapshots collected so far are returned.
    """
    if step_budget <= 0:
        raise ValueError("step_budget must be positive")
    points = set(snapshot_points)
    rng = random.Random(seed)
    objects: dict[int, ConcreteObject] = {}
    statics: dict[str, int] = {
        name: NULL_ADDR for name, ft in program.statics.items() if ft.is_heap
    }
    next_oid = 0
    snapshots: list[Snapshot] = []
    result = InterpretResult(snapshots)

    def new_frame(method: Method, args: dict[str, int]) -> _Frame:
        env = {name: 0 for name, _ in (*method.params, *method.locals)}
        env.update(args)
        return _Frame(method, env, method.entry, 0)

    frames: list[_Frame] = [new_frame(program.methods[program.main], {})]

    def take_snapshot(frame: _Frame) -> None:
        point = (frame.method.name, frame.block, frame.idx)
        if point not in points:
            return
        reach: set[int] = set()
        work: list[int] = []
        vt = frame.method.var_types()
        for name, addr in frame.env.items():
            if vt[name].is_heap and addr != NULL_ADDR:
                work.append(addr - 1)
        for addr in statics.values():
            if addr != NULL_ADDR:
                work.append(addr - 1)
        while work:
            oid = work.pop()
            if oid in reach:
                continue
            reach.add(oid)
            obj = objects[oid]
            if program.is_array_type(obj.type_name):
                for k, a in obj.slots.items():
                    if isinstance(k, int) and a != NULL_ADDR:
                        work.append(a - 1)
            else:
                for fname, ft in program.all_fields(obj.type_name):
                    if ft.is_heap and obj.slots[fname] != NULL_ADDR:
                        work.append(obj.slots[fname] - 1)
        heap = ConcreteHeap(
            program,
            env=dict(frame.env),
            statics=dict(statics),
            objects={oid: objects[oid].copy() for oid in sorted(reach)},
            method=frame.method.name,
        )
        snapshots.append(Snapshot(point, heap))

    def alloc(type_name: str, slots: dict[LabelInstance, int]) -> int:
        nonlocal next_oid
        obj = ConcreteObject(next_oid, type_name, slots)
        objects[next_oid] = obj
        next_oid += 1
        return obj.oid + 1  # address

    steps = 0
    try:
        while frames:
            frame = frames[-1]
            block = frame.method.block(frame.block)
            take_snapshot(frame)
            point = (frame.method.name, frame.block, frame.idx)
            if steps >= step_budget:
                raise _Halt(RuntimeFault("budget-exhausted", point))
            steps += 1
            stmt: Statement = block.stmts[frame.idx]
            env = frame.env

            def deref(var: str) -> ConcreteObject:
                addr = env[var]
                if addr == NULL_ADDR:
                    raise _Halt(RuntimeFault("null-deref", point))
                return objects[addr - 1]

            def index_value(index: ir.Index) -> int:
                return index if isinstance(index, int) else env[index]

            advance = True
            if isinstance(stmt, ir.Alloc):
                slots: dict[LabelInstance, int] = {
                    fname: 0 for fname, _ in program.all_fields(stmt.type_name)
                }
                env[stmt.v] = alloc(stmt.type_name, slots)
            elif isinstance(stmt, ir.AllocArray):
                env[stmt.v] = alloc(f"{stmt.elem}[]", {})
            elif isinstance(stmt, ir.Copy):
                env[stmt.v] = env[stmt.src]
            elif isinstance(stmt, ir.SetNull):
                env[stmt.v] = NULL_ADDR
            elif isinstance(stmt, ir.LoadField):
                env[stmt.v] = deref(stmt.obj).slots[stmt.fld]
            elif isinstance(stmt, ir.StoreField):
                deref(stmt.obj).slots[stmt.fld] = env[stmt.src]
            elif isinstance(stmt, ir.LoadIndex):
                obj = deref(stmt.arr)
                i = index_value(stmt.index)
                if i < 0 or i not in obj.slots:
                    raise _Halt(RuntimeFault("out-of-bounds", point))
                env[stmt.v] = obj.slots[i]
            elif isinstance(stmt, ir.StoreIndex):
                obj = deref(stmt.arr)
                i = index_value(stmt.index)
                if i < 0:
                    raise _Halt(RuntimeFault("out-of-bounds", point))
                for j in range(len(obj.slots), i):
                    obj.slots[j] = NULL_ADDR
                obj.slots[i] = env[stmt.src]
            elif isinstance(stmt, ir.ConstInt):
                env[stmt.v] = stmt.value
            elif isinstance(stmt, ir.AddInt):
                env[stmt.v] = env[stmt.a] + env[stmt.b]
            elif isinstance(stmt, ir.ReadStatic):
                env[stmt.v] = statics[stmt.static]
            elif isinstance(stmt, ir.WriteStatic):
                statics[stmt.static] = env[stmt.v]
            elif isinstance(stmt, ir.Call):
                callee = program.methods[stmt.method]
                args = {
                    pname: env[a]
                    for (pname, _), a in zip(callee.params, stmt.args)
                }
                frame.ret_var = stmt.v
                frame.idx += 1
                frames.append(new_frame(callee, args))
                advance = False
            elif isinstance(stmt, ir.Return):
                value = env[stmt.v]
                frames.pop()
                if frames:
                    caller = frames[-1]
                    assert caller.ret_var is not None
                    caller.env[caller.ret_var] = value
                    caller.ret_var = None
                advance = False
            elif isinstance(stmt, ir.Goto):
                frame.block, frame.idx = stmt.target, 0
                advance = False
            elif isinstance(stmt, ir.IfNondet):
                taken = stmt.then_target if rng.getrandbits(1) else stmt.else_target
                frame.block, frame.idx = taken, 0
                advance = False
            elif isinstance(stmt, ir.IfNull):
                taken = stmt.then_target if env[stmt.v] == NULL_ADDR else stmt.else_target
                frame.block, frame.idx = taken, 0
                advance = False
            else:
                raise TypeError(f"unknown statement {stmt!r}")
            if advance:
                frame.idx += 1
    except _Halt as h:
        result.fault = h.fault
    result.steps = steps
    return result


# ---------------------------------------------------------------------------
# Ground-truth predicates
# ---------------------------------------------------------------------------

Pointer = tuple[int, LabelInstance, int]  # (source oid, label instance, target oid)


def pointers_between(
    c1: Iterable[int], c2: Iterable[int], heap: ConcreteHeap
) -> frozenset[Pointer]:
    """Non-null pointers crossing from region c1 into region c2."""
    dst = set(c2)
    out: set[Pointer] = set()
    for oid in c1:
        obj = heap.objects[oid]
        for label, tgt in heap.heap_slot_items(obj):
            if tgt is not None and tgt in dst:
                out.add((oid, label, tgt))
    return frozenset(out)


def check_injective(
    c1: Iterable[int], c2: Iterable[int], label: str, heap: ConcreteHeap
) -> bool:
    """Distinct sources reaching via `label` hit distinct targets."""
    seen: dict[int, int] = {}
    for src, l, tgt in pointers_between(c1, c2, heap):
        if l != label:
            continue
        if tgt in seen and seen[tgt] != src:
            return False
        seen[tgt] = src
    return True


def check_array_injective(
    c1: Iterable[int], c2: Iterable[int], heap: ConcreteHeap
) -> bool:
    """Distinct array indices hit distinct targets."""
    seen: dict[int, LabelInstance] = {}
    for _, l, tgt in pointers_between(c1, c2, heap):
        if not isinstance(l, int):
            continue
        if tgt in seen and seen[tgt] != l:
            return False
        seen[tgt] = l
    return True


def _is_forest(c: frozenset[int], pointers: Iterable[Pointer]) -> bool:
    indeg = {oid: 0 for oid in c}
    succs: dict[int, list[int]] = {oid: [] for oid in c}
    for src, _, tgt in pointers:
        indeg[tgt] += 1
        succs[src].append(tgt)
    if any(d > 1 for d in indeg.values()):
        return False
    queue = [o for o in c if indeg[o] == 0]
    visited = 0
    while queue:
        o = queue.pop()
        visited += 1
        for t in succs[o]:
            indeg[t] -= 1
            if indeg[t] == 0:
                queue.append(t)
    return visited == len(c)


def shape_of(c: Iterable[int], heap: ConcreteHeap) -> Shape:
    """Shape of a region's internal pointer graph."""
    region = frozenset(c)
    internal = pointers_between(region, region, heap)
    if not internal:
        return Shape.NONE
    if _is_forest(region, internal):
        return Shape.TREE
    return Shape.ANY


def shape_holds(claim: Shape, c: frozenset[int], heap: ConcreteHeap) -> bool:
    """Does the region satisfy the predicate named by the shape tag?
    The predicates nest: every region satisfies ANY, and NONE-regions
    vacuously satisfy TREE."""
    if claim == Shape.ANY:
        return True
    internal = pointers_between(c, c, heap)
    if claim == Shape.NONE:
        return not internal
    return _is_forest(c, internal)


# ---------------------------------------------------------------------------
# Abstraction (lift) and membership (embedding search)
# ---------------------------------------------------------------------------


def iso_lift(heap: ConcreteHeap) -> tuple[AbstractHeap, dict[int, int]]:
    """Lift a concrete heap to an isomorphic abstract heap.

    One node per object; class fields become singleton injective
    addresses; array slots collapse onto the smashed index label whose
    injectivity is the object's own array-injectivity.  A node's shape
    is its singleton region's true shape: NONE unless the object points
    at itself (summarization accounts for self edges through the node's
    own shape tag, so a self-pointing object must not claim NONE).
    Also returns the oid -> nid mapping.
    """
    program = heap.program
    out = AbstractHeap(program)
    oid_to_nid: dict[int, int] = {}
    for oid in sorted(heap.objects):
        obj = heap.objects[oid]
        nid = out.next_nid
        out.next_nid += 1
        shape = shape_of([oid], heap)
        out.nodes[nid] = AbstractNode(nid, frozenset({obj.type_name}), shape, {})
        oid_to_nid[oid] = nid
    for oid in sorted(heap.objects):
        obj = heap.objects[oid]
        node = out.nodes[oid_to_nid[oid]]
        if program.is_array_type(obj.type_name):
            elems = [t for _, t in heap.heap_slot_items(obj) if t is not None]
            targets = frozenset(oid_to_nid[t] for t in elems)
            inj = check_array_injective([oid], elems, heap)
            node.fields[ARRAY_LABEL] = out.fresh_addr(AddrEntry(inj, targets))
        else:
            for label, tgt in heap.heap_slot_items(obj):
                targets = frozenset() if tgt is None else frozenset({oid_to_nid[tgt]})
                node.fields[label] = out.fresh_addr(AddrEntry(True, targets))
    for kind, name, tgt in heap.ref_roots():
        targets = () if tgt is None else (oid_to_nid[tgt],)
        if kind == "var":
            out.bind_var(name, targets)
        else:
            out.bind_static(name, targets)
    return out, oid_to_nid


def abstract_lift(heap: ConcreteHeap) -> AbstractHeap:
    """The abstraction function: normalized isomorphic lift."""
    lifted, _ = iso_lift(heap)
    return normalize(lifted)


@dataclass(frozen=True)
class EmbeddingWitness:
    mu: dict[int, int]  # oid -> nid


@dataclass
class GammaResult:
    witness: EmbeddingWitness | None
    reason: str | None = None  # "Embed" | "Typing" | "Injective" | "Shape"
    exhausted: bool = False

    @property
    def ok(self) -> bool:
        return self.witness is not None


DEFAULT_GAMMA_BUDGET = 500_000


class _Budget(Exception):
    pass


def gamma_member(
    heap: ConcreteHeap, abs_heap: AbstractHeap, budget: int = DEFAULT_GAMMA_BUDGET
) -> GammaResult:
    """Search for an embedding of the concrete heap into the abstract one.

    The witness must embed every root and pointer, type every object,
    and satisfy every injectivity and shape claim.  A backtracking
    search assigns objects to type-compatible nodes in a root-first
    order; when the assignment budget is exceeded the result is
    inconclusive (exhausted) rather than a definite failure.
    """
    # Root constraints; a non-null root missing from the abstract side
    # is a definite embedding failure.
    constraints: dict[int, set[int]] = {}
    for kind, name, tgt in heap.ref_roots():
        if tgt is None:
            continue
        root_map = abs_heap.env if kind == "var" else abs_heap.statics
        if name not in root_map:
            return GammaResult(None, reason="Embed")
        allowed = set(abs_heap.store[root_map[name]].targets)
        constraints[tgt] = constraints.get(tgt, set(abs_heap.nodes)) & allowed

    by_type: dict[str, list[int]] = {}
    for nid in sorted(abs_heap.nodes):
        for t in abs_heap.nodes[nid].types:
            by_type.setdefault(t, []).append(nid)
    for oid in heap.objects:
        if heap.objects[oid].type_name not in by_type:
            return GammaResult(None, reason="Typing")

    # Deterministic search order: BFS from roots, then leftovers.
    order: list[int] = []
    seen: set[int] = set()
    queue: list[int] = [t for _, _, t in heap.ref_roots() if t is not None]
    while queue:
        oid = queue.pop(0)
        if oid in seen:
            continue
        seen.add(oid)
        order.append(oid)
        for _, tgt in heap.heap_slot_items(heap.objects[oid]):
            if tgt is not None and tgt not in seen:
                queue.append(tgt)
    for oid in sorted(heap.objects):
        if oid not in seen:
            order.append(oid)

    # Pointer lists keyed by endpoint for incremental embedding checks.
    out_ptrs: dict[int, list[tuple[LabelInstance, int]]] = {o: [] for o in heap.objects}
    in_ptrs: dict[int, list[tuple[int, LabelInstance]]] = {o: [] for o in heap.objects}
    for oid, obj in heap.objects.items():
        for label, tgt in heap.heap_slot_items(obj):
            if tgt is not None:
                out_ptrs[oid].append((label, tgt))
                in_ptrs[tgt].append((oid, label))

    def abs_label(l: LabelInstance) -> str:
        return ARRAY_LABEL if isinstance(l, int) else l

    mu: dict[int, int] = {}
    state = {"attempts": 0, "complete": False, "shape_only": False}

    def targets_of(nid: int, l: LabelInstance) -> frozenset[int] | None:
        entry = abs_heap.entry_of(nid, abs_label(l))
        return None if entry is None else entry.targets

    def consistent(oid: int, nid: int) -> bool:
        for label, tgt in out_ptrs[oid]:
            if tgt in mu:
                ts = targets_of(nid, label)
                if ts is None or mu[tgt] not in ts:
                    return False
        for src, label in in_ptrs[oid]:
            if src in mu:
                ts = targets_of(mu[src], label)
                if ts is None or nid not in ts:
                    return False
        return True

    def check_properties() -> str | None:
        regions: dict[int, set[int]] = {}
        for oid, nid in mu.items():
            regions.setdefault(nid, set()).add(oid)
        for nid, node in abs_heap.nodes.items():
            region = regions.get(nid, set())
            if not region:
                continue
            for label in node.fields:
                entry = abs_heap.store[node.fields[label]]
                if not entry.injective:
                    continue
                # Key each target object by its source (fields) or index
                # (arrays): the same target reached under two different
                # keys breaks the claim.
                per_target: dict[int, LabelInstance] = {}
                for oid in region:
                    for l, tgt in out_ptrs[oid]:
                        if abs_label(l) != label:
                            continue
                        key = l if label == ARRAY_LABEL else oid
                        if tgt in per_target and per_target[tgt] != key:
                            return "Injective"
                        per_target[tgt] = key
        for nid, node in abs_heap.nodes.items():
            region = frozenset(regions.get(nid, set()))
            if region and not shape_holds(node.shape, region, heap):
                return "Shape"
        return None

    def search(pos: int) -> EmbeddingWitness | None:
        if pos == len(order):
            state["complete"] = True
            failure = check_properties()
            if failure is None:
                return EmbeddingWitness(dict(mu))
            if failure == "Shape":
                state["shape_only"] = True
            return None
        oid = order[pos]
        allowed = constraints.get(oid)
        for nid in by_type.get(heap.objects[oid].type_name, []):
            if allowed is not None and nid not in allowed:
                continue
            state["attempts"] += 1
            if state["attempts"] > budget:
                raise _Budget()
            if not consistent(oid, nid):
                continue
            mu[oid] = nid
            found = search(pos + 1)
            if found is not None:
                return found
            del mu[oid]
        return None

    try:
        witness = search(0)
    except _Budget:
        return GammaResult(None, exhausted=True)
    if witness is not None:
        return GammaResult(witness)
    if not state["complete"]:
        return GammaResult(None, reason="Embed")
    if state["shape_only"]:
        return GammaResult(None, reason="Shape")
    return GammaResult(None, reason="Injective")


# ---------------------------------------------------------------------------
# Snapshot dumps
# ---------------------------------------------------------------------------


def heap_text(heap: ConcreteHeap) -> str:
    """Deterministic dump: env and static lines first, then one object
    per line with its heap slots (int slots are interpreter plumbing and
    are omitted)."""
    lines: list[str] = []
    for kind, name, tgt in heap.ref_roots():
        lines.append(f"{kind} {name}={'null' if tgt is None else tgt}")
    for oid in sorted(heap.objects):
        obj = heap.objects[oid]
        parts = [
            f"{label}={'null' if tgt is None else tgt}"
            for label, tgt in heap.heap_slot_items(obj)
        ]
        lines.append(f"{oid}:{obj.type_name} {{{','.join(parts)}}}")
    return "\n".join(lines) + "\n"


def snapshot_text(snapshot: Snapshot) -> str:
    return f"point {format_point(snapshot.point)}\n{heap_text(snapshot.heap)}"
