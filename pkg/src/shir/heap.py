"""Abstract heap graphs.

An abstract heap is a storage shape graph: nodes summarize disjoint
regions of concrete objects, and the abstract store maps per-node,
per-label addresses to (injectivity, target node set) entries.  Variables
and static fields are roots with their own single-pointer addresses.

Heaps are values: the exported operations never mutate their argument,
they clone first.  Node and address identifiers come from per-heap
counters, so strong updates of a root are expressed by rebinding the root
to a fresh address.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Iterator

from .ir import ARRAY_LABEL, Program, field_labels


class Shape(IntEnum):
    """Region shape lattice, totally ordered: NONE < TREE < ANY.

    NONE: the region has no internal pointers.  TREE: the internal
    pointer graph is a forest (acyclic, at most one internal parent per
    object, no cross edges).  ANY: unrestricted.
    """

    NONE = 0
    TREE = 1
    ANY = 2

    def __str__(self) -> str:
        return self.name.lower()


def shape_join(a: Shape, b: Shape) -> Shape:
    """Least upper bound in the shape lattice."""
    return Shape(max(a, b))


@dataclass(frozen=True)
class AddrEntry:
    """Contents of one abstract address: may this pointer set alias
    (injective=False), and which nodes may it reach."""

    injective: bool
    targets: frozenset[int]

    def __str__(self) -> str:
        flag = "inj" if self.injective else "!inj"
        tg = ",".join(f"n{t}" for t in sorted(self.targets))
        return f"{flag} {{{tg}}}"


EMPTY_ENTRY = AddrEntry(True, frozenset())


@dataclass
class AbstractNode:
    """One summary node: the set of types its region may contain, the
    region's shape tag, and one address per abstract label of the types."""

    nid: int
    types: frozenset[str]
    shape: Shape
    fields: dict[str, int]  # label -> address id

    def copy(self) -> "AbstractNode":
        return AbstractNode(self.nid, self.types, self.shape, dict(self.fields))


# Predecessor records: ("var", name, None), ("static", name, None), or
# ("node", source nid, label).
Pred = tuple[str, object, object]


class AbstractHeap:
    """Roots (env + statics), abstract store, and nodes for one program."""

    __slots__ = ("program", "env", "statics", "store", "nodes",
                 "next_nid", "next_addr", "normal")

    def __init__(self, program: Program):
        self.program = program
        self.env: dict[str, int] = {}
        self.statics: dict[str, int] = {}
        self.store: dict[int, AddrEntry] = {}
        self.nodes: dict[int, AbstractNode] = {}
        self.next_nid = 0
        self.next_addr = 0
        # Set only by normalize(); cleared by any cloning operation.
        self.normal = False

    # -- construction helpers (mutating; used by transfer/normalize) -------

    def clone(self) -> "AbstractHeap":
        h = AbstractHeap(self.program)
        h.env = dict(self.env)
        h.statics = dict(self.statics)
        h.store = dict(self.store)
        h.nodes = {nid: n.copy() for nid, n in self.nodes.items()}
        h.next_nid = self.next_nid
        h.next_addr = self.next_addr
        return h

    def fresh_addr(self, entry: AddrEntry = EMPTY_ENTRY) -> int:
        a = self.next_addr
        self.next_addr += 1
        self.store[a] = entry
        return a

    def add_fresh_node(self, types: Iterable[str], shape: Shape) -> int:
        tys = frozenset(types)
        if not tys:
            raise ValueError("a node needs at least one type")
        nid = self.next_nid
        self.next_nid += 1
        fields = {l: self.fresh_addr() for l in sorted(field_labels(tys, self.program))}
        self.nodes[nid] = AbstractNode(nid, tys, shape, fields)
        return nid

    def bind_var(self, name: str, targets: Iterable[int]) -> None:
        """Strong update of a variable root: fresh address, injective."""
        self.env[name] = self.fresh_addr(AddrEntry(True, frozenset(targets)))

    def bind_static(self, name: str, targets: Iterable[int]) -> None:
        self.statics[name] = self.fresh_addr(AddrEntry(True, frozenset(targets)))

    def var_targets(self, name: str) -> frozenset[int]:
        return self.store[self.env[name]].targets

    def static_targets(self, name: str) -> frozenset[int]:
        return self.store[self.statics[name]].targets

    def entry_of(self, nid: int, label: str) -> AddrEntry | None:
        addr = self.nodes[nid].fields.get(label)
        return None if addr is None else self.store[addr]

    def root_items(self) -> Iterator[tuple[str, str, int]]:
        """All roots as (kind, name, address), variables first."""
        for v in sorted(self.env):
            yield ("var", v, self.env[v])
        for s in sorted(self.statics):
            yield ("static", s, self.statics[s])

    def edge_items(self) -> Iterator[tuple[int, str, int]]:
        """All node-to-node edges as (source nid, label, target nid)."""
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            for label in sorted(node.fields):
                for t in sorted(self.store[node.fields[label]].targets):
                    yield (nid, label, t)


# ---------------------------------------------------------------------------
# Exported operations (value semantics)
# ---------------------------------------------------------------------------


def empty_heap(program: Program) -> AbstractHeap:
    return AbstractHeap(program)


def fresh_node(heap: AbstractHeap, types: Iterable[str], shape: Shape) -> tuple[AbstractHeap, int]:
    """New heap with one fresh node whose labels all map to (true, {})."""
    h = heap.clone()
    nid = h.add_fresh_node(types, shape)
    return h, nid


def reachable_nodes(heap: AbstractHeap) -> frozenset[int]:
    """Least set of nodes containing all root targets and closed under
    following store entries of member nodes."""
    seen: set[int] = set()
    work: list[int] = []
    for _, _, addr in heap.root_items():
        for t in sorted(heap.store[addr].targets):
            if t not in seen:
                seen.add(t)
                work.append(t)
    while work:
        nid = work.pop()
        for addr in heap.nodes[nid].fields.values():
            for t in heap.store[addr].targets:
                if t not in seen:
                    seen.add(t)
                    work.append(t)
    return frozenset(seen)


def predecessors(heap: AbstractHeap, nid: int) -> frozenset[Pred]:
    """Roots and (node, label) pairs whose entries target the node."""
    if nid not in heap.nodes:
        raise KeyError(nid)
    preds: set[Pred] = set()
    for kind, name, addr in heap.root_items():
        if nid in heap.store[addr].targets:
            preds.add((kind, name, None))
    for src, label, tgt in heap.edge_items():
        if tgt == nid:
            preds.add(("node", src, label))
    return frozenset(preds)


def gc_unreachable(heap: AbstractHeap) -> AbstractHeap:
    """Drop nodes not reachable from any root, and drop store addresses
    no longer referenced by a root or a surviving node."""
    keep = reachable_nodes(heap)
    h = heap.clone()
    h.nodes = {nid: n for nid, n in h.nodes.items() if nid in keep}
    live_addrs = set(h.env.values()) | set(h.statics.values())
    for n in h.nodes.values():
        live_addrs.update(n.fields.values())
    h.store = {a: e for a, e in h.store.items() if a in live_addrs}
    # Root entries may mention dropped nodes only if those were
    # unreachable, which cannot happen: root targets are reachable by
    # definition.  Node entries always target reachable nodes likewise.
    return h


def well_formedness_errors(heap: AbstractHeap) -> list[str]:
    """Invariant checks; empty list when the heap is well formed."""
    errs: list[str] = []
    for kind, name, addr in heap.root_items():
        if addr not in heap.store:
            errs.append(f"{kind} {name}: dangling address {addr}")
            continue
        if not heap.store[addr].injective:
            errs.append(f"{kind} {name}: root address must be injective")
        for t in heap.store[addr].targets:
            if t not in heap.nodes:
                errs.append(f"{kind} {name}: target {t} not a node")
    seen_addrs: dict[int, int] = {}
    for nid, node in heap.nodes.items():
        if node.nid != nid:
            errs.append(f"node {nid}: inconsistent nid {node.nid}")
        want = field_labels(node.types, heap.program)
        if set(node.fields) != set(want):
            errs.append(f"node {nid}: labels {sorted(node.fields)} != {sorted(want)}")
        for label, addr in node.fields.items():
            if addr in seen_addrs:
                errs.append(f"node {nid}: address {addr} shared with node {seen_addrs[addr]}")
            seen_addrs[addr] = nid
            if addr not in heap.store:
                errs.append(f"node {nid}.{label}: dangling address {addr}")
                continue
            for t in heap.store[addr].targets:
                if t not in heap.nodes:
                    errs.append(f"node {nid}.{label}: target {t} not a node")
    return errs


def assert_well_formed(heap: AbstractHeap) -> None:
    errs = well_formedness_errors(heap)
    if errs:
        raise AssertionError("; ".join(errs))


# ---------------------------------------------------------------------------
# Deterministic renderings
# ---------------------------------------------------------------------------


def _canonical_order(heap: AbstractHeap) -> list[int]:
    """Root-driven BFS numbering.  Within one address, targets are
    explored in (sorted type tuple, nid) order so the numbering depends
    on the graph, not on identifier history.  Unreachable nodes follow
    in nid order."""
    order: list[int] = []
    seen: set[int] = set()
    queue: list[int] = []

    def type_key(nid: int) -> tuple:
        return (tuple(sorted(heap.nodes[nid].types)), nid)

    for _, _, addr in heap.root_items():
        for t in sorted(heap.store[addr].targets, key=type_key):
            if t not in seen:
                seen.add(t)
                queue.append(t)
    while queue:
        nid = queue.pop(0)
        order.append(nid)
        node = heap.nodes[nid]
        for label in sorted(node.fields):
            for t in sorted(heap.store[node.fields[label]].targets, key=type_key):
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
    for nid in sorted(heap.nodes):
        if nid not in seen:
            order.append(nid)
    return order


def canonical_text(heap: AbstractHeap) -> str:
    """Stable text form used by golden tests and CLI dumps."""
    order = _canonical_order(heap)
    index = {nid: i for i, nid in enumerate(order)}
    lines: list[str] = ["heap {"]

    def render_entry(entry: AddrEntry) -> str:
        flag = "inj" if entry.injective else "!inj"
        tg = ",".join(f"n{index[t]}" for t in sorted(entry.targets, key=index.get))
        return f"{flag} {{{tg}}}"

    for kind, name, addr in heap.root_items():
        lines.append(f"  {kind} {name} = {render_entry(heap.store[addr])}")
    for nid in order:
        node = heap.nodes[nid]
        tys = ",".join(sorted(node.types))
        lines.append(f"  node n{index[nid]} {{{tys}}} {node.shape}")
        for label in sorted(node.fields):
            lines.append(f"    {label} = {render_entry(heap.store[node.fields[label]])}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_dot(heap: AbstractHeap) -> str:
    """Graphviz rendering.  Non-injective entries are drawn wide and
    orange; node labels carry the canonical id, type set, and shape."""
    order = _canonical_order(heap)
    index = {nid: i for i, nid in enumerate(order)}
    lines = ["digraph heap {", "  rankdir=LR;"]
    for kind, name, _ in heap.root_items():
        root_id = f"{kind}_{name}"
        lines.append(f'  {root_id} [shape=box,label="{name}"];')
    for nid in order:
        node = heap.nodes[nid]
        tys = ",".join(sorted(node.types))
        lines.append(f'  n{index[nid]} [label="${index[nid]}: {{{tys}}} {node.shape}"];')

    def edge_attrs(label: str, entry: AddrEntry) -> str:
        attrs = f'label="{label}"'
        if not entry.injective:
            attrs += ",penwidth=3,color=orange"
        return attrs

    for kind, name, addr in heap.root_items():
        entry = heap.store[addr]
        for t in sorted(entry.targets, key=index.get):
            lines.append(f'  {kind}_{name} -> n{index[t]} [{edge_attrs("", entry)}];')
    for nid in order:
        node = heap.nodes[nid]
        for label in sorted(node.fields):
            entry = heap.store[node.fields[label]]
            for t in sorted(entry.targets, key=index.get):
                lines.append(f'  n{index[nid]} -> n{index[t]} [{edge_attrs(label, entry)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
