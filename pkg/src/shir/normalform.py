"""Normal form for abstract heaps.

Normalization prunes unreachable nodes, computes the congruence closure
of three relations over the remaining nodes, and replaces every closure
class with a summary node:

  * recursive structure: classes whose type unions contain mutually
    recursive types and that are connected by an edge;
  * equivalent successors: same-parent, same-label successor classes
    with intersecting type unions;
  * equivalent targets: classes targeted by one root, with intersecting
    type unions, when the root is a static field or both classes have
    only local-variable predecessors.

The closure runs as full sweeps to a fixpoint, so the result is the
coarsest partition: a sweep that merges nothing certifies that no pair
of classes is related by any of the three relations.  Each sweep is
O(N + E) up to union-find costs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import Program, RecursiveTypes, field_labels, recursive_types
from .heap import (
    AbstractHeap,
    AbstractNode,
    AddrEntry,
    Shape,
    gc_unreachable,
    reachable_nodes,
    shape_join,
)


class UnionFind:
    """Union-find with path compression and union by size."""

    def __init__(self, items) -> None:
        self.parent = {x: x for x in items}
        self.size = {x: 1 for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        """Merge the classes of a and b; returns (root, merged?)."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra, False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra, True


@dataclass(frozen=True)
class Partition:
    """Final congruence classes, ordered by smallest member node id."""

    classes: tuple[frozenset[int], ...]

    def index_of(self, nid: int) -> int:
        for i, c in enumerate(self.classes):
            if nid in c:
                return i
        raise KeyError(nid)

    def class_of(self, nid: int) -> frozenset[int]:
        return self.classes[self.index_of(nid)]

    def as_sets(self) -> frozenset[frozenset[int]]:
        return frozenset(self.classes)


# ---------------------------------------------------------------------------
# The three relations, exposed for direct testing on explicit classes
# ---------------------------------------------------------------------------


def class_types(members: frozenset[int], heap: AbstractHeap) -> frozenset[str]:
    out: set[str] = set()
    for nid in members:
        out.update(heap.nodes[nid].types)
    return frozenset(out)


def compatible(types1: frozenset[str], types2: frozenset[str]) -> bool:
    """Classes are compatible when their type unions intersect."""
    return bool(types1 & types2)


def _edge_between(src: frozenset[int], dst: frozenset[int], heap: AbstractHeap) -> bool:
    for nid in src:
        for addr in heap.nodes[nid].fields.values():
            if heap.store[addr].targets & dst:
                return True
    return False


def recursive_related(
    p1: frozenset[int],
    p2: frozenset[int],
    heap: AbstractHeap,
    rec: RecursiveTypes,
) -> bool:
    """Recursive-structure relation: a recursive type pair spans the two
    classes' type unions and an edge connects them (either direction;
    the congruence closure is symmetric)."""
    t1, t2 = class_types(p1, heap), class_types(p2, heap)
    if not (rec.group_indices(t1) & rec.group_indices(t2)):
        return False
    return _edge_between(p1, p2, heap) or _edge_between(p2, p1, heap)


def is_successor(
    succ: frozenset[int], parent: frozenset[int], label: str, heap: AbstractHeap
) -> bool:
    for nid in parent:
        addr = heap.nodes[nid].fields.get(label)
        if addr is not None and heap.store[addr].targets & succ:
            return True
    return False


def equivalent_successors(
    p1: frozenset[int],
    p2: frozenset[int],
    parent: frozenset[int],
    label1: str,
    label2: str,
    heap: AbstractHeap,
) -> bool:
    """Equivalent-successor relation for two successors of one parent
    class reached via label1/label2 respectively."""
    if label1 != label2:
        return False
    if not (is_successor(p1, parent, label1, heap) and is_successor(p2, parent, label2, heap)):
        return False
    return compatible(class_types(p1, heap), class_types(p2, heap))


def _has_external_node_pred(members: frozenset[int], heap: AbstractHeap) -> bool:
    """Does any node outside the class point into it?  A summarized
    structure's own internal edges (e.g. a recursive class's self edge)
    do not make it heap-referenced; treating them as predecessors would
    keep identical var-rooted structures from ever merging and the
    join chains at loop heads would grow without bound."""
    for src, _, tgt in heap.edge_items():
        if tgt in members and src not in members:
            return True
    return False


def _has_static_pred(members: frozenset[int], heap: AbstractHeap) -> bool:
    for addr in heap.statics.values():
        if heap.store[addr].targets & members:
            return True
    return False


def equivalent_targets(
    p1: frozenset[int],
    p2: frozenset[int],
    root_kind: str,
    root_name: str,
    heap: AbstractHeap,
) -> bool:
    """Equivalent-target relation for two classes targeted by one root.

    For a variable root the merge additionally requires both classes to
    have only local-variable predecessors: no static field and no node
    outside the class may point into either one."""
    addr = heap.statics[root_name] if root_kind == "static" else heap.env[root_name]
    targets = heap.store[addr].targets
    if not (targets & p1 and targets & p2):
        return False
    if not compatible(class_types(p1, heap), class_types(p2, heap)):
        return False
    if root_kind == "static":
        return True
    for p in (p1, p2):
        if _has_external_node_pred(p, heap) or _has_static_pred(p, heap):
            return False
    return True


# ---------------------------------------------------------------------------
# Congruence closure
# ---------------------------------------------------------------------------


def congruence_closure(heap: AbstractHeap, rec: RecursiveTypes) -> Partition:
    """Coarsest partition closed under the three relations.

    Runs whole-heap sweeps until a sweep performs no merge.  Per-class
    type unions, recursive-group hits, and predecessor flags are
    maintained under union so each sweep stays linear in nodes + edges.
    """
    nids = sorted(heap.nodes)
    uf = UnionFind(nids)
    types: dict[int, set[str]] = {n: set(heap.nodes[n].types) for n in nids}
    recgroups: dict[int, frozenset[int]] = {
        n: rec.group_indices(heap.nodes[n].types) for n in nids
    }
    edges: list[tuple[int, str, int]] = []
    for src in nids:
        node = heap.nodes[src]
        for label in sorted(node.fields):
            for tgt in sorted(heap.store[node.fields[label]].targets):
                edges.append((src, label, tgt))

    def union(a: int, b: int) -> bool:
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            return False
        root, _ = uf.union(ra, rb)
        other = rb if root == ra else ra
        types[root] |= types[other]
        recgroups[root] = recgroups[root] | recgroups[other]
        return True

    while True:
        merged = False

        # Recursive structure: a recursive type pair across an edge.
        for src, _, tgt in edges:
            a, b = uf.find(src), uf.find(tgt)
            if a != b and (recgroups[a] & recgroups[b]):
                merged |= union(a, b)

        # Equivalent successors: same parent class, same label,
        # type-compatible target classes.  A shared type indexes the
        # first class seen so compatibility checks stay linear.
        buckets: dict[tuple[int, str, str], int] = {}
        for src, label, tgt in edges:
            parent = uf.find(src)
            t = uf.find(tgt)
            for ty in sorted(types[t]):
                key = (parent, label, ty)
                prev = buckets.get(key)
                if prev is None:
                    buckets[key] = t
                else:
                    prev = uf.find(prev)
                    t = uf.find(t)
                    buckets[key] = prev
                    if prev != t:
                        merged |= union(prev, t)

        # Equivalent targets: classes sharing a root.  The closure merges
        # every compatible pair under one root, variable roots included:
        # equality matching and join convergence need each root's final
        # targets to have pairwise-disjoint type sets, and a guard that
        # could leave two same-typed targets under a root would break
        # both (even self-equality).
        for kind, name, addr in heap.root_items():
            tclasses: list[int] = []
            for tgt in sorted(heap.store[addr].targets):
                r = uf.find(tgt)
                if r not in tclasses:
                    tclasses.append(r)
            if len(tclasses) < 2:
                continue
            seen_ty: dict[str, int] = {}
            for r in tclasses:
                r = uf.find(r)
                for ty in sorted(types[r]):
                    prev = seen_ty.get(ty)
                    if prev is None:
                        seen_ty[ty] = r
                    else:
                        prev = uf.find(prev)
                        r2 = uf.find(r)
                        if prev != r2:
                            merged |= union(prev, r2)

        if not merged:
            break

    groups: dict[int, set[int]] = {}
    for n in nids:
        groups.setdefault(uf.find(n), set()).add(n)
    classes = sorted((frozenset(g) for g in groups.values()), key=min)
    return Partition(tuple(classes))


# ---------------------------------------------------------------------------
# Summary construction
# ---------------------------------------------------------------------------


def structural_shape(members: frozenset[int], heap: AbstractHeap) -> Shape:
    """Shape induced by the internal edges of one class.

    Self edges (a node targeting itself) are excluded: the node's own
    shape tag already accounts for its region's internal structure.
    NONE when no internal edges remain; TREE when every internal edge
    sits on an injective address, the internal graph is a forest, and
    each edge source is NONE-shaped or points only at NONE-shaped
    members; ANY otherwise.
    """
    internal: list[tuple[int, str, int]] = []  # (src, label, tgt), src != tgt
    for src in sorted(members):
        node = heap.nodes[src]
        for label in sorted(node.fields):
            for tgt in sorted(heap.store[node.fields[label]].targets):
                if tgt in members and tgt != src:
                    internal.append((src, label, tgt))
    if not internal:
        return Shape.NONE

    indegree: dict[int, int] = {n: 0 for n in members}
    succs: dict[int, list[int]] = {n: [] for n in members}
    for src, label, tgt in internal:
        entry = heap.store[heap.nodes[src].fields[label]]
        if not entry.injective:
            return Shape.ANY
        src_sh = heap.nodes[src].shape
        if src_sh != Shape.NONE and heap.nodes[tgt].shape != Shape.NONE:
            return Shape.ANY
        indegree[tgt] += 1
        succs[src].append(tgt)
    if any(d > 1 for d in indegree.values()):
        return Shape.ANY

    # Forest check: with in-degrees <= 1 a cycle is the only remaining
    # violation; peel leaves-first via Kahn's scheme.
    pending = dict(indegree)
    queue = [n for n in sorted(members) if pending[n] == 0]
    visited = 0
    while queue:
        n = queue.pop()
        visited += 1
        for t in succs[n]:
            pending[t] -= 1
            if pending[t] == 0:
                queue.append(t)
    if visited != len(members):
        return Shape.ANY
    return Shape.TREE


def class_shape(members: frozenset[int], heap: AbstractHeap) -> Shape:
    """Summary shape: structural shape joined with the member shapes."""
    sh = structural_shape(members, heap)
    for nid in members:
        sh = shape_join(sh, heap.nodes[nid].shape)
    return sh


def summarize(heap: AbstractHeap, partition: Partition) -> AbstractHeap:
    """Replace every congruence class with a fresh summary node.

    Per label of the class's type union: targets are the class-map image
    of the member target sets (internal targets fold onto the summary
    node itself); the entry is injective only when every member entry is
    injective and the member target sets are pairwise disjoint.  Labels
    a member lacks contribute the empty entry.  Roots are remapped
    through the class map.
    """
    out = AbstractHeap(heap.program)
    out.next_nid = heap.next_nid
    out.next_addr = heap.next_addr

    summary: dict[int, int] = {}  # class index -> summary nid
    node_class: dict[int, int] = {}
    for ci, members in enumerate(partition.classes):
        for nid in members:
            node_class[nid] = ci

    for ci, members in enumerate(partition.classes):
        tys = class_types(members, heap)
        nid = out.next_nid
        out.next_nid += 1
        out.nodes[nid] = AbstractNode(nid, tys, class_shape(members, heap), {})
        summary[ci] = nid

    for ci, members in enumerate(partition.classes):
        snode = out.nodes[summary[ci]]
        for label in sorted(field_labels(snode.types, heap.program)):
            member_targets: list[frozenset[int]] = []
            all_inj = True
            for nid in sorted(members):
                entry = heap.entry_of(nid, label)
                if entry is None:
                    member_targets.append(frozenset())
                    continue
                member_targets.append(entry.targets)
                all_inj = all_inj and entry.injective
            disjoint = True
            seen: set[int] = set()
            for ts in member_targets:
                if seen & ts:
                    disjoint = False
                    break
                seen.update(ts)
            new_targets = frozenset(summary[node_class[t]] for ts in member_targets for t in ts)
            snode.fields[label] = out.fresh_addr(AddrEntry(all_inj and disjoint, new_targets))

    for name, addr in heap.env.items():
        entry = heap.store[addr]
        out.bind_var(name, (summary[node_class[t]] for t in entry.targets))
    for name, addr in heap.statics.items():
        entry = heap.store[addr]
        out.bind_static(name, (summary[node_class[t]] for t in entry.targets))
    return out


def normalize(heap: AbstractHeap) -> AbstractHeap:
    """Reachability pruning, congruence closure, then summarization."""
    rec = recursive_types(heap.program)
    h = gc_unreachable(heap)
    partition = congruence_closure(h, rec)
    out = summarize(h, partition)
    out.normal = True
    return out


def normal_form_violations(heap: AbstractHeap) -> list[str]:
    """Check the normal-form clauses directly: no unreachable nodes and
    no pair of classes related by any of the three relations (the
    closure over the heap leaves every node in a singleton class)."""
    errs: list[str] = []
    unreachable = set(heap.nodes) - set(reachable_nodes(heap))
    if unreachable:
        errs.append(f"unreachable nodes {sorted(unreachable)}")
    rec = recursive_types(heap.program)
    partition = congruence_closure(heap, rec)
    for members in partition.classes:
        if len(members) > 1:
            errs.append(f"mergeable class {sorted(members)}")
    return errs


def is_normal_form(heap: AbstractHeap) -> bool:
    return not normal_form_violations(heap)
