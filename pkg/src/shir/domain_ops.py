"""Equality and upper approximation on normal-form abstract heaps.

Normal form makes equality cheap: every node is root-reachable and the
targets of any one address have pairwise-disjoint type sets, so an
isomorphism, if one exists, is found by pairing roots and walking the
two graphs breadth first, matching targets by type-set intersection.
The match at every step is forced, so the walk never backtracks.

The upper approximation renames two heaps apart, unions their roots and
stores, and normalizes the result.  It over-approximates both inputs
but is not a least join.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .heap import AbstractHeap, AddrEntry
from .normalform import is_normal_form, normalize


class NotNormalFormError(ValueError):
    """Inputs to equality must be in normal form; this is a contract
    violation, not a verdict about isomorphism."""


@dataclass(frozen=True)
class IsoWitness:
    phi: dict[int, int]  # nid in h1 -> nid in h2
    visits: int          # node + address pairs processed


def _require_normal(heap: AbstractHeap, who: str) -> None:
    if heap.normal:
        return
    if not is_normal_form(heap):
        raise NotNormalFormError(f"{who}: heap is not in normal form")


def find_isomorphism(h1: AbstractHeap, h2: AbstractHeap) -> IsoWitness | None:
    """Root-driven isomorphism respecting root names and labels.

    Returns None when the heaps are not isomorphic: differing root
    sets, a target with zero or several type-compatible matches, or an
    inconsistent pairing.
    """
    _require_normal(h1, "find_isomorphism(h1)")
    _require_normal(h2, "find_isomorphism(h2)")
    if set(h1.env) != set(h2.env) or set(h1.statics) != set(h2.statics):
        return None

    phi: dict[int, int] = {}
    used: set[int] = set()
    visits = 0
    queue: deque[tuple[int, int]] = deque()

    def match_targets(e1: AddrEntry, e2: AddrEntry) -> bool:
        nonlocal visits
        visits += 1
        if len(e1.targets) != len(e2.targets):
            return False
        for t1 in sorted(e1.targets):
            ty1 = h1.nodes[t1].types
            cands = [t2 for t2 in sorted(e2.targets) if ty1 & h2.nodes[t2].types]
            if len(cands) != 1:
                return False
            t2 = cands[0]
            if t1 in phi:
                if phi[t1] != t2:
                    return False
                continue
            if t2 in used:
                return False
            phi[t1] = t2
            used.add(t2)
            queue.append((t1, t2))
        return True

    for name in sorted(h1.env):
        if not match_targets(h1.store[h1.env[name]], h2.store[h2.env[name]]):
            return None
    for name in sorted(h1.statics):
        if not match_targets(h1.store[h1.statics[name]], h2.store[h2.statics[name]]):
            return None

    while queue:
        n1, n2 = queue.popleft()
        visits += 1
        node1, node2 = h1.nodes[n1], h2.nodes[n2]
        if set(node1.fields) != set(node2.fields):
            return None
        for label in sorted(node1.fields):
            if not match_targets(
                h1.store[node1.fields[label]], h2.store[node2.fields[label]]
            ):
                return None

    # Normal form has no unreachable nodes, so the walk covered both
    # heaps exactly when the node counts agree.
    if len(phi) != len(h1.nodes) or len(used) != len(h2.nodes):
        return None
    return IsoWitness(phi, visits)


def abs_equal(h1: AbstractHeap, h2: AbstractHeap) -> bool:
    """Isomorphic with equal type sets, shapes, and per-label
    injectivity flags under the isomorphism."""
    witness = find_isomorphism(h1, h2)
    if witness is None:
        return False
    for n1, n2 in witness.phi.items():
        node1, node2 = h1.nodes[n1], h2.nodes[n2]
        if node1.types != node2.types or node1.shape != node2.shape:
            return False
        for label, addr in node1.fields.items():
            if h1.store[addr].injective != h2.store[node2.fields[label]].injective:
                return False
    return True


def upper_approx(h1: AbstractHeap, h2: AbstractHeap) -> AbstractHeap:
    """Over-approximating merge of two well-formed heaps.

    Nodes and stores are renamed apart and unioned; every root present
    on either side gets a fresh injective address holding the union of
    both sides' targets (a missing side contributes nothing).  The
    result is normalized.
    """
    out = AbstractHeap(h1.program)
    remap1: dict[int, int] = {}
    remap2: dict[int, int] = {}

    def copy_side(src: AbstractHeap, remap: dict[int, int]) -> None:
        for nid in sorted(src.nodes):
            remap[nid] = out.next_nid
            out.next_nid += 1
        for nid in sorted(src.nodes):
            node = src.nodes[nid]
            fields: dict[str, int] = {}
            for label in sorted(node.fields):
                entry = src.store[node.fields[label]]
                fields[label] = out.fresh_addr(
                    AddrEntry(entry.injective, frozenset(remap[t] for t in entry.targets))
                )
            out.nodes[remap[nid]] = type(node)(remap[nid], node.types, node.shape, fields)

    copy_side(h1, remap1)
    copy_side(h2, remap2)

    def merged_targets(name: str, kind: str) -> frozenset[int]:
        targets: set[int] = set()
        for src, remap in ((h1, remap1), (h2, remap2)):
            root_map = src.env if kind == "var" else src.statics
            if name in root_map:
                targets.update(remap[t] for t in src.store[root_map[name]].targets)
        return frozenset(targets)

    for name in sorted(set(h1.env) | set(h2.env)):
        out.bind_var(name, merged_targets(name, "var"))
    for name in sorted(set(h1.statics) | set(h2.statics)):
        out.bind_static(name, merged_targets(name, "static"))
    return normalize(out)
