"""Abstract transfer functions.

Heap cells take weak updates: a store unions the new targets into the
cell and can only lower its injectivity.  Variable and static cells are
single pointers, so they take strong updates (fresh address, injective,
new target set) and a load can rebind its destination outright.

Allocation always makes a fresh node; nothing here reuses nodes by
allocation site, so fresh objects stay distinguishable until a
normalization merges them into a recursive structure.  Int arithmetic
and branches do not touch the abstract state.
"""

from __future__ import annotations

from . import ir
from .heap import AbstractHeap, AddrEntry, Shape

# Test fixture: when True the store transfer keeps the old injectivity
# flag even when target sets overlap, an intentionally unsound variant
# used to prove the soundness sweep can detect a broken transfer.
FAULT_STORE_KEEP_INJECTIVE = False


def tf_alloc(heap: AbstractHeap, v: str, type_name: str) -> AbstractHeap:
    """v = new T: fresh node with empty injective cells; v rebound."""
    h = heap.clone()
    nid = h.add_fresh_node({type_name}, Shape.NONE)
    h.bind_var(v, {nid})
    return h


def tf_alloc_array(heap: AbstractHeap, v: str, elem: str) -> AbstractHeap:
    return tf_alloc(heap, v, f"{elem}[]")


def tf_load(heap: AbstractHeap, v: str, src: str, label: str) -> AbstractHeap:
    """v = src.label: v strongly rebound to the union of the labeled
    cells across src's targets; nodes lacking the label contribute
    nothing (their type sets over-approximate)."""
    h = heap.clone()
    targets: set[int] = set()
    for nid in h.var_targets(src):
        entry = h.entry_of(nid, label)
        if entry is not None:
            targets.update(entry.targets)
    h.bind_var(v, targets)
    return h


def tf_store(heap: AbstractHeap, obj: str, label: str, src: str) -> AbstractHeap:
    """obj.label = src: weak update of every possible cell.

    Each targeted cell unions in src's targets and stays injective only
    if it was injective and gained no target it already had.  A node
    that may be stored into itself loses its shape to ANY.
    """
    h = heap.clone()
    src_targets = h.var_targets(src)
    for nid in sorted(h.var_targets(obj)):
        node = h.nodes[nid]
        if label not in node.fields:
            continue
        if nid in src_targets:
            node.shape = Shape.ANY
        old = h.store[node.fields[label]]
        if FAULT_STORE_KEEP_INJECTIVE:
            inj = old.injective
        else:
            inj = old.injective and not (old.targets & src_targets)
        node.fields[label] = h.fresh_addr(AddrEntry(inj, old.targets | src_targets))
    return h


def tf_copy(heap: AbstractHeap, v: str, src: str) -> AbstractHeap:
    h = heap.clone()
    h.bind_var(v, h.var_targets(src))
    return h


def tf_null(heap: AbstractHeap, v: str) -> AbstractHeap:
    h = heap.clone()
    h.bind_var(v, ())
    return h


def tf_array_load(heap: AbstractHeap, v: str, arr: str) -> AbstractHeap:
    return tf_load(heap, v, arr, ir.ARRAY_LABEL)


def tf_array_store(heap: AbstractHeap, arr: str, src: str) -> AbstractHeap:
    return tf_store(heap, arr, ir.ARRAY_LABEL, src)


def tf_static_read(heap: AbstractHeap, v: str, static: str) -> AbstractHeap:
    """v = s: statics are single cells like variables."""
    h = heap.clone()
    h.bind_var(v, h.static_targets(static))
    return h


def tf_static_write(heap: AbstractHeap, static: str, v: str) -> AbstractHeap:
    """s = v: strong rebind of the static cell."""
    h = heap.clone()
    h.bind_static(static, h.var_targets(v))
    return h


def _is_ref(heap: AbstractHeap, method: ir.Method, name: str) -> bool:
    ft = method.var_types().get(name)
    return ft is not None and ft.is_heap


def apply_statement(
    heap: AbstractHeap, stmt: ir.Statement, method: ir.Method
) -> AbstractHeap:
    """Dispatch one non-call statement.

    Int arithmetic, branches, and returns leave the abstract state
    unchanged; calls are the fixpoint driver's job and are rejected
    here.
    """
    if isinstance(stmt, ir.Alloc):
        return tf_alloc(heap, stmt.v, stmt.type_name)
    if isinstance(stmt, ir.AllocArray):
        return tf_alloc_array(heap, stmt.v, stmt.elem)
    if isinstance(stmt, ir.Copy):
        if not _is_ref(heap, method, stmt.v):
            return heap  # int copy
        return tf_copy(heap, stmt.v, stmt.src)
    if isinstance(stmt, ir.SetNull):
        return tf_null(heap, stmt.v)
    if isinstance(stmt, ir.LoadField):
        if not _is_ref(heap, method, stmt.v):
            return heap  # int field load
        return tf_load(heap, stmt.v, stmt.obj, stmt.fld)
    if isinstance(stmt, ir.StoreField):
        if not _is_ref(heap, method, stmt.src):
            return heap  # int field store
        return tf_store(heap, stmt.obj, stmt.fld, stmt.src)
    if isinstance(stmt, ir.LoadIndex):
        return tf_array_load(heap, stmt.v, stmt.arr)
    if isinstance(stmt, ir.StoreIndex):
        return tf_array_store(heap, stmt.arr, stmt.src)
    if isinstance(stmt, ir.ReadStatic):
        if not heap.program.statics[stmt.static].is_heap:
            return heap
        return tf_static_read(heap, stmt.v, stmt.static)
    if isinstance(stmt, ir.WriteStatic):
        if not heap.program.statics[stmt.static].is_heap:
            return heap
        return tf_static_write(heap, stmt.static, stmt.v)
    if isinstance(stmt, (ir.ConstInt, ir.AddInt, ir.Return, ir.Goto, ir.IfNondet, ir.IfNull)):
        return heap
    if isinstance(stmt, ir.Call):
        raise ValueError("calls are handled by the analysis driver")
    raise TypeError(f"unknown statement {stmt!r}")
