"""Worklist dataflow over method CFGs with an interprocedural driver.

Within a block, raw transfer functions run with no normalization, so
freshly allocated nodes stay distinct.  Block-entry states are kept in
normal form: a block's out-state is normalized when it first reaches a
successor and joined into the successor's state via the upper
approximation afterwards; convergence is abstract equality, which the
finite normal-form set makes terminating.

Calls:

  * A call to a method outside any call-graph cycle analyzes the callee
    at the call-site state.  The caller's variables ride along as
    hidden, depth-qualified roots so the callee's normalizations keep
    and update everything the caller can see; splicing back restores
    their names and binds the call result.  This is equivalent to
    inlining.

  * Methods in call-graph cycles are analyzed context-insensitively:
    one entry state per method, the join over all its call sites
    restricted to what the callee can reach (formals + statics).  At
    such a call site the caller's unreachable-from-callee frame part is
    held aside and recombined with the callee's exit heap afterwards;
    frame edges into the passed region are re-aimed at every
    type-compatible exit node, which is sound because the callee cannot
    reach (and so cannot mutate or capture) the frame part.

The whole driver iterates until every cycle entry and exit state
stabilizes.  An iteration cap guards against driver bugs; termination
itself comes from the finite normal-form set.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field as dc_field

from . import ir
from .concrete import Point
from .heap import AbstractHeap, AddrEntry, Shape
from .normalform import normalize
from .domain_ops import abs_equal, upper_approx
from .transfer import apply_statement
from .ir import Program, Method, strongly_connected

# Reserved root names; IR identifiers cannot start with '$'.
RET_ROOT = "$ret"
HIDDEN_PREFIX = "$c"


def _hidden(depth: int, name: str) -> str:
    return f"{HIDDEN_PREFIX}{depth}:{name}"


def _is_hidden(name: str) -> bool:
    return name.startswith(HIDDEN_PREFIX)


class AnalysisError(Exception):
    pass


@dataclass
class AnalysisConfig:
    max_call_depth: int = 64
    iter_cap: int = 200_000  # total block processings; diagnostic only
    snapshot_points: tuple[Point, ...] = ()

    def __post_init__(self) -> None:
        if self.max_call_depth <= 0 or self.iter_cap <= 0:
            raise ValueError("analysis caps must be positive")


@dataclass
class MethodResult:
    """Per-method states, all in normal form.

    block_entry maps a block label to the join of that block's entry
    state over every analyzed instance of the method.  exit_heap binds
    the reserved return root and the statics only.
    """

    method: str
    block_entry: dict[str, AbstractHeap]
    exit_heap: AbstractHeap | None
    return_vars: tuple[str, ...] = ()


def initial_heap(program: Program) -> AbstractHeap:
    """Program start: no objects, every heap static bound to nothing."""
    h = AbstractHeap(program)
    for name, ft in program.statics.items():
        if ft.is_heap:
            h.bind_static(name, ())
    return normalize(h)


def build_call_graph(program: Program) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {m: set() for m in program.methods}
    for m in program.methods.values():
        for b in m.blocks:
            for s in b.stmts:
                if isinstance(s, ir.Call) and s.method in program.methods:
                    out[m.name].add(s.method)
    return out


def recursive_methods(program: Program) -> frozenset[str]:
    """Methods in a nontrivial call-graph SCC or calling themselves."""
    cg = build_call_graph(program)
    rec: set[str] = set()
    for comp in strongly_connected(cg):
        if len(comp) > 1:
            rec.update(comp)
        else:
            (m,) = comp
            if m in cg[m]:
                rec.add(m)
    return frozenset(rec)


class Analyzer:
    """Owns the accumulator state of one whole-program analysis."""

    def __init__(self, program: Program, config: AnalysisConfig | None = None):
        self.program = program
        self.config = config or AnalysisConfig()
        self.rec = recursive_methods(program)
        self.entry_acc: dict[str, AbstractHeap] = {}
        self.exit_acc: dict[str, AbstractHeap] = {}
        self.records: dict[str, dict[str, AbstractHeap]] = {}
        self.exit_records: dict[str, AbstractHeap] = {}
        self.return_vars: dict[str, set[str]] = {}
        self.changed = False
        self.steps = 0
        # Set once run() converges: replays through state_at() must not
        # keep contributing to the accumulators.
        self.frozen = False

    # -- small helpers ------------------------------------------------------

    def _tick(self) -> None:
        self.steps += 1
        if self.steps > self.config.iter_cap:
            raise AnalysisError(
                f"iteration cap {self.config.iter_cap} exceeded; "
                "the driver failed to converge"
            )

    def _join_into(self, store: dict, key, heap: AbstractHeap) -> bool:
        """Join a normal-form heap into store[key]; True when changed."""
        old = store.get(key)
        if old is None:
            store[key] = heap
            return True
        joined = upper_approx(old, heap)
        if abs_equal(joined, old):
            return False
        store[key] = joined
        return True

    def _empty_exit(self) -> AbstractHeap:
        h = AbstractHeap(self.program)
        h.bind_var(RET_ROOT, ())
        for name, ft in self.program.statics.items():
            if ft.is_heap:
                h.bind_static(name, ())
        return normalize(h)

    def _ref_var(self, method: Method, name: str) -> bool:
        ft = method.var_types().get(name)
        return ft is not None and ft.is_heap

    # -- call handling ------------------------------------------------------

    def _reachable_from(self, heap: AbstractHeap, roots: set[int]) -> set[int]:
        seen = set(roots)
        work = list(roots)
        while work:
            nid = work.pop()
            for addr in heap.nodes[nid].fields.values():
                for t in heap.store[addr].targets:
                    if t not in seen:
                        seen.add(t)
                        work.append(t)
        return seen

    def _callee_formal_targets(
        self, heap: AbstractHeap, callee: Method, stmt: ir.Call
    ) -> dict[str, frozenset[int]]:
        out: dict[str, frozenset[int]] = {}
        for (pname, pt), arg in zip(callee.params, stmt.args):
            if pt.is_heap:
                out[pname] = heap.var_targets(arg)
        return out

    def _call_recursive(
        self, heap: AbstractHeap, stmt: ir.Call, method: Method, depth: int
    ) -> AbstractHeap:
        """Context-insensitive call: contribute to the callee's entry,
        splice its current exit over the caller's frame part."""
        callee = self.program.methods[stmt.method]
        h = normalize(heap)
        formals = self._callee_formal_targets(h, callee, stmt)

        if not self.frozen:
            contrib = h.clone()
            contrib.env = {}
            for pname, targets in formals.items():
                contrib.bind_var(pname, targets)
            contrib = normalize(contrib)
            if self._join_into(self.entry_acc, callee.name, contrib):
                self.changed = True

        passed_roots: set[int] = set()
        for targets in formals.values():
            passed_roots.update(targets)
        for name in h.statics:
            passed_roots.update(h.static_targets(name))
        passed = self._reachable_from(h, passed_roots)

        exit_heap = self.exit_acc.get(callee.name) or self._empty_exit()

        out = AbstractHeap(self.program)
        remap_kept: dict[int, int] = {}
        remap_exit: dict[int, int] = {}
        kept = [nid for nid in sorted(h.nodes) if nid not in passed]
        for nid in kept:
            remap_kept[nid] = out.next_nid
            out.next_nid += 1
        for nid in sorted(exit_heap.nodes):
            remap_exit[nid] = out.next_nid
            out.next_nid += 1

        def retarget(entry: AddrEntry) -> AddrEntry:
            kept_t = {remap_kept[t] for t in entry.targets if t not in passed}
            passed_types: set[str] = set()
            for t in entry.targets:
                if t in passed:
                    passed_types.update(h.nodes[t].types)
            if passed_types:
                for x in sorted(exit_heap.nodes):
                    if exit_heap.nodes[x].types & passed_types:
                        kept_t.add(remap_exit[x])
            return AddrEntry(entry.injective, frozenset(kept_t))

        for nid in kept:
            node = h.nodes[nid]
            fields = {
                label: out.fresh_addr(retarget(h.store[addr]))
                for label, addr in sorted(node.fields.items())
            }
            out.nodes[remap_kept[nid]] = type(node)(
                remap_kept[nid], node.types, node.shape, fields
            )
        for nid in sorted(exit_heap.nodes):
            node = exit_heap.nodes[nid]
            fields = {
                label: out.fresh_addr(
                    AddrEntry(
                        exit_heap.store[addr].injective,
                        frozenset(remap_exit[t] for t in exit_heap.store[addr].targets),
                    )
                )
                for label, addr in sorted(node.fields.items())
            }
            out.nodes[remap_exit[nid]] = type(node)(
                remap_exit[nid], node.types, node.shape, fields
            )

        for name in sorted(h.env):
            if name == stmt.v:
                continue
            out.env[name] = out.fresh_addr(retarget(h.store[h.env[name]]))
        if self._ref_var(method, stmt.v):
            ret_targets = exit_heap.var_targets(RET_ROOT)
            out.bind_var(stmt.v, (remap_exit[t] for t in ret_targets))
        for name in sorted(exit_heap.statics):
            out.bind_static(
                name, (remap_exit[t] for t in exit_heap.static_targets(name))
            )
        return normalize(out)

    def _call_inline(
        self, heap: AbstractHeap, stmt: ir.Call, method: Method, depth: int
    ) -> AbstractHeap:
        """Call-site-specific analysis of a non-recursive callee with the
        caller frame riding along under hidden names."""
        if depth + 1 > self.config.max_call_depth:
            raise AnalysisError(f"call depth exceeds {self.config.max_call_depth}")
        callee = self.program.methods[stmt.method]
        h = normalize(heap)
        formals = self._callee_formal_targets(h, callee, stmt)

        entry = h.clone()
        caller_env = dict(entry.env)
        entry.env = {}
        for pname, targets in formals.items():
            entry.bind_var(pname, targets)
        for name, addr in sorted(caller_env.items()):
            entry.env[_hidden(depth + 1, name)] = addr
        entry = normalize(entry)

        exit_heap = self._analyze_instance(callee, entry, depth + 1)

        out = exit_heap.clone()
        restored: dict[str, int] = {}
        prefix = f"{HIDDEN_PREFIX}{depth + 1}:"
        for name in sorted(out.env):
            if name.startswith(prefix):
                restored[name[len(prefix):]] = out.env[name]
        ret_addr = out.env[RET_ROOT]
        out.env = restored
        if self._ref_var(method, stmt.v):
            out.bind_var(stmt.v, out.store[ret_addr].targets)
        return normalize(out)

    def _apply_call(
        self, heap: AbstractHeap, stmt: ir.Call, method: Method, depth: int
    ) -> AbstractHeap:
        if stmt.method not in self.program.methods:
            raise AnalysisError(f"call to undeclared method {stmt.method}")
        if stmt.method in self.rec:
            return self._call_recursive(heap, stmt, method, depth)
        return self._call_inline(heap, stmt, method, depth)

    # -- intraprocedural worklist -------------------------------------------

    def _prep_entry(self, method: Method, entry: AbstractHeap) -> AbstractHeap:
        h = entry.clone()
        for name, ft in (*method.params, *method.locals):
            if ft.is_heap and name not in h.env:
                h.bind_var(name, ())
        return normalize(h)

    def _run_block(
        self, method: Method, block: ir.Block, state: AbstractHeap, depth: int
    ) -> tuple[AbstractHeap, list[tuple[str, AbstractHeap]], AbstractHeap | None, str | None]:
        """Walk one block; returns (out state, successor states, return
        state, returned var)."""
        out = state
        for stmt in block.stmts:
            if isinstance(stmt, ir.Call):
                out = self._apply_call(out, stmt, method, depth)
            else:
                out = apply_statement(out, stmt, method)
        last = block.stmts[-1]
        if isinstance(last, ir.Goto):
            return out, [(last.target, out)], None, None
        if isinstance(last, (ir.IfNondet, ir.IfNull)):
            return out, [(last.then_target, out), (last.else_target, out)], None, None
        assert isinstance(last, ir.Return)
        return out, [], out, last.v

    def _exit_form(self, method: Method, state: AbstractHeap, ret_var: str) -> AbstractHeap:
        """Keep hidden roots and statics, bind the return root, drop the
        method's own variables."""
        h = state.clone()
        targets = (
            h.var_targets(ret_var) if self._ref_var(method, ret_var) else frozenset()
        )
        h.env = {n: a for n, a in h.env.items() if _is_hidden(n)}
        h.bind_var(RET_ROOT, targets)
        return normalize(h)

    def _record_form(self, state: AbstractHeap) -> AbstractHeap:
        """A block-entry state as seen from inside the method only."""
        h = state.clone()
        h.env = {n: a for n, a in h.env.items() if not _is_hidden(n) and n != RET_ROOT}
        return normalize(h)

    def _analyze_instance(
        self, method: Method, entry: AbstractHeap, depth: int
    ) -> AbstractHeap:
        """Worklist analysis of one method instance; returns the joined
        exit-form heap."""
        in_states: dict[str, AbstractHeap] = {}
        in_states[method.entry] = self._prep_entry(method, entry)
        worklist: deque[str] = deque([method.entry])
        queued = {method.entry}

        while worklist:
            label = worklist.popleft()
            queued.discard(label)
            self._tick()
            block = method.block(label)
            _, succs, _, _ = self._run_block(method, block, in_states[label], depth)
            for target, out in succs:
                candidate = normalize(out)
                if target not in in_states:
                    in_states[target] = candidate
                    if target not in queued:
                        worklist.append(target)
                        queued.add(target)
                    continue
                joined = upper_approx(in_states[target], candidate)
                if not abs_equal(joined, in_states[target]):
                    in_states[target] = joined
                    if target not in queued:
                        worklist.append(target)
                        queued.add(target)

        # Record the converged block-entry states and compute the exit.
        if not self.frozen:
            rec = self.records.setdefault(method.name, {})
            for label in sorted(in_states):
                self._join_into(rec, label, self._record_form(in_states[label]))
        exit_join: AbstractHeap | None = None
        for block in method.blocks:
            if block.label not in in_states:
                continue  # CFG-unreachable from this instance's entry
            if not isinstance(block.stmts[-1], ir.Return):
                continue
            _, _, ret_state, ret_var = self._run_block(
                method, block, in_states[block.label], depth
            )
            assert ret_state is not None and ret_var is not None
            if not self.frozen:
                self.return_vars.setdefault(method.name, set()).add(ret_var)
            form = self._exit_form(method, ret_state, ret_var)
            exit_join = form if exit_join is None else upper_approx(exit_join, form)
        if exit_join is None:
            raise AnalysisError(f"method {method.name} has no reachable return")
        return exit_join

    # -- whole-program driver -----------------------------------------------

    def run(self, root: str, root_entry: AbstractHeap) -> "AnalysisResult":
        outer = 0
        while True:
            outer += 1
            if outer > self.config.iter_cap:
                raise AnalysisError("outer iteration cap exceeded")
            self.changed = False
            self.records = {}
            self.return_vars = {}
            self.exit_records = {}
            self.exit_records[root] = self._analyze_instance(
                self.program.methods[root], root_entry, 0
            )
            for name in sorted(self.rec):
                if name not in self.entry_acc:
                    continue  # not called from the analyzed root
                exit_form = self._analyze_instance(
                    self.program.methods[name], self.entry_acc[name], 0
                )
                old = self.exit_acc.get(name)
                if old is None or not abs_equal(exit_form, old):
                    self.exit_acc[name] = exit_form
                    self.changed = True
                self.exit_records[name] = exit_form
            if not self.changed:
                break
        self.frozen = True

        methods: dict[str, MethodResult] = {}
        for name, blocks in self.records.items():
            methods[name] = MethodResult(
                method=name,
                block_entry=blocks,
                exit_heap=self.exit_records.get(name),
                return_vars=tuple(sorted(self.return_vars.get(name, ()))),
            )
        return AnalysisResult(self.program, self, methods, root)


@dataclass
class AnalysisResult:
    program: Program
    analyzer: Analyzer
    methods: dict[str, MethodResult]
    root: str

    def state_at(self, point: Point) -> AbstractHeap | None:
        """Normal-form state just before the statement at `point`,
        replaying transfers from the recorded block-entry state."""
        mname, label, idx = point
        result = self.methods.get(mname)
        if result is None or label not in result.block_entry:
            return None
        method = self.program.methods[mname]
        block = method.block(label)
        if idx < 0 or idx >= len(block.stmts):
            raise KeyError(f"no statement {idx} in {mname}:{label}")
        state = result.block_entry[label]
        for stmt in block.stmts[:idx]:
            if isinstance(stmt, ir.Call):
                state = self.analyzer._apply_call(state, stmt, method, 0)
            else:
                state = apply_statement(state, stmt, method)
        return normalize(state)

    def return_points(self, mname: str) -> list[Point]:
        method = self.program.methods[mname]
        return [
            (mname, b.label, len(b.stmts) - 1)
            for b in method.blocks
            if isinstance(b.stmts[-1], ir.Return)
        ]

    def main_exit(self) -> AbstractHeap:
        """Join of the states just before every return of the root
        method, with the root's variables in scope."""
        states = [
            s
            for p in self.return_points(self.root)
            if (s := self.state_at(p)) is not None
        ]
        if not states:
            raise AnalysisError(f"no reachable return in {self.root}")
        out = states[0]
        for s in states[1:]:
            out = upper_approx(out, s)
        return out


def analyze_method(
    program: Program,
    method: str,
    entry: AbstractHeap,
    config: AnalysisConfig | None = None,
) -> AnalysisResult:
    """Analyze starting from one method at a given entry state."""
    analyzer = Analyzer(program, config)
    return analyzer.run(method, entry)


def analyze_program(
    program: Program, config: AnalysisConfig | None = None
) -> AnalysisResult:
    """Analyze from main at the empty initial heap."""
    analyzer = Analyzer(program, config)
    return analyzer.run(program.main, initial_heap(program))
