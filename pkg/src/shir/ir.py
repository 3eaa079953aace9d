"""Object IR for the heap analyzer.

A program is a set of nominal class types (single inheritance), static
fields, and methods whose bodies are CFGs of labeled blocks.  The surface
syntax is line oriented (`.shir` files):

    # comment
    class Expr;
    class Add : Expr { l: Expr; r: Expr; }
    static env: Var[];
    method main() {
      var exp: Add;
    entry:
      exp = new Add;
      return exp;
    }

Statements, one per line (a trailing `;` is accepted and the printer
always emits one):

    v = new T            v = new T[]          v = null
    v = w                v = w.f              v.f = w
    v = a[i]             a[i] = w             v = 7
    v = a + b            v = call m(x, y)     return v
    goto L               if nondet goto L1 else L2
    if isnull v goto L1 else L2

Integers exist only for array indexing and loop plumbing in the concrete
interpreter; they never produce heap edges.  Static fields may appear only
in plain copies (`v = s` reads, `s = v` writes).  In a copy, a local
declaration shadows a static of the same name.

Arrays are unsized: `new T[]` makes an empty array and a store at index i
beyond the current length extends it (slots in between become null); loads
outside the current length are out-of-bounds faults.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

# The smashed index label used for every array slot in the abstract domain.
ARRAY_LABEL = "[]"

INT_TYPE = "int"

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"


class ParseError(Exception):
    """Raised for syntax errors, duplicate declarations, and unresolved
    type names.  Carries a 1-based source line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldType:
    """Declared type of a field, static, local, or parameter.

    kind is one of "ref" (class reference), "array" (reference to an
    array of `elem`), or "int".  `elem` names the class for ref/array
    and is None for int.
    """

    kind: str
    elem: str | None = None

    @property
    def is_heap(self) -> bool:
        return self.kind in ("ref", "array")

    @property
    def type_name(self) -> str:
        """The runtime type-universe name this declaration ranges over."""
        if self.kind == "ref":
            return self.elem  # type: ignore[return-value]
        if self.kind == "array":
            return f"{self.elem}[]"
        return INT_TYPE

    def __str__(self) -> str:
        if self.kind == "array":
            return f"{self.elem}[]"
        if self.kind == "ref":
            return str(self.elem)
        return INT_TYPE


@dataclass(frozen=True)
class TypeDecl:
    name: str
    super_name: str | None
    fields: tuple[tuple[str, FieldType], ...]  # declared order

    def field_map(self) -> dict[str, FieldType]:
        return dict(self.fields)


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------

# Array index operand: a variable name or a literal integer.
Index = Union[str, int]


@dataclass(frozen=True)
class Alloc:
    v: str
    type_name: str


@dataclass(frozen=True)
class AllocArray:
    v: str
    elem: str


@dataclass(frozen=True)
class Copy:
    v: str
    src: str


@dataclass(frozen=True)
class SetNull:
    v: str


@dataclass(frozen=True)
class LoadField:
    v: str
    obj: str
    fld: str


@dataclass(frozen=True)
class StoreField:
    obj: str
    fld: str
    src: str


@dataclass(frozen=True)
class LoadIndex:
    v: str
    arr: str
    index: Index


@dataclass(frozen=True)
class StoreIndex:
    arr: str
    index: Index
    src: str


@dataclass(frozen=True)
class ConstInt:
    v: str
    value: int


@dataclass(frozen=True)
class AddInt:
    v: str
    a: str
    b: str


@dataclass(frozen=True)
class Call:
    v: str
    method: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Return:
    v: str


@dataclass(frozen=True)
class Goto:
    target: str


@dataclass(frozen=True)
class IfNondet:
    then_target: str
    else_target: str


@dataclass(frozen=True)
class IfNull:
    v: str
    then_target: str
    else_target: str


@dataclass(frozen=True)
class ReadStatic:
    v: str
    static: str


@dataclass(frozen=True)
class WriteStatic:
    static: str
    v: str


Statement = Union[
    Alloc, AllocArray, Copy, SetNull, LoadField, StoreField, LoadIndex,
    StoreIndex, ConstInt, AddInt, Call, Return, Goto, IfNondet, IfNull,
    ReadStatic, WriteStatic,
]

TERMINATORS = (Return, Goto, IfNondet, IfNull)


def is_terminator(stmt: Statement) -> bool:
    return isinstance(stmt, TERMINATORS)


@dataclass(frozen=True)
class Block:
    label: str
    stmts: tuple[Statement, ...]


@dataclass(frozen=True)
class Method:
    name: str
    params: tuple[tuple[str, FieldType], ...]
    locals: tuple[tuple[str, FieldType], ...]
    blocks: tuple[Block, ...]  # first block is the entry

    @property
    def entry(self) -> str:
        return self.blocks[0].label

    def block(self, label: str) -> Block:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def block_labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.blocks)

    def var_types(self) -> dict[str, FieldType]:
        out = dict(self.params)
        out.update(dict(self.locals))
        return out

    def ref_vars(self) -> tuple[str, ...]:
        """Heap-typed variables (params then locals, declared order)."""
        return tuple(n for n, t in (*self.params, *self.locals) if t.is_heap)


@dataclass
class Program:
    """A resolved program.  Immutable by convention after parsing."""

    types: dict[str, TypeDecl]
    statics: dict[str, FieldType]
    methods: dict[str, Method]
    main: str = "main"

    # -- type relations ----------------------------------------------------

    def is_class(self, name: str) -> bool:
        return name in self.types

    def is_array_type(self, name: str) -> bool:
        return name.endswith("[]") and name[:-2] in self.types

    def super_chain(self, name: str) -> list[str]:
        """`name` followed by its declared supertypes, root last."""
        chain = [name]
        cur = self.types[name].super_name
        while cur is not None:
            chain.append(cur)
            cur = self.types[cur].super_name
        return chain

    def is_subtype(self, sub: str, sup: str) -> bool:
        """Nominal subtyping: reflexive on every type name; class names
        follow the single-inheritance chain; array types are invariant."""
        if sub == sup:
            return True
        if self.is_class(sub) and self.is_class(sup):
            return sup in self.super_chain(sub)
        return False

    def subtypes_of(self, name: str) -> frozenset[str]:
        if not self.is_class(name):
            return frozenset({name})
        return frozenset(t for t in self.types if self.is_subtype(t, name))

    def all_fields(self, class_name: str) -> tuple[tuple[str, FieldType], ...]:
        """Fields of a class including inherited ones, supertypes first."""
        out: list[tuple[str, FieldType]] = []
        for t in reversed(self.super_chain(class_name)):
            out.extend(self.types[t].fields)
        return tuple(out)

    def field_type(self, type_name: str, fld: str) -> FieldType | None:
        if not self.is_class(type_name):
            return None
        for name, ft in self.all_fields(type_name):
            if name == fld:
                return ft
        return None

    def heap_labels(self, type_name: str) -> tuple[str, ...]:
        """Abstract labels defined for a single type: heap-typed field
        names, or the smashed index label for array types."""
        if self.is_array_type(type_name):
            return (ARRAY_LABEL,)
        if not self.is_class(type_name):
            return ()
        return tuple(n for n, ft in self.all_fields(type_name) if ft.is_heap)

    def array_elem(self, type_name: str) -> str:
        assert self.is_array_type(type_name)
        return type_name[:-2]

    def type_universe(self) -> tuple[str, ...]:
        """Declared classes plus every array type that appears in a
        declaration or allocation, in a deterministic order."""
        names = list(self.types)
        arrays: list[str] = []

        def see(ft: FieldType) -> None:
            if ft.kind == "array":
                t = ft.type_name
                if t not in arrays:
                    arrays.append(t)

        for td in self.types.values():
            for _, ft in td.fields:
                see(ft)
        for ft in self.statics.values():
            see(ft)
        for m in self.methods.values():
            for _, ft in (*m.params, *m.locals):
                see(ft)
            for b in m.blocks:
                for s in b.stmts:
                    if isinstance(s, AllocArray):
                        t = f"{s.elem}[]"
                        if t not in arrays:
                            arrays.append(t)
        return tuple(names + arrays)


# ---------------------------------------------------------------------------
# Label sets and the recursive-type relation
# ---------------------------------------------------------------------------


def field_labels(type_names: Iterable[str], program: Program) -> frozenset[str]:
    """Union of abstract labels defined for a set of type names.

    Includes inherited fields, includes the array label exactly when the
    set contains an array type, and excludes int-typed fields (they never
    carry heap edges).
    """
    out: set[str] = set()
    for t in type_names:
        out.update(program.heap_labels(t))
    return frozenset(out)


def strongly_connected(succs: Mapping[str, Iterable[str]]) -> list[frozenset[str]]:
    """Tarjan's SCC algorithm, iterative.  Deterministic: components are
    emitted in a stable order derived from the mapping's iteration order."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    onstack: set[str] = set()
    stack: list[str] = []
    out: list[frozenset[str]] = []
    counter = 0

    for root in succs:
        if root in index:
            continue
        work: list[tuple[str, Iterable, str | None]] = [(root, iter(succs.get(root, ())), None)]
        while work:
            node, it, parent = work[-1]
            if node not in index:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                onstack.add(node)
            advanced = False
            for nxt in it:
                if nxt not in succs:
                    continue
                if nxt not in index:
                    work.append((nxt, iter(succs.get(nxt, ())), node))
                    advanced = True
                    break
                if nxt in onstack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if parent is not None:
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    w = stack.pop()
                    onstack.discard(w)
                    comp.add(w)
                    if w == node:
                        break
                out.append(frozenset(comp))
    return out


@dataclass(frozen=True)
class RecursiveTypes:
    """Partition of the type names that participate in recursion.

    Two types are related when they lie in the same strongly connected
    component of the may-reference graph; a singleton component counts
    only when it has a self edge.
    """

    groups: tuple[frozenset[str], ...]

    def group_of(self, type_name: str) -> frozenset[str] | None:
        for g in self.groups:
            if type_name in g:
                return g
        return None

    def is_recursive(self, type_name: str) -> bool:
        return self.group_of(type_name) is not None

    def related(self, t1: str, t2: str) -> bool:
        g = self.group_of(t1)
        return g is not None and t2 in g

    def group_indices(self, type_names: Iterable[str]) -> frozenset[int]:
        hits = set()
        for i, g in enumerate(self.groups):
            if any(t in g for t in type_names):
                hits.add(i)
        return frozenset(hits)


def recursive_types(program: Program) -> RecursiveTypes:
    """Compute the recursive-type partition.

    The may-reference graph has an edge from T to S whenever T declares a
    heap field (or array element) of declared type U and S is U or a
    declared subtype of U.  Field types declared at a supertype make
    every subtype of that supertype reachable, which is what groups
    sibling classes that recurse through a common base.
    """
    universe = program.type_universe()
    succs: dict[str, set[str]] = {t: set() for t in universe}

    def add_ref(src: str, ft: FieldType) -> None:
        if ft.kind == "ref":
            succs[src].update(program.subtypes_of(ft.elem))  # type: ignore[arg-type]
        elif ft.kind == "array":
            succs[src].add(ft.type_name)

    for t in universe:
        if program.is_array_type(t):
            succs[t].update(program.subtypes_of(program.array_elem(t)))
        else:
            for _, ft in program.all_fields(t):
                add_ref(t, ft)

    comps = strongly_connected(succs)
    groups = []
    for comp in comps:
        if len(comp) > 1:
            groups.append(comp)
        else:
            (t,) = comp
            if t in succs[t]:
                groups.append(comp)
    groups.sort(key=lambda g: sorted(g)[0])
    return RecursiveTypes(tuple(groups))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_CLASS_RE = re.compile(
    rf"^class\s+({_IDENT})\s*(?::\s*({_IDENT}))?\s*(?:\{{(.*)\}})?\s*;?\s*$"
)
_FIELD_RE = re.compile(rf"^({_IDENT})\s*:\s*({_IDENT})\s*(\[\])?$")
_STATIC_RE = re.compile(rf"^static\s+({_IDENT})\s*:\s*({_IDENT})\s*(\[\])?\s*;?\s*$")
_METHOD_RE = re.compile(rf"^method\s+({_IDENT})\s*\((.*)\)\s*\{{\s*$")
_VAR_RE = re.compile(rf"^var\s+({_IDENT})\s*:\s*({_IDENT})\s*(\[\])?\s*;?\s*$")
_LABEL_RE = re.compile(rf"^({_IDENT})\s*:\s*$")

_STMT_RES: list[tuple[re.Pattern, str]] = [
    (re.compile(rf"^return\s+({_IDENT})$"), "return"),
    (re.compile(rf"^goto\s+({_IDENT})$"), "goto"),
    (re.compile(rf"^if\s+nondet\s+goto\s+({_IDENT})\s+else\s+({_IDENT})$"), "nondet"),
    (re.compile(rf"^if\s+isnull\s+({_IDENT})\s+goto\s+({_IDENT})\s+else\s+({_IDENT})$"), "isnull"),
    (re.compile(rf"^({_IDENT})\s*\[\s*({_IDENT}|\d+)\s*\]\s*=\s*({_IDENT})$"), "astore"),
    (re.compile(rf"^({_IDENT})\s*\.\s*({_IDENT})\s*=\s*({_IDENT})$"), "fstore"),
    (re.compile(rf"^({_IDENT})\s*=\s*new\s+({_IDENT})\s*\[\]$"), "newarr"),
    (re.compile(rf"^({_IDENT})\s*=\s*new\s+({_IDENT})$"), "new"),
    (re.compile(rf"^({_IDENT})\s*=\s*null$"), "null"),
    (re.compile(rf"^({_IDENT})\s*=\s*call\s+({_IDENT})\s*\((.*)\)$"), "call"),
    (re.compile(rf"^({_IDENT})\s*=\s*({_IDENT})\s*\[\s*({_IDENT}|\d+)\s*\]$"), "aload"),
    (re.compile(rf"^({_IDENT})\s*=\s*({_IDENT})\s*\.\s*({_IDENT})$"), "fload"),
    (re.compile(rf"^({_IDENT})\s*=\s*(-?\d+)$"), "const"),
    (re.compile(rf"^({_IDENT})\s*=\s*({_IDENT})\s*\+\s*({_IDENT})$"), "add"),
    (re.compile(rf"^({_IDENT})\s*=\s*({_IDENT})$"), "copy"),
]


def _strip(line: str) -> str:
    if "#" in line:
        line = line[: line.index("#")]
    return line.strip()


def _parse_index(tok: str) -> Index:
    return int(tok) if tok.lstrip("-").isdigit() else tok


def parse_program(text: str) -> Program:
    """Parse and resolve a program from its textual form.

    Raises ParseError for syntax errors, duplicate declarations, cyclic
    inheritance, and unresolved type names in declaration positions.
    Statement-level checks (undeclared variables, field typing, jump
    targets) are reported by validate() instead.
    """
    lines = text.splitlines()
    types: dict[str, TypeDecl] = {}
    statics: dict[str, FieldType] = {}
    raw_methods: list[tuple[int, str, list, list, list]] = []

    def make_field_type(elem: str, is_array: bool, line_no: int) -> FieldType:
        if elem == INT_TYPE:
            if is_array:
                raise ParseError(line_no, "int arrays are not supported")
            return FieldType("int")
        return FieldType("array" if is_array else "ref", elem)

    i = 0
    n = len(lines)
    while i < n:
        line_no = i + 1
        line = _strip(lines[i])
        i += 1
        if not line:
            continue
        m = _CLASS_RE.match(line)
        if m:
            name, super_name, body = m.group(1), m.group(2), m.group(3)
            if name in types:
                raise ParseError(line_no, f"duplicate class {name}")
            fields: list[tuple[str, FieldType]] = []
            if body and body.strip():
                for part in body.split(";"):
                    part = part.strip()
                    if not part:
                        continue
                    fm = _FIELD_RE.match(part)
                    if not fm:
                        raise ParseError(line_no, f"bad field declaration {part!r}")
                    fname, elem, arr = fm.group(1), fm.group(2), fm.group(3)
                    if any(f == fname for f, _ in fields):
                        raise ParseError(line_no, f"duplicate field {fname} in {name}")
                    fields.append((fname, make_field_type(elem, bool(arr), line_no)))
            types[name] = TypeDecl(name, super_name, tuple(fields))
            continue
        m = _STATIC_RE.match(line)
        if m:
            name, elem, arr = m.group(1), m.group(2), m.group(3)
            if name in statics:
                raise ParseError(line_no, f"duplicate static {name}")
            statics[name] = make_field_type(elem, bool(arr), line_no)
            continue
        m = _METHOD_RE.match(line)
        if m:
            mname, params_src = m.group(1), m.group(2)
            params: list[tuple[int, str, str, bool]] = []
            if params_src.strip():
                for part in params_src.split(","):
                    pm = _FIELD_RE.match(part.strip())
                    if not pm:
                        raise ParseError(line_no, f"bad parameter {part.strip()!r}")
                    params.append((line_no, pm.group(1), pm.group(2), bool(pm.group(3))))
            local_decls: list[tuple[int, str, str, bool]] = []
            body_lines: list[tuple[int, str]] = []
            closed = False
            while i < n:
                bl_no = i + 1
                bl = _strip(lines[i])
                i += 1
                if bl == "}":
                    closed = True
                    break
                if not bl:
                    continue
                vm = _VAR_RE.match(bl)
                if vm:
                    if body_lines:
                        raise ParseError(bl_no, "var declarations must precede the first block")
                    local_decls.append((bl_no, vm.group(1), vm.group(2), bool(vm.group(3))))
                    continue
                body_lines.append((bl_no, bl))
            if not closed:
                raise ParseError(line_no, f"method {mname} missing closing '}}'")
            raw_methods.append((line_no, mname, params, local_decls, body_lines))
            continue
        raise ParseError(line_no, f"unrecognized declaration {line!r}")

    # Resolve type names in declaration positions.
    for td in types.values():
        if td.super_name is not None and td.super_name not in types:
            raise ParseError(1, f"unresolved supertype {td.super_name} of {td.name}")
        for fname, ft in td.fields:
            if ft.is_heap and ft.elem not in types:
                raise ParseError(1, f"unresolved type {ft.elem} in field {td.name}.{fname}")
    for sname, ft in statics.items():
        if ft.is_heap and ft.elem not in types:
            raise ParseError(1, f"unresolved type {ft.elem} in static {sname}")

    # Inheritance cycles would make resolution non-terminating.
    for name in types:
        seen = {name}
        cur = types[name].super_name
        while cur is not None:
            if cur in seen:
                raise ParseError(1, f"cyclic inheritance through {name}")
            seen.add(cur)
            cur = types[cur].super_name

    methods: dict[str, Method] = {}
    for line_no, mname, raw_params, raw_locals, body_lines in raw_methods:
        if mname in methods:
            raise ParseError(line_no, f"duplicate method {mname}")

        def resolve_var(decl: tuple[int, str, str, bool]) -> tuple[str, FieldType]:
            dl_no, vname, elem, arr = decl
            ft = make_field_type(elem, arr, dl_no)
            if ft.is_heap and ft.elem not in types:
                raise ParseError(dl_no, f"unresolved type {elem} for {vname}")
            return vname, ft

        params = tuple(resolve_var(p) for p in raw_params)
        locals_ = tuple(resolve_var(l) for l in raw_locals)
        names = [p[0] for p in params] + [l[0] for l in locals_]
        dupes = {x for x in names if names.count(x) > 1}
        if dupes:
            raise ParseError(line_no, f"duplicate variable {sorted(dupes)[0]} in {mname}")
        local_names = set(names)

        blocks: list[Block] = []
        cur_label: str | None = None
        cur_stmts: list[Statement] = []

        def flush() -> None:
            nonlocal cur_label, cur_stmts
            if cur_label is not None:
                blocks.append(Block(cur_label, tuple(cur_stmts)))
            cur_label, cur_stmts = None, []

        for bl_no, bl in body_lines:
            lm = _LABEL_RE.match(bl)
            if lm:
                flush()
                cur_label = lm.group(1)
                if any(b.label == cur_label for b in blocks):
                    raise ParseError(bl_no, f"duplicate block label {cur_label}")
                continue
            if cur_label is None:
                raise ParseError(bl_no, "statement before any block label")
            stmt_src = bl[:-1].strip() if bl.endswith(";") else bl
            cur_stmts.append(_parse_statement(stmt_src, bl_no, local_names, statics, types))
        flush()
        if not blocks:
            raise ParseError(line_no, f"method {mname} has no blocks")
        methods[mname] = Method(mname, params, locals_, tuple(blocks))

    return Program(types=types, statics=statics, methods=methods)


def _parse_statement(
    src: str,
    line_no: int,
    local_names: set[str],
    statics: Mapping[str, FieldType],
    types: Mapping[str, TypeDecl],
) -> Statement:
    for pattern, kind in _STMT_RES:
        m = pattern.match(src)
        if not m:
            continue
        g = m.groups()
        if kind == "return":
            return Return(g[0])
        if kind == "goto":
            return Goto(g[0])
        if kind == "nondet":
            return IfNondet(g[0], g[1])
        if kind == "isnull":
            return IfNull(g[0], g[1], g[2])
        if kind == "astore":
            return StoreIndex(g[0], _parse_index(g[1]), g[2])
        if kind == "fstore":
            return StoreField(g[0], g[1], g[2])
        if kind == "newarr":
            if g[1] not in types:
                raise ParseError(line_no, f"unresolved type {g[1]}")
            return AllocArray(g[0], g[1])
        if kind == "new":
            if g[1] not in types:
                raise ParseError(line_no, f"unresolved type {g[1]}")
            return Alloc(g[0], g[1])
        if kind == "null":
            return SetNull(g[0])
        if kind == "call":
            args = tuple(a.strip() for a in g[2].split(",") if a.strip())
            return Call(g[0], g[1], args)
        if kind == "aload":
            return LoadIndex(g[0], g[1], _parse_index(g[2]))
        if kind == "fload":
            return LoadField(g[0], g[1], g[2])
        if kind == "const":
            return ConstInt(g[0], int(g[1]))
        if kind == "add":
            return AddInt(g[0], g[1], g[2])
        if kind == "copy":
            lhs, rhs = g[0], g[1]
            lhs_static = lhs in statics and lhs not in local_names
            rhs_static = rhs in statics and rhs not in local_names
            if lhs_static and rhs_static:
                raise ParseError(line_no, "static-to-static copy is not supported")
            if lhs_static:
                return WriteStatic(lhs, rhs)
            if rhs_static:
                return ReadStatic(lhs, rhs)
            return Copy(lhs, rhs)
    raise ParseError(line_no, f"unrecognized statement {src!r}")


# ---------------------------------------------------------------------------
# Printing (round-trips through parse_program)
# ---------------------------------------------------------------------------


def print_statement(stmt: Statement) -> str:
    if isinstance(stmt, Alloc):
        return f"{stmt.v} = new {stmt.type_name};"
    if isinstance(stmt, AllocArray):
        return f"{stmt.v} = new {stmt.elem}[];"
    if isinstance(stmt, Copy):
        return f"{stmt.v} = {stmt.src};"
    if isinstance(stmt, SetNull):
        return f"{stmt.v} = null;"
    if isinstance(stmt, LoadField):
        return f"{stmt.v} = {stmt.obj}.{stmt.fld};"
    if isinstance(stmt, StoreField):
        return f"{stmt.obj}.{stmt.fld} = {stmt.src};"
    if isinstance(stmt, LoadIndex):
        return f"{stmt.v} = {stmt.arr}[{stmt.index}];"
    if isinstance(stmt, StoreIndex):
        return f"{stmt.arr}[{stmt.index}] = {stmt.src};"
    if isinstance(stmt, ConstInt):
        return f"{stmt.v} = {stmt.value};"
    if isinstance(stmt, AddInt):
        return f"{stmt.v} = {stmt.a} + {stmt.b};"
    if isinstance(stmt, Call):
        return f"{stmt.v} = call {stmt.method}({', '.join(stmt.args)});"
    if isinstance(stmt, Return):
        return f"return {stmt.v};"
    if isinstance(stmt, Goto):
        return f"goto {stmt.target};"
    if isinstance(stmt, IfNondet):
        return f"if nondet goto {stmt.then_target} else {stmt.else_target};"
    if isinstance(stmt, IfNull):
        return f"if isnull {stmt.v} goto {stmt.then_target} else {stmt.else_target};"
    if isinstance(stmt, ReadStatic):
        return f"{stmt.v} = {stmt.static};"
    if isinstance(stmt, WriteStatic):
        return f"{stmt.static} = {stmt.v};"
    raise TypeError(f"unknown statement {stmt!r}")


def print_program(program: Program) -> str:
    out: list[str] = []
    for td in program.types.values():
        head = f"class {td.name}"
        if td.super_name:
            head += f" : {td.super_name}"
        if td.fields:
            body = " ".join(f"{n}: {ft};" for n, ft in td.fields)
            out.append(f"{head} {{ {body} }}")
        else:
            out.append(f"{head};")
    for name, ft in program.statics.items():
        out.append(f"static {name}: {ft};")
    for m in program.methods.values():
        params = ", ".join(f"{n}: {ft}" for n, ft in m.params)
        out.append(f"method {m.name}({params}) {{")
        for n, ft in m.locals:
            out.append(f"  var {n}: {ft};")
        for b in m.blocks:
            out.append(f"{b.label}:")
            for s in b.stmts:
                out.append(f"  {print_statement(s)}")
        out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(program: Program) -> list[str]:
    """Check program invariants; returns one diagnostic per violation."""
    diags: list[str] = []

    def assignable(src: FieldType, dst: FieldType) -> bool:
        if src.kind == "int" or dst.kind == "int":
            return src.kind == dst.kind
        return program.is_subtype(src.type_name, dst.type_name)

    # Field shadowing along inheritance chains.
    for td in program.types.values():
        own = {n for n, _ in td.fields}
        sup = td.super_name
        while sup is not None:
            for n, _ in program.types[sup].fields:
                if n in own:
                    diags.append(f"type {td.name}: field {n} shadows {sup}.{n}")
            sup = program.types[sup].super_name

    if program.main not in program.methods:
        diags.append(f"program: missing method {program.main}")
    elif program.methods[program.main].params:
        diags.append(f"method {program.main}: must have no parameters")

    for m in program.methods.values():
        vt = m.var_types()
        labels = set(m.block_labels())
        where = f"method {m.name}"

        def check_var(v: str, ctx: str) -> FieldType | None:
            ft = vt.get(v)
            if ft is None:
                diags.append(f"{ctx}: undeclared variable {v}")
            return ft

        def check_jump(target: str, ctx: str) -> None:
            if target not in labels:
                diags.append(f"{ctx}: jump to undeclared block {target}")

        def check_index(ix: Index, ctx: str) -> None:
            if isinstance(ix, str):
                ft = check_var(ix, ctx)
                if ft is not None and ft.kind != "int":
                    diags.append(f"{ctx}: index {ix} is not int")

        if not m.blocks:
            diags.append(f"{where}: no blocks")
            continue
        for b in m.blocks:
            ctx0 = f"{where} block {b.label}"
            if not b.stmts:
                diags.append(f"{ctx0}: empty block")
                continue
            for i, s in enumerate(b.stmts):
                ctx = f"{ctx0} stmt {i}"
                last = i == len(b.stmts) - 1
                if is_terminator(s) and not last:
                    diags.append(f"{ctx}: terminator before end of block")
                if last and not is_terminator(s):
                    diags.append(f"{ctx}: block does not end in goto/branch/return")

                if isinstance(s, Alloc):
                    ft = check_var(s.v, ctx)
                    if ft is not None and not assignable(FieldType("ref", s.type_name), ft):
                        diags.append(f"{ctx}: cannot assign new {s.type_name} to {s.v}: {ft}")
                elif isinstance(s, AllocArray):
                    ft = check_var(s.v, ctx)
                    if ft is not None and not assignable(FieldType("array", s.elem), ft):
                        diags.append(f"{ctx}: cannot assign new {s.elem}[] to {s.v}: {ft}")
                elif isinstance(s, Copy):
                    dst, src = check_var(s.v, ctx), check_var(s.src, ctx)
                    if dst and src and not assignable(src, dst):
                        diags.append(f"{ctx}: cannot assign {s.src}: {src} to {s.v}: {dst}")
                elif isinstance(s, SetNull):
                    ft = check_var(s.v, ctx)
                    if ft is not None and not ft.is_heap:
                        diags.append(f"{ctx}: null assigned to non-reference {s.v}")
                elif isinstance(s, LoadField):
                    dst, obj = check_var(s.v, ctx), check_var(s.obj, ctx)
                    if obj is not None:
                        if obj.kind != "ref":
                            diags.append(f"{ctx}: field load from non-class {s.obj}")
                        else:
                            ft = program.field_type(obj.type_name, s.fld)
                            if ft is None:
                                diags.append(f"{ctx}: type {obj.type_name} has no field {s.fld}")
                            elif dst is not None and not assignable(ft, dst):
                                diags.append(f"{ctx}: cannot assign {s.obj}.{s.fld}: {ft} to {s.v}: {dst}")
                elif isinstance(s, StoreField):
                    obj, src = check_var(s.obj, ctx), check_var(s.src, ctx)
                    if obj is not None:
                        if obj.kind != "ref":
                            diags.append(f"{ctx}: field store into non-class {s.obj}")
                        else:
                            ft = program.field_type(obj.type_name, s.fld)
                            if ft is None:
                                diags.append(f"{ctx}: type {obj.type_name} has no field {s.fld}")
                            elif src is not None and not assignable(src, ft):
                                diags.append(f"{ctx}: cannot store {s.src}: {src} into {s.fld}: {ft}")
                elif isinstance(s, LoadIndex):
                    dst, arr = check_var(s.v, ctx), check_var(s.arr, ctx)
                    check_index(s.index, ctx)
                    if arr is not None:
                        if arr.kind != "array":
                            diags.append(f"{ctx}: index load from non-array {s.arr}")
                        elif dst is not None and not assignable(FieldType("ref", arr.elem), dst):
                            diags.append(f"{ctx}: cannot assign {s.arr}[]: {arr.elem} to {s.v}: {dst}")
                elif isinstance(s, StoreIndex):
                    arr, src = check_var(s.arr, ctx), check_var(s.src, ctx)
                    check_index(s.index, ctx)
                    if arr is not None:
                        if arr.kind != "array":
                            diags.append(f"{ctx}: index store into non-array {s.arr}")
                        elif src is not None and not assignable(src, FieldType("ref", arr.elem)):
                            diags.append(f"{ctx}: cannot store {s.src}: {src} into {s.arr}: {arr}")
                elif isinstance(s, ConstInt):
                    ft = check_var(s.v, ctx)
                    if ft is not None and ft.kind != "int":
                        diags.append(f"{ctx}: int constant assigned to {s.v}: {ft}")
                elif isinstance(s, AddInt):
                    for v in (s.v, s.a, s.b):
                        ft = check_var(v, ctx)
                        if ft is not None and ft.kind != "int":
                            diags.append(f"{ctx}: {v} is not int")
                elif isinstance(s, Call):
                    dst = check_var(s.v, ctx)
                    callee = program.methods.get(s.method)
                    if callee is None:
                        diags.append(f"{ctx}: call to undeclared method {s.method}")
                    else:
                        if len(s.args) != len(callee.params):
                            diags.append(f"{ctx}: {s.method} expects {len(callee.params)} args, got {len(s.args)}")
                        else:
                            for a, (_, pt) in zip(s.args, callee.params):
                                at = check_var(a, ctx)
                                if at is not None and not assignable(at, pt):
                                    diags.append(f"{ctx}: argument {a}: {at} not assignable to {pt}")
                        if dst is not None:
                            cvt = callee.var_types()
                            for cb in callee.blocks:
                                for cs in cb.stmts:
                                    if isinstance(cs, Return) and cs.v in cvt:
                                        if not assignable(cvt[cs.v], dst):
                                            diags.append(
                                                f"{ctx}: {s.method} may return {cvt[cs.v]}, "
                                                f"not assignable to {s.v}: {dst}"
                                            )
                elif isinstance(s, Return):
                    check_var(s.v, ctx)
                elif isinstance(s, Goto):
                    check_jump(s.target, ctx)
                elif isinstance(s, IfNondet):
                    check_jump(s.then_target, ctx)
                    check_jump(s.else_target, ctx)
                elif isinstance(s, IfNull):
                    ft = check_var(s.v, ctx)
                    if ft is not None and not ft.is_heap:
                        diags.append(f"{ctx}: isnull on non-reference {s.v}")
                    check_jump(s.then_target, ctx)
                    check_jump(s.else_target, ctx)
                elif isinstance(s, ReadStatic):
                    dst = check_var(s.v, ctx)
                    st = program.statics.get(s.static)
                    if st is None:
                        diags.append(f"{ctx}: undeclared static {s.static}")
                    elif dst is not None and not assignable(st, dst):
                        diags.append(f"{ctx}: cannot assign static {s.static}: {st} to {s.v}: {dst}")
                elif isinstance(s, WriteStatic):
                    src = check_var(s.v, ctx)
                    st = program.statics.get(s.static)
                    if st is None:
                        diags.append(f"{ctx}: undeclared static {s.static}")
                    elif src is not None and not assignable(src, st):
                        diags.append(f"{ctx}: cannot store {s.v}: {src} into static {s.static}: {st}")
    return diags
