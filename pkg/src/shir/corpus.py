"""Access to the bundled corpus programs.

Each program is a `.shir` file shipped as package data.  TAGS records
what each program exercises; the suite asserts the corpus covers lists,
trees, sharing, cycles, arrays, recursion, and loops.
"""

from __future__ import annotations

from importlib.resources import files

from .ir import Program, parse_program

TAGS: dict[str, frozenset[str]] = {
    "expr_tree": frozenset({"trees", "arrays", "sharing"}),
    "list_fuel": frozenset({"lists", "loops"}),
    "list_nondet": frozenset({"lists", "loops", "nondet"}),
    "shared_data": frozenset({"lists", "loops", "sharing"}),
    "cycle_ring": frozenset({"cycles"}),
    "dag_share": frozenset({"sharing"}),
    "tree_build": frozenset({"trees", "recursion", "statics"}),
    "mutual_rec": frozenset({"lists", "recursion", "statics"}),
    "calls_chain": frozenset({"calls"}),
    "array_fill": frozenset({"arrays", "loops", "sharing"}),
    "restore_loss": frozenset({"precision-loss"}),
    "shape_loss": frozenset({"precision-loss"}),
    "traverse": frozenset({"lists", "loops"}),
    "static_swap": frozenset({"statics", "calls"}),
}


def corpus_names() -> tuple[str, ...]:
    return tuple(sorted(TAGS))


def corpus_text(name: str) -> str:
    return (files("shir") / "corpus" / f"{name}.shir").read_text(encoding="utf-8")


def corpus_program(name: str) -> Program:
    return parse_program(corpus_text(name))


def corpus_path(name: str) -> str:
    """Filesystem path of a bundled program (the package is installed
    from a plain directory, so resources are real files)."""
    return str(files("shir") / "corpus" / f"{name}.shir")
