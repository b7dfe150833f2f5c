"""Causal-consistency checks on DAGs: acyclicity, d-separation, agreement of
a model's factorization with a DAG, and backdoor identifiability of
single-intervention queries."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

MAX_IDENTIFY_NODES = 12


class Dag:
    """Directed graph with named nodes; acyclicity is checked by :func:`is_acyclic`."""

    def __init__(self, nodes=(), edges=()):
        self.nodes = set(nodes)
        self.edges = set()
        for parent, child in edges:
            if parent == child:
                raise ValueError(f"self-loop on {parent!r}")
            self.nodes.update((parent, child))
            self.edges.add((parent, child))

    @classmethod
    def parse(cls, text: str) -> "Dag":
        """Edge-list text with one ``parent -> child`` per line.

        A line holding a single name declares an isolated node; blank lines
        and ``#`` comments are ignored.
        """
        nodes, edges = set(), []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "->" in line:
                parts = [p.strip() for p in line.split("->")]
                if len(parts) != 2 or not all(parts) or any(" " in p for p in parts):
                    raise ValueError(f"line {lineno}: expected 'parent -> child'")
                edges.append(tuple(parts))
            elif " " in line:
                raise ValueError(f"line {lineno}: expected 'parent -> child'")
            else:
                nodes.add(line)
        return cls(nodes, edges)

    @classmethod
    def read(cls, path) -> "Dag":
        with open(path) as fh:
            return cls.parse(fh.read())

    def parents(self, node) -> set:
        return {p for p, c in self.edges if c == node}

    def children(self, node) -> set:
        return {c for p, c in self.edges if p == node}

    def descendants(self, node) -> set:
        """Strict descendants of ``node``."""
        seen, stack = set(), [node]
        while stack:
            for c in self.children(stack.pop()):
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    def ancestors(self, node) -> set:
        seen, stack = set(), [node]
        while stack:
            for p in self.parents(stack.pop()):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def __repr__(self):
        return f"Dag(nodes={sorted(self.nodes)}, edges={sorted(self.edges)})"


def is_acyclic(dag: Dag) -> bool:
    """Kahn elimination: acyclic iff every node can be removed."""
    indeg = {n: 0 for n in dag.nodes}
    for p, c in dag.edges:
        if p not in indeg or c not in indeg:
            raise ValueError(f"edge {p!r} -> {c!r} uses an unknown node")
        indeg[c] += 1
    queue = deque(n for n, d in indeg.items() if d == 0)
    removed = 0
    while queue:
        n = queue.popleft()
        removed += 1
        for c in dag.children(n):
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return removed == len(dag.nodes)


def _as_set(x) -> set:
    if isinstance(x, str):
        return {x}
    return set(x)


def d_separated(dag: Dag, X, Y, Z=()) -> bool:
    """Whether every path between ``X`` and ``Y`` is blocked given ``Z``.

    Reachability search over (node, direction) states: a collider passes
    only when it or one of its descendants is in ``Z``, other nodes pass
    only when they are not in ``Z``.
    """
    X, Y, Z = _as_set(X), _as_set(Y), _as_set(Z)
    unknown = (X | Y | Z) - dag.nodes
    if unknown:
        raise ValueError(f"unknown nodes {sorted(unknown)}")
    if X & Y or X & Z or Y & Z:
        raise ValueError("X, Y and Z must be disjoint")
    # nodes with a descendant (or themselves) in Z open colliders
    opens_collider = set(Z)
    for z in Z:
        opens_collider |= dag.ancestors(z)
    # direction "up": arrived from a child; "down": arrived from a parent
    start = [(x, "up") for x in X]
    visited = set()
    queue = deque(start)
    while queue:
        node, direction = queue.popleft()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node in Y:
            return False
        if direction == "up":
            if node in Z:
                continue
            for p in dag.parents(node):
                queue.append((p, "up"))
            for c in dag.children(node):
                queue.append((c, "down"))
        else:
            if node not in Z:
                for c in dag.children(node):
                    queue.append((c, "down"))
            if node in opens_collider:
                for p in dag.parents(node):
                    queue.append((p, "up"))
    return True


class FactorizationSpec:
    """Conditionals ``(variable, parents)`` claimed by a model, parameters excluded."""

    def __init__(self, conditionals=()):
        items = conditionals.items() if isinstance(conditionals, dict) else conditionals
        self.conditionals = {}
        for var, parents in items:
            if var in self.conditionals:
                raise ValueError(f"variable {var!r} has two conditionals")
            self.conditionals[var] = frozenset(parents)

    @classmethod
    def parse(cls, text: str) -> "FactorizationSpec":
        """Lines ``var | parent1 parent2 ...``; an empty right side means no parents."""
        items = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.count("|") != 1:
                raise ValueError(f"line {lineno}: expected 'var | parents'")
            var, rest = (p.strip() for p in line.split("|"))
            if not var or " " in var:
                raise ValueError(f"line {lineno}: bad variable name")
            items.append((var, rest.split()))
        return cls(items)

    @classmethod
    def read(cls, path) -> "FactorizationSpec":
        with open(path) as fh:
            return cls.parse(fh.read())

    @classmethod
    def from_dag(cls, dag: Dag) -> "FactorizationSpec":
        return cls([(n, dag.parents(n)) for n in sorted(dag.nodes)])

    @property
    def variables(self) -> set:
        return set(self.conditionals)

    def __eq__(self, other):
        return isinstance(other, FactorizationSpec) and self.conditionals == other.conditionals

    def __repr__(self):
        body = ", ".join(f"{v} | {' '.join(sorted(p))}".rstrip() for v, p in sorted(self.conditionals.items()))
        return f"FactorizationSpec({body})"


def _check_spec_nodes(dag: Dag, spec: FactorizationSpec):
    used = set(spec.conditionals)
    for parents in spec.conditionals.values():
        used |= parents
    unknown = used - dag.nodes
    if unknown:
        raise ValueError(f"factorization uses unknown variables {sorted(unknown)}")


def factorization_consistent(dag: Dag, spec: FactorizationSpec):
    """Whether the factorization's conditionals are exactly the DAG's Markov factorization.

    Returns ``(consistent, violations)`` with human-readable violations.
    """
    _check_spec_nodes(dag, spec)
    violations = []
    for node in sorted(dag.nodes):
        if node not in spec.conditionals:
            violations.append(f"missing conditional for {node}")
            continue
        claimed, actual = spec.conditionals[node], dag.parents(node)
        if claimed != actual:
            violations.append(
                f"{node}: parents {sorted(claimed)} in the model, {sorted(actual)} in the DAG"
            )
    return not violations, violations


@dataclass
class Identification:
    identifiable: object  # True or "unknown"
    adjustment_set: frozenset | None
    required_conditionals_present: bool

    def __iter__(self):
        return iter((self.identifiable, self.adjustment_set, self.required_conditionals_present))


def _is_backdoor_admissible(dag: Dag, x, y, Z: set) -> bool:
    # every path leaving x through a parent must be blocked: equivalently, x and
    # y are d-separated given Z in the graph with x's outgoing edges removed
    cut = Dag(dag.nodes, [(p, c) for p, c in dag.edges if p != x])
    return d_separated(cut, {x}, {y}, Z)


def _conditionals_cover(dag: Dag, spec: FactorizationSpec, x, y, Z: set) -> bool:
    """Whether the factorization supplies the pieces of the adjustment formula.

    Starting from ``y`` and ``Z`` and following the model's own parent
    sets, every variable reached before hitting ``x`` must have a
    conditional, and when ``y`` depends causally on ``x`` that walk from
    ``y`` must reach ``x``.
    """
    conds = spec.conditionals
    if y not in conds or any(z not in conds for z in Z):
        return False

    def walk(starts):
        seen, stack = set(), list(starts)
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            if v != x:
                if v not in conds:
                    return None
                stack.extend(conds[v])
        return seen

    reached = walk([y, *Z])
    if reached is None:
        return False
    if y in dag.descendants(x):
        return x in walk([y])
    return True


def query_identifiable(dag: Dag, spec: FactorizationSpec, do, outcome) -> Identification:
    """Backdoor identifiability of ``p(outcome | do(x))`` for a single node ``x``.

    Candidate adjustment sets are subsets of the non-descendants of ``x``,
    searched smallest first. When none is admissible the verdict is
    ``"unknown"`` because other identification routes are not searched.
    """
    do = _as_set(do)
    if len(do) != 1:
        raise ValueError("exactly one intervention node is supported")
    (x,) = do
    y = outcome
    if x == y:
        raise ValueError("the outcome cannot be the intervention node")
    if {x, y} - dag.nodes:
        raise ValueError("query uses unknown nodes")
    if len(dag.nodes) > MAX_IDENTIFY_NODES:
        raise ValueError(f"graphs above {MAX_IDENTIFY_NODES} nodes are not searched")
    if not is_acyclic(dag):
        raise ValueError("graph has a cycle")
    _check_spec_nodes(dag, spec)
    candidates = sorted(dag.nodes - dag.descendants(x) - {x, y})
    first = None
    for size in range(len(candidates) + 1):
        for Z in itertools.combinations(candidates, size):
            Z = set(Z)
            if not _is_backdoor_admissible(dag, x, y, Z):
                continue
            if _conditionals_cover(dag, spec, x, y, Z):
                return Identification(True, frozenset(Z), True)
            if first is None:
                first = frozenset(Z)
    if first is not None:
        return Identification(True, first, False)
    return Identification("unknown", None, False)
