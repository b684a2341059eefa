"""Graphical identification: selection diagrams, d-separation, transport.

The diagram DSL is line-oriented: ``A -> B`` edges (several per line are
allowed), plus annotations ``treatment A``, ``outcome Y``,
``selection S``, ``latent U`` and bare ``node N`` declarations for
isolated nodes.  A node literally named ``S`` is taken as the selection
node when no annotation says otherwise.

d-separation runs the linear-time reachability algorithm over
(node, direction) states.  A small exact discrete structural model with
CPT surgery serves as the numeric oracle for every graphical criterion.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CycleDetected,
    DomainTooLarge,
    DuplicateEdge,
    NoSelectionNode,
    UnknownNode,
)

TRANSPORTABLE = "transportable"
POST_TREATMENT = "post-treatment-transportable"
NOT_TRANSPORTABLE = "not-transportable"


@dataclass(frozen=True)
class SelectionDiagram:
    """Directed acyclic graph with observed/latent flags and designated
    treatment, outcome and selection nodes (all optional)."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    latent: frozenset = frozenset()
    selection: str | None = None
    treatment: str | None = None
    outcome: str | None = None

    def __post_init__(self):
        known = set(self.nodes)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise UnknownNode(f"edge ({a}, {b}) references an undeclared node")
        for name in (self.selection, self.treatment, self.outcome):
            if name is not None and name not in known:
                raise UnknownNode(f"designated node {name!r} is not in the graph")
        unknown_latent = set(self.latent) - known
        if unknown_latent:
            raise UnknownNode(f"latent nodes {sorted(unknown_latent)} are not in the graph")
        if len(set(self.edges)) != len(self.edges):
            raise DuplicateEdge("edge list contains duplicates")
        if self.treatment is not None and self.treatment == self.outcome:
            raise ValueError("treatment and outcome must differ")
        _topological_order(self.nodes, self.edges)  # raises CycleDetected

    # -- adjacency ----------------------------------------------------------

    def parents(self, node: str) -> tuple[str, ...]:
        self._check_nodes([node])
        return tuple(a for a, b in self.edges if b == node)

    def children(self, node: str) -> tuple[str, ...]:
        self._check_nodes([node])
        return tuple(b for a, b in self.edges if a == node)

    def observed(self) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if n not in self.latent)

    @property
    def selection_role(self) -> str | None:
        """Selection nodes with only outgoing edges model population
        differences; incoming edges mean preferential sampling instead."""
        if self.selection is None:
            return None
        return "selection-bias" if self.parents(self.selection) else "transportability"

    def _check_nodes(self, names):
        unknown = set(names) - set(self.nodes)
        if unknown:
            raise UnknownNode(f"unknown node(s) {sorted(unknown)}")

    # -- mutilation ---------------------------------------------------------

    def without_incoming(self, targets) -> "SelectionDiagram":
        targets = set(targets)
        self._check_nodes(targets)
        kept = tuple(e for e in self.edges if e[1] not in targets)
        return replace(self, edges=kept)

    def without_outgoing(self, sources) -> "SelectionDiagram":
        sources = set(sources)
        self._check_nodes(sources)
        kept = tuple(e for e in self.edges if e[0] not in sources)
        return replace(self, edges=kept)

    def ancestors(self, nodes) -> set:
        self._check_nodes(nodes)
        seen = set()
        queue = deque(nodes)
        while queue:
            node = queue.popleft()
            for parent in self.parents(node):
                if parent not in seen:
                    seen.add(parent)
                    queue.append(parent)
        return seen

    def descendants(self, nodes) -> set:
        self._check_nodes(nodes)
        seen = set()
        queue = deque(nodes)
        while queue:
            node = queue.popleft()
            for child in self.children(node):
                if child not in seen:
                    seen.add(child)
                    queue.append(child)
        return seen


def _topological_order(nodes, edges) -> list:
    in_deg = {n: 0 for n in nodes}
    children = {n: [] for n in nodes}
    for a, b in edges:
        in_deg[b] += 1
        children[a].append(b)
    ready = deque(n for n in nodes if in_deg[n] == 0)
    order = []
    while ready:
        node = ready.popleft()
        order.append(node)
        for child in children[node]:
            in_deg[child] -= 1
            if in_deg[child] == 0:
                ready.append(child)
    if len(order) != len(nodes):
        raise CycleDetected("graph contains a directed cycle")
    return order


_ANNOTATIONS = ("treatment", "outcome", "selection", "latent", "node")


def parse_graph_dsl(text: str) -> SelectionDiagram:
    """Parse the line-oriented diagram DSL into a validated diagram."""
    edges = []
    declared = []
    annotations = {"latent": []}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        i = 0
        while i < len(tokens):
            token = tokens[i]
            if token in _ANNOTATIONS:
                if i + 1 >= len(tokens):
                    raise UnknownNode(f"annotation {token!r} needs a node name")
                name = tokens[i + 1]
                if token == "latent":
                    annotations["latent"].append(name)
                elif token == "node":
                    declared.append(name)
                else:
                    annotations[token] = name
                i += 2
                continue
            if i + 2 < len(tokens) and tokens[i + 1] != "->":
                raise UnknownNode(f"cannot parse line {raw!r}")
            if i + 2 >= len(tokens) or tokens[i + 1] != "->":
                raise UnknownNode(f"cannot parse line {raw!r}")
            edge = (tokens[i], tokens[i + 2])
            if edge in edges:
                raise DuplicateEdge(f"duplicate edge {edge[0]} -> {edge[1]}")
            edges.append(edge)
            i += 3

    nodes = list(dict.fromkeys(declared))
    for a, b in edges:
        for name in (a, b):
            if name not in nodes:
                nodes.append(name)
    for role in ("treatment", "outcome", "selection"):
        name = annotations.get(role)
        if name is not None and name not in nodes:
            raise UnknownNode(f"{role} annotation names unknown node {name!r}")
    for name in annotations["latent"]:
        if name not in nodes:
            raise UnknownNode(f"latent annotation names unknown node {name!r}")

    selection = annotations.get("selection")
    if selection is None and "S" in nodes:
        selection = "S"
    return SelectionDiagram(
        nodes=tuple(nodes),
        edges=tuple(edges),
        latent=frozenset(annotations["latent"]),
        selection=selection,
        treatment=annotations.get("treatment"),
        outcome=annotations.get("outcome"),
    )


# -- d-separation ------------------------------------------------------------


def _reachable(graph: SelectionDiagram, sources, given) -> set:
    """Nodes reachable from `sources` along trails left active by `given`."""
    given = set(given)
    blocked_or_ancestor = given | graph.ancestors(given)
    parents = {n: graph.parents(n) for n in graph.nodes}
    children = {n: graph.children(n) for n in graph.nodes}

    visited = set()
    reached = set()
    queue = deque((s, "up") for s in sources)
    while queue:
        node, direction = queue.popleft()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in given:
            reached.add(node)
        if direction == "up" and node not in given:
            for parent in parents[node]:
                queue.append((parent, "up"))
            for child in children[node]:
                queue.append((child, "down"))
        elif direction == "down":
            if node not in given:
                for child in children[node]:
                    queue.append((child, "down"))
            if node in blocked_or_ancestor:
                for parent in parents[node]:
                    queue.append((parent, "up"))
    return reached


def d_separated(graph: SelectionDiagram, set_a, set_b, given=()) -> bool:
    """True when `given` blocks every path between `set_a` and `set_b`.

    A path is blocked when it contains an arrow-emitting node inside
    `given`, or a collider outside `given` with no descendant in it.
    """
    set_a, set_b, given = set(set_a), set(set_b), set(given)
    graph._check_nodes(set_a | set_b | given)
    if set_a & set_b or set_a & given or set_b & given:
        raise ValueError("node sets must be disjoint")
    return not (_reachable(graph, set_a, given) & set_b)


def backdoor_admissible_sets(
    graph: SelectionDiagram, treatment: str, outcome: str, max_size: int | None = None
) -> list:
    """All observed adjustment sets that close every backdoor path.

    Candidates exclude the treatment, the outcome, every descendant of
    the treatment and all latent nodes; a candidate set qualifies when
    it d-separates treatment from outcome after removing the edges the
    treatment emits.  Output is ordered by size then lexicographically.
    """
    graph._check_nodes([treatment, outcome])
    forbidden = graph.descendants([treatment]) | {treatment, outcome}
    candidates = sorted(n for n in graph.observed() if n not in forbidden)
    if max_size is None:
        max_size = len(candidates)
    mutilated = graph.without_outgoing([treatment])
    admissible = []
    for size in range(0, max_size + 1):
        for subset in itertools.combinations(candidates, size):
            if d_separated(mutilated, {treatment}, {outcome}, set(subset)):
                admissible.append(tuple(subset))
    return admissible


def s_admissible(graph: SelectionDiagram, adjustment, treatment: str, outcome: str) -> bool:
    """True when the adjustment set blocks every path from the selection
    node to the outcome once all edges into the treatment are removed."""
    if graph.selection is None:
        raise NoSelectionNode("diagram has no selection node")
    mutilated = graph.without_incoming([treatment])
    return d_separated(mutilated, {graph.selection}, {outcome}, set(adjustment))


@dataclass(frozen=True)
class TransportVerdict:
    """Outcome of a transportability query."""

    status: str
    formula: str | None
    adjustment: tuple[str, ...]
    witness: str | None = None

    @property
    def transportable(self) -> bool:
        return self.status in (TRANSPORTABLE, POST_TREATMENT)


def _active_witness_path(graph: SelectionDiagram, start: str, end: str, given) -> str:
    """One unblocked path from start to end given the adjustment set."""
    given = set(given)
    activated = given | graph.ancestors(given)
    adjacency = {n: [] for n in graph.nodes}
    for a, b in graph.edges:
        adjacency[a].append((b, "->"))
        adjacency[b].append((a, "<-"))

    def is_active(prev_dir, node, next_dir):
        collider = prev_dir == "->" and next_dir == "<-"
        if collider:
            return node in activated
        return node not in given

    stack = [(start, [start], [])]
    while stack:
        node, path, dirs = stack.pop()
        for nxt, direction in sorted(adjacency[node], reverse=True):
            if nxt in path:
                continue
            if dirs and not is_active(dirs[-1], node, direction):
                continue
            if nxt == end:
                parts = []
                full_dirs = dirs + [direction]
                for i, name in enumerate(path):
                    parts.append(name)
                    parts.append(full_dirs[i])
                parts.append(end)
                return " ".join(parts)
            stack.append((nxt, path + [nxt], dirs + [direction]))
    return ""


def transport_formula(
    graph: SelectionDiagram, treatment: str, outcome: str, adjustment
) -> TransportVerdict:
    """Decide transportability of P(outcome | do(treatment)) and emit the
    re-calibration formula.

    Pre-treatment adjustment sets give the plain formula weighting the
    source-population conditionals by the target covariate marginals;
    sets containing descendants of the treatment weight by the
    treatment-conditional marginal instead.
    """
    if graph.selection is None:
        raise NoSelectionNode("diagram has no selection node")
    adjustment = tuple(sorted(set(adjustment)))
    graph._check_nodes(set(adjustment) | {treatment, outcome})

    if not s_admissible(graph, adjustment, treatment, outcome):
        witness = _active_witness_path(
            graph.without_incoming([treatment]), graph.selection, outcome, adjustment
        )
        return TransportVerdict(
            status=NOT_TRANSPORTABLE, formula=None, adjustment=adjustment, witness=witness
        )

    a = treatment.lower()
    y = outcome
    s = graph.selection
    if not adjustment:
        formula = f"P({y}|do({a})) = P({y}|do({a}),{s}=1)"
        return TransportVerdict(status=TRANSPORTABLE, formula=formula, adjustment=adjustment)

    x = ",".join(n.lower() for n in adjustment)
    post_treatment = bool(set(adjustment) & graph.descendants([treatment]))
    marginal = f"P({x}|{a})" if post_treatment else f"P({x})"
    formula = f"P({y}|do({a})) = Σ_{{{x}}} P({y}|do({a}),{x},{s}=1){marginal}"
    status = POST_TREATMENT if post_treatment else TRANSPORTABLE
    return TransportVerdict(status=status, formula=formula, adjustment=adjustment)


# -- exact discrete structural model (numeric oracle) ------------------------

_MAX_JOINT_STATES = 1_000_000


@dataclass(frozen=True)
class DiscreteScm:
    """Finite structural model: per-node CPTs over integer domains 0..k-1.

    ``cpts[v]`` has shape (*parent domain sizes, domain size of v) in the
    order given by ``parents[v]``.
    """

    domains: dict
    parents: dict
    cpts: dict = field(repr=False)

    def __post_init__(self):
        _topological_order(
            tuple(self.domains),
            tuple((p, v) for v, ps in self.parents.items() for p in ps),
        )
        for node, size in self.domains.items():
            ps = self.parents.get(node, ())
            expected = tuple(self.domains[p] for p in ps) + (size,)
            cpt = np.asarray(self.cpts[node], dtype=float)
            if cpt.shape != expected:
                raise ValueError(f"CPT for {node} has shape {cpt.shape}, want {expected}")
            sums = cpt.sum(axis=-1)
            if not np.allclose(sums, 1.0, atol=1e-12):
                raise ValueError(f"CPT rows for {node} must sum to 1")

    @property
    def order(self) -> tuple:
        return tuple(self.domains)

    def joint(self) -> np.ndarray:
        """Exact joint distribution as an array indexed in node order."""
        order = self.order
        sizes = [self.domains[n] for n in order]
        states = 1
        for size in sizes:
            states *= size
        if states > _MAX_JOINT_STATES:
            raise DomainTooLarge(f"{states} joint states exceed the enumeration cap")
        joint = np.ones(sizes)
        for node in order:
            axes_nodes = list(self.parents.get(node, ())) + [node]
            positions = [order.index(nm) for nm in axes_nodes]
            perm = np.argsort(positions)
            arr = np.transpose(np.asarray(self.cpts[node], dtype=float), perm)
            shape = [1] * len(order)
            for nm in axes_nodes:
                shape[order.index(nm)] = self.domains[nm]
            joint = joint * arr.reshape(shape)
        return joint

    def intervene(self, assignments: dict) -> "DiscreteScm":
        """Replace the mechanism of each assigned node by a point mass."""
        unknown = set(assignments) - set(self.domains)
        if unknown:
            raise UnknownNode(f"unknown node(s) {sorted(unknown)}")
        parents = dict(self.parents)
        cpts = dict(self.cpts)
        for node, value in assignments.items():
            size = self.domains[node]
            if not 0 <= value < size:
                raise ValueError(f"{node}={value} outside domain of size {size}")
            point = np.zeros(size)
            point[value] = 1.0
            parents[node] = ()
            cpts[node] = point
        return DiscreteScm(domains=dict(self.domains), parents=parents, cpts=cpts)


def eval_discrete_scm(
    scm: DiscreteScm,
    intervention: dict | None,
    query: str,
    given: dict | None = None,
) -> float:
    """Exact interventional expectation E[query | given, do(intervention)].

    Domain values are their integer indices.  Computed by CPT surgery
    followed by full joint enumeration.
    """
    model = scm.intervene(intervention) if intervention else scm
    if query not in model.domains:
        raise UnknownNode(f"unknown query node {query!r}")
    joint = model.joint()
    order = list(model.order)
    if given:
        unknown = set(given) - set(order)
        if unknown:
            raise UnknownNode(f"unknown node(s) {sorted(unknown)}")
        for node in sorted(given, key=order.index, reverse=True):
            joint = np.take(joint, given[node], axis=order.index(node))
            order.remove(node)
    total = joint.sum()
    if total <= 0:
        raise ValueError("conditioning event has probability zero")
    axis = order.index(query)
    marginal = joint.sum(axis=tuple(i for i in range(joint.ndim) if i != axis))
    values = np.arange(scm.domains[query])
    return float(values @ marginal / total)
