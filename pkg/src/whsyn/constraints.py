"""Weakly-hard constraints and their lifted automata.

A weakly-hard graph reads words over ``{0, ..., r}`` where one letter ``l``
stands for ``l`` consecutive deadline misses followed by one hit.  Nodes are
equivalence classes of hit/miss histories, obtained by minimizing the naive
history automaton.
"""
from __future__ import annotations

import enum
import json
import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Optional, Sequence

log = logging.getLogger(__name__)

LANGUAGE_MAX_LENGTH = 12


class ConstraintError(ValueError):
    """Invalid or unsupported weakly-hard constraint."""


class InadmissibleLabel(KeyError):
    """A miss burst that the constraint forbids at the current history."""


class NonConvergent(RuntimeError):
    """The label-0 walk did not collapse onto a single node."""


class Kind(str, enum.Enum):
    ANY_MISS = "AnyMiss"
    ANY_HIT = "AnyHit"
    ROW_MISS = "RowMiss"


@dataclass(frozen=True)
class WHConstraint:
    """``kind`` with parameter ``k`` (misses, hits or row length) and window ``s``.

    ``s`` is ``None`` for RowMiss.
    """

    kind: Kind
    k: int
    s: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        k, s = self.k, self.s
        if not isinstance(k, int) or k < 0:
            raise ConstraintError(f"{self.kind.value}: parameter must be a nonnegative int, got {k!r}")
        if self.kind is Kind.ROW_MISS:
            if s is not None:
                raise ConstraintError("RowMiss takes no window length")
            return
        if not isinstance(s, int) or s < 1:
            raise ConstraintError(f"{self.kind.value}: window length must be a positive int, got {s!r}")
        if self.kind is Kind.ANY_MISS and not k < s:
            raise ConstraintError(f"AnyMiss<{k},{s}> needs r < s (r = s allows unbounded misses)")
        if self.kind is Kind.ANY_HIT and not 0 < k <= s:
            raise ConstraintError(f"AnyHit<{k},{s}> needs 0 < h <= s")

    @classmethod
    def any_miss(cls, r: int, s: int) -> "WHConstraint":
        return cls(Kind.ANY_MISS, r, s)

    @classmethod
    def any_hit(cls, h: int, s: int) -> "WHConstraint":
        return cls(Kind.ANY_HIT, h, s)

    @classmethod
    def row_miss(cls, r: int) -> "WHConstraint":
        return cls(Kind.ROW_MISS, r)

    @property
    def r(self) -> int:
        """Misses per window of the equivalent AnyMiss form."""
        return convert(self).k

    def to_dict(self) -> dict:
        if self.kind is Kind.ROW_MISS:
            return {"kind": self.kind.value, "r": self.k}
        key = "h" if self.kind is Kind.ANY_HIT else "r"
        return {"kind": self.kind.value, key: self.k, "s": self.s}

    @classmethod
    def from_dict(cls, d: dict) -> "WHConstraint":
        kind = d.get("kind", "AnyMiss")
        if kind == "RowHit":
            raise ConstraintError("RowHit constraints are not supported; convert to a graph externally")
        try:
            kind = Kind(kind)
        except ValueError:
            raise ConstraintError(f"unknown constraint kind {kind!r}") from None
        if kind is Kind.ANY_HIT:
            return cls(kind, d["h"], d["s"])
        if kind is Kind.ROW_MISS:
            return cls(kind, d["r"])
        return cls(kind, d["r"], d["s"])

    def __str__(self):
        if self.kind is Kind.ROW_MISS:
            return f"RowMiss<{self.k}>"
        return f"{self.kind.value}<{self.k},{self.s}>"


def convert(c: WHConstraint) -> WHConstraint:
    """Return the equivalent AnyMiss constraint."""
    if c.kind is Kind.ANY_MISS:
        return c
    if c.kind is Kind.ANY_HIT:
        return WHConstraint.any_miss(c.s - c.k, c.s)
    return WHConstraint.any_miss(c.k, c.k + 1)


def admits(mu: Sequence[int], c: WHConstraint) -> bool:
    """True iff every window of ``s`` consecutive entries holds at most ``r`` misses.

    Sequences shorter than ``s`` are checked as one window.
    """
    c = convert(c)
    r, s = c.k, c.s
    zeros = 0
    for t, b in enumerate(mu):
        zeros += b == 0
        if t >= s:
            zeros -= mu[t - s] == 0
        if zeros > r:
            return False
    return True


def predicted_size(c: WHConstraint) -> tuple[int, int]:
    """Closed-form ``(n_nodes, n_edges)`` of the minimized graph."""
    c = convert(c)
    return comb(c.s - 1, c.k), comb(c.s, c.k)


def predicted_label_counts(c: WHConstraint) -> dict[int, int]:
    """Number of edges carrying each label ``l``: ``C(s-1-l, r-l)``."""
    c = convert(c)
    return {l: comb(c.s - 1 - l, c.k - l) for l in range(c.k + 1)}


@dataclass(frozen=True)
class WHGraph:
    """Deterministic edge-labeled graph; ``edges`` holds ``(src, dst, label)``."""

    nodes: tuple
    edges: tuple
    initial: int
    constraint: Optional[WHConstraint] = None
    _succ: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        succ = {v: {} for v in self.nodes}
        for i, j, l in self.edges:
            if i not in succ or j not in succ:
                raise ValueError(f"edge ({i},{j},{l}) references an unknown node")
            if l in succ[i]:
                raise ValueError(f"node {i} has two edges labeled {l}")
            succ[i][l] = j
        object.__setattr__(self, "_succ", succ)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def max_label(self) -> int:
        return max(l for _, _, l in self.edges)

    def successors(self, node) -> dict:
        return self._succ[node]

    def transition_table(self):
        """Dense ``(n_nodes, max_label+1)`` int table, -1 where no edge exists.

        Requires nodes to be ``0..n-1``.
        """
        import numpy as np

        table = -np.ones((self.n_nodes, self.max_label + 1), dtype=np.int64)
        for i, j, l in self.edges:
            table[i, l] = j
        return table

    def check(self) -> None:
        """Assert the structural invariants: label 0 everywhere, reachable, on a cycle."""
        for v in self.nodes:
            if 0 not in self._succ[v]:
                raise AssertionError(f"node {v} has no label-0 edge")
        if any(l < 0 for _, _, l in self.edges):
            raise AssertionError("negative label")
        seen = _reachable(self._succ, self.initial)
        if seen != set(self.nodes):
            raise AssertionError(f"unreachable nodes: {set(self.nodes) - seen}")
        for v in self.nodes:
            # on a cycle: v is reachable from one of its successors
            if not any(v in _reachable(self._succ, w) for w in self._succ[v].values()):
                raise AssertionError(f"node {v} is not on a cycle")

    def to_json(self) -> dict:
        return {
            "constraint": None if self.constraint is None else self.constraint.to_dict(),
            "nodes": list(self.nodes),
            "initial": self.initial,
            "edges": [{"from": i, "to": j, "label": l} for i, j, l in self.edges],
        }

    @classmethod
    def from_json(cls, d: dict) -> "WHGraph":
        c = d.get("constraint")
        g = cls(
            nodes=tuple(int(v) for v in d["nodes"]),
            edges=tuple((int(e["from"]), int(e["to"]), int(e["label"])) for e in d["edges"]),
            initial=int(d["initial"]),
            constraint=None if c is None else WHConstraint.from_dict(c),
        )
        if not g.edges:
            raise ValueError("graph has no edges")
        g.check()
        return g

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def to_dot(self) -> str:
        lines = ["digraph wh {", "  rankdir=LR;", f'  start [shape=point]; start -> n{self.initial};']
        for v in self.nodes:
            lines.append(f"  n{v} [label=\"{v}\", shape=circle];")
        for i, j, l in self.edges:
            lines.append(f'  n{i} -> n{j} [label="{l}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _reachable(succ: dict, start) -> set:
    seen = {start}
    todo = [start]
    while todo:
        v = todo.pop()
        for w in succ[v].values():
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def _history_automaton(r: int, s: int):
    """Naive automaton over the last ``s-1`` hit/miss values, all-hit start."""
    hlen = s - 1
    start = (1,) * hlen
    succ = {}
    todo = deque([start])
    succ[start] = None
    while todo:
        h = todo.popleft()
        out = {}
        for l in range(r + 1):
            seq = h + (0,) * l + (1,)
            if not admits(seq, WHConstraint.any_miss(r, s)):
                continue
            nxt = seq[len(seq) - hlen:] if hlen else ()
            out[l] = nxt
            if nxt not in succ:
                succ[nxt] = None
                todo.append(nxt)
        succ[h] = out
    return start, succ


def _hopcroft(states: list, succ: dict, alphabet: range) -> list[frozenset]:
    """Coarsest partition of a partial DFA where every state accepts.

    Missing transitions go to an implicit rejecting sink, so the initial
    partition is {states, {sink}}.
    """
    sink = object()
    pred: dict = {}
    for q in states:
        for a in alphabet:
            pred.setdefault((a, succ[q].get(a, sink)), set()).add(q)
    for a in alphabet:
        pred.setdefault((a, sink), set()).add(sink)

    everything = frozenset(states)
    partition = {everything, frozenset([sink])}
    block_of = {q: everything for q in states}
    block_of[sink] = frozenset([sink])
    work = {frozenset([sink])}
    while work:
        splitter = work.pop()
        for a in alphabet:
            hit: dict = {}
            for q in splitter:
                for p in pred.get((a, q), ()):
                    hit.setdefault(block_of[p], set()).add(p)
            for blk, inside in hit.items():
                if len(inside) == len(blk):
                    continue
                b1, b2 = frozenset(inside), blk - inside
                partition.remove(blk)
                partition.update((b1, b2))
                for q in b1:
                    block_of[q] = b1
                for q in b2:
                    block_of[q] = b2
                if blk in work:
                    work.remove(blk)
                    work.update((b1, b2))
                else:
                    work.add(b1 if len(b1) <= len(b2) else b2)
    return [b for b in partition if sink not in b]


def minimize(g: WHGraph) -> WHGraph:
    """Merge language-equivalent nodes and renumber canonically."""
    succ = {v: dict(g.successors(v)) for v in g.nodes}
    blocks = _hopcroft(list(g.nodes), succ, range(g.max_label + 1))
    cls = {q: b for b in blocks for q in b}
    rep = {b: next(iter(b)) for b in blocks}
    bsucc = {b: {l: cls[w] for l, w in succ[rep[b]].items()} for b in blocks}
    return _canonical(bsucc, cls[g.initial], g.constraint)


def _canonical(succ: dict, start, constraint) -> WHGraph:
    """BFS numbering from ``start``, labels visited in ascending order."""
    ids = {start: 0}
    order = [start]
    i = 0
    while i < len(order):
        v = order[i]
        i += 1
        for l in sorted(succ[v]):
            w = succ[v][l]
            if w not in ids:
                ids[w] = len(order)
                order.append(w)
    edges = tuple(
        (ids[v], ids[succ[v][l]], l) for v in order for l in sorted(succ[v])
    )
    return WHGraph(nodes=tuple(range(len(order))), edges=edges, initial=0, constraint=constraint)


def build_graph(c: WHConstraint) -> WHGraph:
    """Minimized lifted graph for ``c`` (converted to AnyMiss first)."""
    if c.kind is not Kind.ANY_MISS:
        c = convert(c)
    r, s = c.k, c.s
    start, succ = _history_automaton(r, s)
    naive = _canonical(succ, start, c)
    g = minimize(naive)
    g.check()
    expected = predicted_size(c)
    if (g.n_nodes, g.n_edges) != expected:
        warnings.warn(
            f"{c}: minimized graph has {g.n_nodes} nodes/{g.n_edges} edges, "
            f"closed form predicts {expected[0]}/{expected[1]}",
            RuntimeWarning,
        )
    return g


def advance(g: WHGraph, node, label: int):
    """Successor of ``node`` along the edge labeled ``label``."""
    try:
        return g.successors(node)[label]
    except KeyError:
        raise InadmissibleLabel(f"no edge labeled {label} at node {node}") from None


def initial_node(g: WHGraph, steps: Optional[int] = None):
    """Node reached by ``steps`` hits from any node (defaults to ``s``)."""
    if steps is None:
        steps = g.constraint.s if g.constraint is not None and g.constraint.s else g.n_nodes
    ends = set()
    for v in g.nodes:
        for _ in range(steps):
            v = advance(g, v, 0)
        ends.add(v)
    if len(ends) != 1:
        raise NonConvergent(f"label-0 walk ends in {len(ends)} different nodes")
    return ends.pop()


def language(g: WHGraph, length: int) -> set[tuple[int, ...]]:
    """Label words of length <= ``length`` readable from some node."""
    if length > LANGUAGE_MAX_LENGTH:
        raise ValueError(f"enumeration bound {LANGUAGE_MAX_LENGTH} exceeded")
    words = {()}
    frontier = {((), v) for v in g.nodes}
    for _ in range(length):
        nxt = set()
        for w, v in frontier:
            for l, u in g.successors(v).items():
                nxt.add((w + (l,), u))
        words.update(w for w, _ in nxt)
        frontier = nxt
    return words


def alpha_to_mu(alpha: Iterable[int]) -> list[int]:
    """Hit/miss sequence for a label word, starting (and ending) with a hit."""
    mu = [1]
    for a in alpha:
        mu.extend([0] * a)
        mu.append(1)
    return mu


def mu_to_alpha(mu: Sequence[int]) -> list[int]:
    """Miss-run lengths between consecutive hits (trailing misses dropped)."""
    hits = [t for t, b in enumerate(mu) if b]
    return [b - a - 1 for a, b in zip(hits, hits[1:])]


def is_isomorphic(g1: WHGraph, g2: WHGraph) -> bool:
    """Labeled-graph isomorphism for deterministic graphs rooted at ``initial``."""
    if (g1.n_nodes, g1.n_edges) != (g2.n_nodes, g2.n_edges):
        return False
    m = {g1.initial: g2.initial}
    todo = [g1.initial]
    while todo:
        v = todo.pop()
        s1, s2 = g1.successors(v), g2.successors(m[v])
        if set(s1) != set(s2):
            return False
        for l, w in s1.items():
            if w in m:
                if m[w] != s2[l]:
                    return False
            else:
                m[w] = s2[l]
                todo.append(w)
    return len(set(m.values())) == len(m) == g1.n_nodes


__all__ = [
    "ConstraintError", "InadmissibleLabel", "NonConvergent", "Kind", "WHConstraint", "WHGraph",
    "convert", "admits", "predicted_size", "predicted_label_counts", "build_graph", "minimize",
    "advance", "initial_node", "language", "alpha_to_mu", "mu_to_alpha", "is_isomorphic",
]
