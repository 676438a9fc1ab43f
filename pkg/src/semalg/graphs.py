"""Mixed graphs: data model, enumeration, canonical codes, colliders.

A mixed graph has directed edges (direct effects) and bidirected edges
(latent confounding).  Graphs are immutable values; node identity is the
index into the ``names`` tuple.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _kernels
from .errors import CyclicGraphError, GraphParseError, SemalgError

# Edge states per unordered pair (lo, hi), one base-8 digit each:
# 0 none, 1 lo->hi, 2 hi->lo, 3 lo<->hi, 4 lo->hi plus <->, 5 hi->lo plus <->.
N_STATES = 6
_STATE_HAS_BI = (False, False, False, True, True, True)
_STATE_DIR = (0, 1, 2, 0, 1, 2)  # 0 none, 1 lo->hi, 2 hi->lo

DEFAULT_NAMES = "abcdefghijklmnopqrstuvwxyz"


def default_names(n: int) -> tuple[str, ...]:
    if n <= len(DEFAULT_NAMES):
        return tuple(DEFAULT_NAMES[:n])
    return tuple(f"x{i}" for i in range(n))


@lru_cache(maxsize=None)
def pair_list(n: int) -> tuple[tuple[int, int], ...]:
    """Unordered node pairs in lexicographic order."""
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


@lru_cache(maxsize=None)
def pair_index(n: int) -> dict[tuple[int, int], int]:
    return {p: k for k, p in enumerate(pair_list(n))}


class ColliderType(Enum):
    NOT_COLLIDER = "not_collider"
    PARTIAL = "partial"
    FULL = "full"


@dataclass(frozen=True)
class StructureFlags:
    is_acyclic: bool
    is_bow_free: bool
    has_bow: bool
    is_dag: bool


@dataclass(frozen=True)
class MixedGraph:
    """Immutable mixed graph on named nodes.

    ``directed`` holds ordered pairs (tail, head); ``bidirected`` holds
    unordered pairs stored with the smaller index first.
    """

    names: tuple[str, ...]
    directed: frozenset[tuple[int, int]]
    bidirected: frozenset[tuple[int, int]]

    def __post_init__(self):
        n = len(self.names)
        if len(set(self.names)) != n:
            raise SemalgError("duplicate node names")
        for (u, v) in self.directed:
            if u == v:
                raise SemalgError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise SemalgError(f"directed edge ({u},{v}) out of range")
        for (u, v) in self.bidirected:
            if u == v:
                raise SemalgError(f"bidirected self-loop at node {u}")
            if not (0 <= u < v < n):
                raise SemalgError(f"bidirected pair ({u},{v}) not normalized")

    @classmethod
    def from_edges(cls, n_or_names, directed=(), bidirected=()) -> "MixedGraph":
        """Build a graph from an int node count or a name sequence.

        Edges may use indices or names; bidirected pairs are normalized.
        """
        if isinstance(n_or_names, int):
            names = default_names(n_or_names)
        else:
            names = tuple(n_or_names)
        lookup = {name: i for i, name in enumerate(names)}

        def resolve(x):
            if isinstance(x, str):
                if x not in lookup:
                    raise SemalgError(f"unknown node name {x!r}")
                return lookup[x]
            return int(x)

        d = frozenset((resolve(u), resolve(v)) for u, v in directed)
        b = frozenset(
            (min(resolve(u), resolve(v)), max(resolve(u), resolve(v)))
            for u, v in bidirected
        )
        return cls(names, d, b)

    # -- basic accessors ---------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.names)

    def parents(self, v: int) -> frozenset[int]:
        return frozenset(u for (u, w) in self.directed if w == v)

    def children(self, v: int) -> frozenset[int]:
        return frozenset(w for (u, w) in self.directed if u == v)

    def siblings(self, v: int) -> frozenset[int]:
        return frozenset(
            u if w == v else w for (u, w) in self.bidirected if v in (u, w)
        )

    def edge_count(self) -> int:
        return len(self.directed) + len(self.bidirected)

    def pair_state(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        state = 0
        if (i, j) in self.directed:
            state = 1
        elif (j, i) in self.directed:
            state = 2
        if (i, j) in self.bidirected:
            state += 3
        return state

    def digits(self) -> bytes:
        """Per-pair edge states in lexicographic pair order."""
        return bytes(self.pair_state(i, j) for i, j in pair_list(self.n))

    def code(self) -> int:
        """Base-8 integer encoding of this labeled graph."""
        code = 0
        for d in self.digits():
            code = (code << 3) | d
        return code

    def relabel(self, perm: Sequence[int]) -> "MixedGraph":
        """Apply node permutation: node v becomes perm[v]."""
        d = frozenset((perm[u], perm[v]) for (u, v) in self.directed)
        b = frozenset(
            (min(perm[u], perm[v]), max(perm[u], perm[v]))
            for (u, v) in self.bidirected
        )
        return MixedGraph(self.names, d, b)

    def topological_order(self) -> list[int]:
        """Topological order of the directed part; raises when cyclic."""
        indeg = [0] * self.n
        for (_, v) in self.directed:
            indeg[v] += 1
        ready = sorted(v for v in range(self.n) if indeg[v] == 0)
        order: list[int] = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for (u, w) in sorted(self.directed):
                if u == v:
                    indeg[w] -= 1
                    if indeg[w] == 0:
                        ready.append(w)
            ready.sort()
        if len(order) != self.n:
            raise CyclicGraphError("graph has a directed cycle")
        return order

    def __str__(self) -> str:
        return format_graph_text(self)


# -- structure predicates --------------------------------------------------

def is_acyclic(g: MixedGraph) -> bool:
    try:
        g.topological_order()
    except CyclicGraphError:
        return False
    return True


def bows(g: MixedGraph) -> frozenset[tuple[int, int]]:
    """Unordered pairs carrying both a directed and a bidirected edge."""
    out = set()
    for (u, v) in g.bidirected:
        if (u, v) in g.directed or (v, u) in g.directed:
            out.add((u, v))
    return frozenset(out)


def structure_predicates(g: MixedGraph) -> StructureFlags:
    acyclic = is_acyclic(g)
    has_bow = bool(bows(g))
    return StructureFlags(
        is_acyclic=acyclic,
        is_bow_free=not has_bow,
        has_bow=has_bow,
        is_dag=acyclic and not g.bidirected,
    )


# -- skeletons and colliders -------------------------------------------------

def skeleton(g: MixedGraph) -> frozenset[tuple[int, int]]:
    """Unordered pairs joined by at least one edge of any type."""
    pairs = set(g.bidirected)
    pairs.update((min(u, v), max(u, v)) for (u, v) in g.directed)
    return frozenset(pairs)


def _arrowheads_at_mid(g: MixedGraph, side: int, mid: int) -> tuple[bool, bool]:
    """(some edge side-mid has a head at mid, some directed mid->side exists)."""
    head = (side, mid) in g.directed or (min(side, mid), max(side, mid)) in g.bidirected
    tail_out = (mid, side) in g.directed
    return head, tail_out


def collider_type(g: MixedGraph, v1: int, v2: int, v3: int) -> ColliderType:
    """Classify the skeleton path (v1, v2, v3) at its middle node."""
    if len({v1, v2, v3}) != 3:
        raise SemalgError("collider_type requires three distinct nodes")
    skel = skeleton(g)
    if (min(v1, v2), max(v1, v2)) not in skel or (min(v2, v3), max(v2, v3)) not in skel:
        raise SemalgError("collider_type requires a 2-edge skeleton path")
    head1, out1 = _arrowheads_at_mid(g, v1, v2)
    head3, out3 = _arrowheads_at_mid(g, v3, v2)
    if not (head1 and head3):
        return ColliderType.NOT_COLLIDER
    if out1 or out3:
        return ColliderType.PARTIAL
    return ColliderType.FULL


# -- edge deletion -----------------------------------------------------------

def edge_list(g: MixedGraph) -> list[tuple[str, int, int]]:
    """All edges as ('->', tail, head) / ('<->', lo, hi), sorted."""
    out = [("->", u, v) for (u, v) in sorted(g.directed)]
    out += [("<->", u, v) for (u, v) in sorted(g.bidirected)]
    return out


def delete_edges(g: MixedGraph, edges: Iterable[tuple[str, int, int]]) -> MixedGraph:
    """Remove the named edges; unknown identifiers raise."""
    directed = set(g.directed)
    bidirected = set(g.bidirected)
    for kind, u, v in edges:
        if kind == "->":
            if (u, v) not in directed:
                raise SemalgError(f"no directed edge {u}->{v}")
            directed.remove((u, v))
        elif kind == "<->":
            key = (min(u, v), max(u, v))
            if key not in bidirected:
                raise SemalgError(f"no bidirected edge {u}<->{v}")
            bidirected.remove(key)
        else:
            raise SemalgError(f"unknown edge kind {kind!r}")
    return MixedGraph(g.names, frozenset(directed), frozenset(bidirected))


# -- enumeration -------------------------------------------------------------

@lru_cache(maxsize=None)
def count_dags(n: int) -> int:
    """Number of labeled DAGs on n nodes (Robinson's recurrence)."""
    if n == 0:
        return 1
    total = 0
    for k in range(1, n + 1):
        total += (-1) ** (k + 1) * math.comb(n, k) * 2 ** (k * (n - k)) * count_dags(n - k)
    return total


def count_acyclic(n: int) -> int:
    """Number of labeled acyclic mixed graphs on n nodes."""
    return count_dags(n) * 2 ** math.comb(n, 2)


def enumerate_acyclic_digits(n: int) -> Iterator[bytes]:
    """Stream per-pair state vectors of all acyclic mixed graphs on n nodes.

    Output is in increasing code order.  Acyclicity is maintained during
    construction via incremental reachability, so nothing is generated and
    then discarded.
    """
    if not (1 <= n <= 6):
        raise SemalgError("enumerate_acyclic supports 1 <= n <= 6")
    pairs = pair_list(n)
    npairs = len(pairs)
    digits = bytearray(npairs)
    # reach[v] = bitmask of nodes reachable from v (including v).
    reach = [1 << v for v in range(n)]

    def extend(k: int) -> Iterator[bytes]:
        if k == npairs:
            yield bytes(digits)
            return
        i, j = pairs[k]
        for state in range(N_STATES):
            direction = _STATE_DIR[state]
            if direction == 0:
                digits[k] = state
                yield from extend(k + 1)
            else:
                u, v = (i, j) if direction == 1 else (j, i)
                if reach[v] & (1 << u):
                    continue  # u -> v would close a directed cycle
                saved = list(reach)
                target = reach[v]
                for x in range(n):
                    if reach[x] & (1 << u):
                        reach[x] |= target
                digits[k] = state
                yield from extend(k + 1)
                reach[:] = saved

    yield from extend(0)


def graph_from_digits(n: int, digits: bytes, names: tuple[str, ...] | None = None) -> MixedGraph:
    if names is None:
        names = default_names(n)
    directed = set()
    bidirected = set()
    for (i, j), state in zip(pair_list(n), digits):
        if state >= N_STATES:
            raise SemalgError(f"illegal pair state {state}")
        d = _STATE_DIR[state]
        if d == 1:
            directed.add((i, j))
        elif d == 2:
            directed.add((j, i))
        if _STATE_HAS_BI[state]:
            bidirected.add((i, j))
    return MixedGraph(names, frozenset(directed), frozenset(bidirected))


def graph_from_code(n: int, code: int, names: tuple[str, ...] | None = None) -> MixedGraph:
    npairs = math.comb(n, 2)
    digits = []
    for _ in range(npairs):
        digits.append(code & 0b111)
        code >>= 3
    if code:
        raise SemalgError("code has too many digits for this node count")
    return graph_from_digits(n, bytes(reversed(digits)), names)


def enumerate_acyclic(n: int, names: tuple[str, ...] | None = None) -> Iterator[MixedGraph]:
    """All acyclic mixed graphs on n labeled nodes, in code order."""
    for digits in enumerate_acyclic_digits(n):
        yield graph_from_digits(n, digits, names)


# -- canonical codes ---------------------------------------------------------

@lru_cache(maxsize=None)
def _perm_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-permutation pair-source and orientation-flip tables.

    For permutation p and target pair position k (pair (a, b) of the
    relabeled graph), ``src[p, k]`` is the pair index of the preimage pair
    and ``flip[p, k]`` is 1 when the relabeling reverses its orientation.
    """
    pairs = pair_list(n)
    index = pair_index(n)
    perms = list(itertools.permutations(range(n)))
    src = np.zeros((len(perms), len(pairs)), dtype=np.int32)
    flip = np.zeros((len(perms), len(pairs)), dtype=np.uint8)
    for p_i, perm in enumerate(perms):
        for k_old, (i, j) in enumerate(pairs):
            a, b = perm[i], perm[j]
            flipped = a > b
            if flipped:
                a, b = b, a
            src[p_i, index[(a, b)]] = k_old
            flip[p_i, index[(a, b)]] = 1 if flipped else 0
    return src, flip


def canonical_code(g: MixedGraph) -> int:
    """Minimum code over all node relabelings; equal iff isomorphic."""
    src, flip = _perm_tables(g.n)
    return int(_kernels.min_code_over_perms(g.digits(), src, flip))


def canonical_code_of_digits(n: int, digits: bytes) -> int:
    src, flip = _perm_tables(n)
    return int(_kernels.min_code_over_perms(digits, src, flip))


# -- text and JSON formats ---------------------------------------------------

def parse_graph_text(text: str) -> MixedGraph:
    """Parse the line-oriented graph format.

    Format: a ``nodes: a b c`` line, then one edge per line (``a -> b`` or
    ``a <-> b``); ``#`` starts a comment.  Duplicate edges and self-loops
    are rejected with the offending line number.
    """
    names: tuple[str, ...] | None = None
    directed: list[tuple[int, int]] = []
    bidirected: list[tuple[int, int]] = []
    lookup: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("nodes:"):
            if names is not None:
                raise GraphParseError(lineno, "duplicate nodes: line")
            parts = line[len("nodes:"):].split()
            if not parts:
                raise GraphParseError(lineno, "empty node list")
            if len(set(parts)) != len(parts):
                raise GraphParseError(lineno, "duplicate node name")
            names = tuple(parts)
            lookup = {nm: i for i, nm in enumerate(names)}
            continue
        if names is None:
            raise GraphParseError(lineno, "edge line before nodes: line")
        for arrow, store, normalize in (
            ("<->", bidirected, True),
            ("->", directed, False),
        ):
            if arrow in line:
                lhs, rhs = line.split(arrow, 1)
                u_name, v_name = lhs.strip(), rhs.strip()
                if u_name not in lookup or v_name not in lookup:
                    raise GraphParseError(lineno, f"unknown node in {line!r}")
                u, v = lookup[u_name], lookup[v_name]
                if u == v:
                    raise GraphParseError(lineno, "self-loop")
                pair = (min(u, v), max(u, v)) if normalize else (u, v)
                if pair in store:
                    raise GraphParseError(lineno, f"duplicate edge {line!r}")
                store.append(pair)
                break
        else:
            raise GraphParseError(lineno, f"unrecognized line {line!r}")
    if names is None:
        raise GraphParseError(1, "missing nodes: line")
    return MixedGraph(names, frozenset(directed), frozenset(bidirected))


def format_graph_text(g: MixedGraph) -> str:
    lines = ["nodes: " + " ".join(g.names)]
    lines += [f"{g.names[u]} -> {g.names[v]}" for (u, v) in sorted(g.directed)]
    lines += [f"{g.names[u]} <-> {g.names[v]}" for (u, v) in sorted(g.bidirected)]
    return "\n".join(lines) + "\n"


def graph_to_json_dict(g: MixedGraph) -> dict:
    return {
        "nodes": list(g.names),
        "directed": [[g.names[u], g.names[v]] for (u, v) in sorted(g.directed)],
        "bidirected": [[g.names[u], g.names[v]] for (u, v) in sorted(g.bidirected)],
    }


def graph_from_json_dict(data: dict) -> MixedGraph:
    try:
        names = tuple(data["nodes"])
        directed = [tuple(e) for e in data.get("directed", [])]
        bidirected = [tuple(e) for e in data.get("bidirected", [])]
    except (KeyError, TypeError) as exc:
        raise GraphParseError(1, f"malformed graph JSON: {exc}") from exc
    if len(set(names)) != len(names):
        raise GraphParseError(1, "duplicate node name")
    seen_d: set[tuple[str, str]] = set()
    for e in directed:
        if e in seen_d:
            raise GraphParseError(1, f"duplicate edge {e}")
        seen_d.add(e)
    seen_b: set[frozenset] = set()
    for e in bidirected:
        key = frozenset(e)
        if key in seen_b:
            raise GraphParseError(1, f"duplicate edge {e}")
        seen_b.add(key)
    try:
        return MixedGraph.from_edges(names, directed, bidirected)
    except SemalgError as exc:
        raise GraphParseError(1, str(exc)) from exc


def load_graph(path: str) -> MixedGraph:
    """Load a graph file, auto-detecting JSON versus the text format."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphParseError(exc.lineno, f"invalid JSON: {exc.msg}") from exc
        return graph_from_json_dict(data)
    return parse_graph_text(text)
