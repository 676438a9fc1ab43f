"""Generic-rank classification and algebraic equivalence classes.

A graph is generically finite-to-one exactly when the Jacobian of the
constraint map has full column rank; infinite-to-one graphs merge with the
finite-to-one graphs obtained by deleting a minimal number of edges, and
the resulting clusters merge further when their exact constraint sets
describe the same model.
"""
from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .constraints import (
    ConstraintSet,
    ConstraintTag,
    clusters_equivalent,
    recognize,
    sigma_ring,
    theorem1_constraints,
)
from .errors import (
    InternalError,
    MissingRepresentativeError,
    SemalgError,
)
from .graphs import (
    MixedGraph,
    default_names,
    enumerate_acyclic_digits,
    graph_from_digits,
    graph_from_json_dict,
    graph_to_json_dict,
    is_acyclic,
    pair_list,
    skeleton,
    collider_type,
    ColliderType,
    bows,
)
from .halftrek import draw_integer_params, exact_sigma, find_identifying_sets
from .polynomials import from_string, to_string


# -- Jacobian of the constraint map ------------------------------------------------

def jacobian_rows(g: MixedGraph) -> list[tuple[int, int]]:
    """Constrained pairs: unordered node pairs without a bidirected edge."""
    return [p for p in pair_list(g.n) if p not in g.bidirected]


def jacobian_cols(g: MixedGraph) -> list[tuple[int, int]]:
    return sorted(g.directed)


def jacobian_at(g: MixedGraph, lam, sigma):
    """Derivative of the constrained entries of (I-L)^T S (I-L) in the
    edge coefficients, at fixed S.

    Entry for row {v,w} and column u->x is
    -[x=v] * [S(I-L)]_{u,w} - [x=w] * [S(I-L)]_{u,v}.
    Accepts float arrays (returns an ndarray) or exact nested lists
    (returns nested lists, exact arithmetic).
    """
    n = g.n
    rows = jacobian_rows(g)
    cols = jacobian_cols(g)
    if isinstance(lam, np.ndarray):
        m = np.asarray(sigma) @ (np.eye(n) - np.asarray(lam))
        m = [[m[i, j] for j in range(n)] for i in range(n)]
        wrap = lambda data: np.array(data, dtype=float).reshape(
            (len(rows), len(cols))
        )
    else:
        m = [
            [
                sum(sigma[i][k] * ((1 if k == j else 0) - lam[k][j]) for k in range(n))
                for j in range(n)
            ]
            for i in range(n)
        ]
        wrap = lambda data: data
    out = []
    for (v, w) in rows:
        row = []
        for (u, x) in cols:
            val = 0
            if x == v:
                val = val - m[u][w]
            if x == w:
                val = val - m[u][v]
            row.append(val)
        out.append(row)
    return wrap(out)


@dataclass(frozen=True)
class RankReport:
    rank: int
    deficiency: int
    trials: int
    seed: int


def _int_rows(rows):
    """Clear Fraction entries row-wise; rank is unchanged."""
    out = []
    for row in rows:
        if any(isinstance(x, Fraction) and x.denominator != 1 for x in row):
            denom = 1
            for x in row:
                d = x.denominator if isinstance(x, Fraction) else 1
                denom = denom * d // math.gcd(denom, d)
            out.append([int(Fraction(x) * denom) for x in row])
        else:
            out.append([int(x) for x in row])
    return out


def generic_rank(g: MixedGraph, trials: int = 3, seed: int = 0) -> RankReport:
    """Exact Jacobian rank, maximized over random integer parameter draws."""
    if trials < 1:
        raise SemalgError("trials must be at least 1")
    ncols = len(g.directed)
    nrows = len(jacobian_rows(g))
    best = 0
    for t in range(trials):
        if nrows == 0 or ncols == 0:
            break
        rng = random.Random(seed * 1_000_003 + 7 * t + 1)
        lam, om = draw_integer_params(g, rng)
        sigma = exact_sigma(g, lam, om)
        jac = jacobian_at(g, lam, sigma)
        rank = _kernels.bareiss_rank(_int_rows(jac))
        best = max(best, rank)
        if best == min(nrows, ncols):
            break
    return RankReport(best, ncols - best, trials, seed)


def is_finite_to_one(g: MixedGraph, trials: int = 3, seed: int = 0) -> bool:
    return generic_rank(g, trials, seed).deficiency == 0


def model_dimension(g: MixedGraph, trials: int = 3, seed: int = 0) -> int:
    """Model dimension on the correlation scale: rank plus the number of
    bidirected edges (node variances excluded)."""
    return generic_rank(g, trials, seed).rank + len(g.bidirected)


# -- edge deletion over digit vectors -----------------------------------------------

_DIR_REMOVE = {1: 0, 2: 0, 4: 3, 5: 3}
_BI_REMOVE = {3: 0, 4: 1, 5: 2}


def _deletable_edges(digits: bytes) -> list[tuple[int, str]]:
    """(pair index, kind) for every removable edge of an encoded graph."""
    out = []
    for k, d in enumerate(digits):
        if d in _DIR_REMOVE:
            out.append((k, "d"))
        if d in _BI_REMOVE:
            out.append((k, "b"))
    return out


def _delete_from_digits(digits: bytes, combo) -> bytes:
    out = bytearray(digits)
    for k, kind in combo:
        table = _DIR_REMOVE if kind == "d" else _BI_REMOVE
        out[k] = table[out[k]]
    return bytes(out)


def theorem2_equivalents(
    g: MixedGraph,
    trials: int = 3,
    seed: int = 0,
    check_minimality: bool = False,
) -> list[MixedGraph]:
    """All finite-to-one graphs obtained by deleting exactly ``deficiency``
    edges; each is algebraically equivalent to the input."""
    report = generic_rank(g, trials, seed)
    k = report.deficiency
    if k == 0:
        raise SemalgError("graph is finite-to-one; no equivalents by deletion")
    digits = g.digits()
    edges = _deletable_edges(digits)
    if check_minimality and k <= 2:
        for size in range(1, k):
            for combo in itertools.combinations(edges, size):
                nd = _delete_from_digits(digits, combo)
                h = graph_from_digits(g.n, nd, g.names)
                if is_finite_to_one(h, trials, seed):
                    raise InternalError(
                        f"deletion of {size} < {k} edges already finite-to-one"
                    )
    out = []
    for combo in itertools.combinations(edges, k):
        nd = _delete_from_digits(digits, combo)
        h = graph_from_digits(g.n, nd, g.names)
        if is_finite_to_one(h, trials, seed):
            out.append(h)
    if not out:
        raise InternalError(
            "no finite-to-one graph at the minimal deletion distance"
        )
    return out


# -- clustering ------------------------------------------------------------------

class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


@dataclass
class Clustering:
    """Theorem-2 clustering of all acyclic mixed graphs on n nodes."""

    n: int
    digits_list: list[bytes]
    deficiencies: list[int]
    parent: list[int]
    trials: int
    seed: int

    def clusters(self) -> list[list[int]]:
        groups: dict[int, list[int]] = {}
        uf = _UnionFind(0)
        uf.parent = self.parent
        for i in range(len(self.digits_list)):
            groups.setdefault(uf.find(i), []).append(i)
        return [groups[r] for r in sorted(groups)]

    @property
    def cluster_count(self) -> int:
        return len(self.clusters())


def cluster_all(n: int, trials: int = 3, seed: int = 0, jobs: int = 1) -> Clustering:
    """Union every infinite-to-one graph with its minimal finite-to-one
    deletions, transitively.  Deterministic given the seed; ``jobs`` only
    partitions the rank computations."""
    digits_list = list(enumerate_acyclic_digits(n))
    index = {d: i for i, d in enumerate(digits_list)}
    names = default_names(n)

    def deficiency_of(digits: bytes) -> int:
        g = graph_from_digits(n, digits, names)
        return generic_rank(g, trials, seed).deficiency

    deficiencies = [deficiency_of(d) for d in digits_list]

    uf = _UnionFind(len(digits_list))
    for i, digits in enumerate(digits_list):
        k = deficiencies[i]
        if k == 0:
            continue
        edges = _deletable_edges(digits)
        found = False
        for combo in itertools.combinations(edges, k):
            nd = _delete_from_digits(digits, combo)
            j = index[nd]
            if deficiencies[j] == 0:
                uf.union(i, j)
                found = True
        if not found:
            raise InternalError(
                f"graph {i} has no finite-to-one deletion at distance {k}"
            )
    return Clustering(n, digits_list, deficiencies, uf.parent, trials, seed)


# -- class table -----------------------------------------------------------------

@dataclass
class ClassEntry:
    id: int
    dimension: int
    members: tuple[int, ...]  # labeled-graph codes
    representative: MixedGraph
    constraints: ConstraintSet

    def tags(self) -> tuple[ConstraintTag, ...]:
        return self.constraints.tags

    def is_mag_describable(self) -> bool:
        return all(
            t.kind in ("vanishing_covariance", "vanishing_partial_correlation")
            for t in self.constraints.tags
        )


@dataclass
class ClassTable:
    n: int
    graph_count: int
    cluster_count: int
    class_count: int
    classes: list[ClassEntry]
    _code_lookup: dict[int, int] = field(default_factory=dict, repr=False)

    def class_of_code(self, code: int) -> int:
        if not self._code_lookup:
            for entry in self.classes:
                for c in entry.members:
                    self._code_lookup[c] = entry.id
        return self._code_lookup[code]

    def class_of_graph(self, g: MixedGraph) -> int:
        return self.class_of_code(g.code())

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "graph_count": self.graph_count,
            "cluster_count": self.cluster_count,
            "class_count": self.class_count,
            "classes": [
                {
                    "id": e.id,
                    "dimension": e.dimension,
                    "members": list(e.members),
                    "representative": graph_to_json_dict(e.representative),
                    "constraints": [
                        {
                            "poly": to_string(p),
                            "tag": t.label(e.representative.names),
                        }
                        for p, t in zip(e.constraints.polys, e.constraints.tags)
                    ],
                }
                for e in self.classes
            ],
        }

    @staticmethod
    def from_json_dict(data: dict) -> "ClassTable":
        n = data["n"]
        ring = sigma_ring(n)
        classes = []
        for c in data["classes"]:
            polys = tuple(from_string(ring, item["poly"]) for item in c["constraints"])
            tags = tuple(recognize(p, n) for p in polys)
            classes.append(
                ClassEntry(
                    id=c["id"],
                    dimension=c["dimension"],
                    members=tuple(c["members"]),
                    representative=graph_from_json_dict(c["representative"]),
                    constraints=ConstraintSet(polys, tags),
                )
            )
        return ClassTable(
            n=n,
            graph_count=data["graph_count"],
            cluster_count=data["cluster_count"],
            class_count=data["class_count"],
            classes=classes,
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path: str) -> "ClassTable":
        with open(path, "r", encoding="utf-8") as fh:
            return ClassTable.from_json_dict(json.load(fh))


def _digits_to_code(digits: bytes) -> int:
    code = 0
    for d in digits:
        code = (code << 3) | d
    return code


def _edge_count(digits: bytes) -> int:
    return sum((1 if d in (1, 2, 4, 5) else 0) + (1 if d >= 3 else 0) for d in digits)


def _cluster_representative(
    clustering: Clustering, members: list[int], seed: int
):
    """First identifiable member by (edge count, code); returns graph and
    its witness sets, or None."""
    n = clustering.n
    names = default_names(n)
    ordered = sorted(members, key=lambda i: (_edge_count(clustering.digits_list[i]), i))
    for i in ordered:
        g = graph_from_digits(n, clustering.digits_list[i], names)
        status = find_identifying_sets(g, seed=seed)
        if status.identifiable:
            return g, status.sets
    return None


def merge_clusters(clustering: Clustering, seed: int = 0) -> ClassTable:
    """Merge Theorem-2 clusters whose constraint sets describe one model.

    Every cluster needs an identifiable representative to derive its
    constraints from; raises ``MissingRepresentativeError`` otherwise.
    """
    n = clustering.n
    clusters = clustering.clusters()
    reps = []
    cons = []
    dims = []
    for ci, members in enumerate(clusters):
        rep = _cluster_representative(clustering, members, seed)
        if rep is None:
            raise MissingRepresentativeError(
                f"cluster {ci} has no identifiable member"
            )
        g, ysets = rep
        reps.append(g)
        cons.append(theorem1_constraints(g, ysets))
        dims.append(min(_edge_count(clustering.digits_list[i]) for i in members))

    uf = _UnionFind(len(clusters))
    by_dim: dict[int, dict[tuple, int]] = {}
    for ci in range(len(clusters)):
        buckets = by_dim.setdefault(dims[ci], {})
        key = cons[ci].canonical_key()
        if key in buckets:
            uf.union(buckets[key], ci)
        else:
            buckets[key] = ci
    for dim, buckets in sorted(by_dim.items()):
        leads = sorted(buckets.values())
        for a_pos in range(len(leads)):
            for b_pos in range(a_pos + 1, len(leads)):
                a, b = leads[a_pos], leads[b_pos]
                if uf.find(a) == uf.find(b):
                    continue
                if clusters_equivalent(
                    cons[a], dims[a], reps[a], cons[b], dims[b], reps[b]
                ):
                    uf.union(a, b)

    groups: dict[int, list[int]] = {}
    for ci in range(len(clusters)):
        groups.setdefault(uf.find(ci), []).append(ci)

    entries = []
    for root_cis in groups.values():
        member_idx = sorted(i for ci in root_cis for i in clusters[ci])
        lead = min(root_cis)
        codes = tuple(_digits_to_code(clustering.digits_list[i]) for i in member_idx)
        entries.append(
            (
                dims[lead],
                codes,
                ClassEntry(
                    id=-1,
                    dimension=dims[lead],
                    members=codes,
                    representative=reps[lead],
                    constraints=cons[lead],
                ),
            )
        )
    entries.sort(key=lambda t: (t[0], t[1]))
    classes = []
    for new_id, (_, _, entry) in enumerate(entries):
        entry.id = new_id
        classes.append(entry)
    return ClassTable(
        n=n,
        graph_count=len(clustering.digits_list),
        cluster_count=len(clusters),
        class_count=len(classes),
        classes=classes,
    )


def build_class_table(n: int, trials: int = 3, seed: int = 0, jobs: int = 1) -> ClassTable:
    return merge_clusters(cluster_all(n, trials, seed, jobs), seed)


# -- collider-pattern sufficient condition -------------------------------------------

def prop1_check(g1: MixedGraph, g2: MixedGraph) -> bool:
    """Sufficient graphical condition for equivalence of bow-free acyclic
    graphs: equal skeletons and identical collider status on every 2-edge
    skeleton path."""
    if g1.n != g2.n:
        return False
    if bows(g1) or bows(g2):
        return False
    if not (is_acyclic(g1) and is_acyclic(g2)):
        return False
    sk = skeleton(g1)
    if sk != skeleton(g2):
        return False
    adj: dict[int, set[int]] = {v: set() for v in range(g1.n)}
    for (u, v) in sk:
        adj[u].add(v)
        adj[v].add(u)
    for mid in range(g1.n):
        nbrs = sorted(adj[mid])
        for a, b in itertools.combinations(nbrs, 2):
            c1 = collider_type(g1, a, mid, b) != ColliderType.NOT_COLLIDER
            c2 = collider_type(g2, a, mid, b) != ColliderType.NOT_COLLIDER
            if c1 != c2:
                return False
    return True
