"""Exact constraint enumeration for identifiable mixed graphs.

Builds closed-form edge-coefficient expressions in covariance variables,
extracts the polynomial equality constraints a graph imposes, classifies
their shapes, and decides exact model equality by symbolic substitution of
the parameterization.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache

from .errors import CyclicGraphError, IdenticallySingularError, SemalgError
from .graphs import MixedGraph, default_names, is_acyclic
from .halftrek import (
    IdentifyingSets,
    draw_integer_params,
    exact_sigma,
    half_trek_reachable,
)
from .polynomials import (
    Polynomial,
    RationalFunction,
    Ring,
    bareiss_det,
    canonicalize,
    exact_div,
    gcd,
    reduce_by_factors,
    to_string,
)


# -- covariance-variable rings ---------------------------------------------------

@lru_cache(maxsize=None)
def sigma_pairs(n: int) -> tuple[tuple[int, int], ...]:
    """All (v, w) with v <= w, diagonal included, in lexicographic order."""
    return tuple((i, j) for i in range(n) for j in range(i, n))


@lru_cache(maxsize=None)
def sigma_ring(n: int, names: tuple[str, ...] | None = None) -> Ring:
    if names is None:
        names = default_names(n)
    return Ring(tuple(f"s_{names[i]}{names[j]}" for i, j in sigma_pairs(n)))


@lru_cache(maxsize=None)
def _sigma_index(n: int) -> dict[tuple[int, int], int]:
    return {p: k for k, p in enumerate(sigma_pairs(n))}


def sigma_var(ring: Ring, n: int, v: int, w: int) -> Polynomial:
    if v > w:
        v, w = w, v
    return Polynomial.variable(ring, _sigma_index(n)[(v, w)])


def sigma_values(sigma, n: int) -> list:
    """Flatten a covariance matrix into the ring's variable order."""
    return [sigma[i][j] for (i, j) in sigma_pairs(n)]


# -- symbolic edge-coefficient recovery --------------------------------------------

@dataclass(frozen=True)
class SymbolicColumns:
    """Per-node Cramer solutions: column v of the coefficient matrix equals
    nums[v][p] / dens[v] for each parent p."""

    dens: tuple[Polynomial, ...]
    nums: tuple[dict, ...]


def _symbolic_columns(g: MixedGraph, ysets: IdentifyingSets, ring: Ring) -> SymbolicColumns:
    n = g.n
    one = Polynomial.constant(ring, 1)
    dens: list[Polynomial] = [one] * n
    nums: list[dict] = [dict() for _ in range(n)]
    htr = [half_trek_reachable(g, v) for v in range(n)]

    def svar(i, j):
        return sigma_var(ring, n, i, j)

    for v in ysets.order:
        ps = sorted(g.parents(v))
        if not ps:
            continue
        ys = sorted(ysets.sets[v])
        rows = []
        rhs = []
        for y in ys:
            if y in htr[v]:
                # Row scaled by the (generically nonzero) denominator of
                # column y; scaling rows leaves the solution unchanged.
                dy = dens[y]
                row = []
                for p in ps:
                    e = dy * svar(y, p)
                    for u, nu in nums[y].items():
                        e = e - nu * svar(u, p)
                    row.append(e)
                e = dy * svar(y, v)
                for u, nu in nums[y].items():
                    e = e - nu * svar(u, v)
                rhs.append(e)
                rows.append(row)
            else:
                rows.append([svar(y, p) for p in ps])
                rhs.append(svar(y, v))
        det = bareiss_det(rows)
        if det.is_zero:
            raise IdenticallySingularError(
                f"symbolic system at node {v} is identically singular"
            )
        col_nums = {}
        for j, p in enumerate(ps):
            mat_j = [
                [rhs[i] if jj == j else rows[i][jj] for jj in range(len(ps))]
                for i in range(len(ps))
            ]
            col_nums[p] = bareiss_det(mat_j)
        # Remove any common factor of the column's solution entries.
        common = det
        for nu in col_nums.values():
            common = gcd(common, nu)
            if common.total_degree() == 0:
                break
        if common.total_degree() > 0:
            det = exact_div(det, common)
            col_nums = {p: exact_div(nu, common) for p, nu in col_nums.items()}
        dens[v] = det
        nums[v] = col_nums
    return SymbolicColumns(tuple(dens), tuple(nums))


def lambda_symbolic(g: MixedGraph, ysets: IdentifyingSets) -> dict[tuple[int, int], RationalFunction]:
    """Closed-form map from covariances to each edge coefficient."""
    ring = sigma_ring(g.n)
    cols = _symbolic_columns(g, ysets, ring)
    out = {}
    for (u, v) in sorted(g.directed):
        out[(u, v)] = RationalFunction(cols.nums[v][u], cols.dens[v])
    return out


# -- constraint sets ----------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintTag:
    kind: str  # vanishing_covariance | vanishing_partial_correlation | tetrad | other
    nodes: tuple[int, ...] = ()
    cond: tuple[int, ...] = ()

    def label(self, names) -> str:
        if self.kind == "vanishing_covariance":
            v, w = self.nodes
            return f"cov({names[v]},{names[w]})"
        if self.kind == "vanishing_partial_correlation":
            v, w = self.nodes
            cs = ",".join(names[c] for c in self.cond)
            return f"pcorr({names[v]},{names[w]}|{cs})"
        if self.kind == "tetrad":
            x, y, z, w = self.nodes
            return (
                f"tetrad({names[x]}{names[y]}*{names[z]}{names[w]}"
                f"-{names[x]}{names[w]}*{names[z]}{names[y]})"
            )
        return "other"


OTHER = ConstraintTag("other")


@dataclass(frozen=True)
class ConstraintSet:
    """Canonical constraint polynomials with per-polynomial shape tags."""

    polys: tuple[Polynomial, ...]
    tags: tuple[ConstraintTag, ...]

    def __len__(self) -> int:
        return len(self.polys)

    def canonical_key(self) -> tuple:
        return tuple(sorted(to_string(p) for p in self.polys))


def vanishing_pcorr_poly(n: int, v: int, w: int, cond=()) -> Polynomial:
    """Determinant polynomial whose vanishing is zero partial correlation."""
    cond = tuple(sorted(cond))
    if v == w or v in cond or w in cond:
        raise SemalgError("conditioning set must exclude the tested pair")
    ring = sigma_ring(n)
    rows = [v] + list(cond)
    cols = [w] + list(cond)
    mat = [[sigma_var(ring, n, r, c) for c in cols] for r in rows]
    return canonicalize(bareiss_det(mat))


@lru_cache(maxsize=None)
def _recognizer_table(n: int) -> dict[Polynomial, ConstraintTag]:
    """Canonical polynomials of every nameable constraint shape."""
    ring = sigma_ring(n)
    table: dict[Polynomial, ConstraintTag] = {}
    import itertools as it

    for v, w in it.combinations(range(n), 2):
        table[canonicalize(sigma_var(ring, n, v, w))] = ConstraintTag(
            "vanishing_covariance", (v, w)
        )
    for v, w in it.combinations(range(n), 2):
        rest = [x for x in range(n) if x not in (v, w)]
        for size in range(1, n - 1):
            for cond in it.combinations(rest, size):
                poly = vanishing_pcorr_poly(n, v, w, cond)
                table.setdefault(
                    poly, ConstraintTag("vanishing_partial_correlation", (v, w), cond)
                )
    for quad in it.combinations(range(n), 4):
        a = quad[0]
        rest = quad[1:]
        # each pairing of the quadruple pairs `a` with one partner; the
        # three pairwise differences of the pairing products are the
        # distinct tetrads sigma_am sigma_zr - sigma_ar sigma_zm
        for m, r in it.permutations(rest, 2):
            if m >= r:
                continue
            z = next(x for x in rest if x not in (m, r))
            poly = canonicalize(
                sigma_var(ring, n, a, m) * sigma_var(ring, n, z, r)
                - sigma_var(ring, n, a, r) * sigma_var(ring, n, z, m)
            )
            table.setdefault(poly, ConstraintTag("tetrad", (a, m, z, r)))
    return table


def recognize(p: Polynomial, n: int) -> ConstraintTag:
    """Match a canonical polynomial against the nameable constraint shapes."""
    return _recognizer_table(n).get(p, OTHER)


def theorem1_constraints(g: MixedGraph, ysets: IdentifyingSets) -> ConstraintSet:
    """All equality constraints the graph imposes, as cleared polynomials.

    One rational constraint arises per non-adjacent-by-bidirected pair
    outside the witness sets; denominators are cleared by exact division
    and the numerators canonicalized.
    """
    n = g.n
    ring = sigma_ring(n)
    cols = _symbolic_columns(g, ysets, ring)

    def svar(i, j):
        return sigma_var(ring, n, i, j)

    polys: list[Polynomial] = []
    for v in range(n):
        for w in range(v + 1, n):
            if (v, w) in g.bidirected:
                continue
            if v in ysets.sets[w] or w in ysets.sets[v]:
                continue
            dv, dw = cols.dens[v], cols.dens[w]
            e = dv * dw * svar(v, w)
            for u, nu in cols.nums[v].items():
                e = e - nu * dw * svar(u, w)
            for x, nx in cols.nums[w].items():
                e = e - dv * nx * svar(v, x)
            for u, nu in cols.nums[v].items():
                for x, nx in cols.nums[w].items():
                    e = e + nu * nx * svar(u, x)
            e, _ = reduce_by_factors(e, [dv, dw])
            if e.is_zero:
                continue
            polys.append(canonicalize(e))
    unique = sorted(set(polys), key=lambda p: (p.total_degree(), to_string(p)))
    tags = tuple(recognize(p, n) for p in unique)
    return ConstraintSet(tuple(unique), tags)


# -- exact model-vanishing tests ------------------------------------------------------

_SUBS_CACHE: dict[tuple, list[Polynomial]] = {}


def _param_ring(g: MixedGraph) -> Ring:
    names = g.names
    lam_vars = [f"l_{names[u]}{names[v]}" for (u, v) in sorted(g.directed)]
    om_vars = [f"w_{names[v]}{names[v]}" for v in range(g.n)]
    om_vars += [f"w_{names[u]}{names[v]}" for (u, v) in sorted(g.bidirected)]
    return Ring(tuple(lam_vars + om_vars))


def model_sigma_images(g: MixedGraph) -> tuple[Ring, list[Polynomial]]:
    """Symbolic covariance entries as polynomials in the graph's parameters.

    Uses the finite nilpotent series for the matrix inverse, so the graph
    must be acyclic.
    """
    key = (g.names, g.directed, g.bidirected)
    cached = _SUBS_CACHE.get(key)
    if cached is not None:
        return cached  # type: ignore[return-value]
    if not is_acyclic(g):
        raise CyclicGraphError("symbolic covariance requires an acyclic graph")
    n = g.n
    ring = _param_ring(g)
    zero = Polynomial.zero(ring)
    one = Polynomial.constant(ring, 1)
    lam = [[zero] * n for _ in range(n)]
    for (u, v) in sorted(g.directed):
        lam[u][v] = ring.variable(f"l_{g.names[u]}{g.names[v]}")
    om = [[zero] * n for _ in range(n)]
    for v in range(n):
        om[v][v] = ring.variable(f"w_{g.names[v]}{g.names[v]}")
    for (u, v) in sorted(g.bidirected):
        om[u][v] = om[v][u] = ring.variable(f"w_{g.names[u]}{g.names[v]}")
    t = [[one if i == j else zero for j in range(n)] for i in range(n)]
    power = [row[:] for row in t]
    for _ in range(n - 1):
        power = _poly_matmul(power, lam, zero)
        t = [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(t, power)]
    tt = [[t[j][i] for j in range(n)] for i in range(n)]
    sig = _poly_matmul(_poly_matmul(tt, om, zero), t, zero)
    images = [sig[i][j] for (i, j) in sigma_pairs(n)]
    result = (ring, images)
    _SUBS_CACHE[key] = result
    return result


def _poly_matmul(a, b, zero):
    n = len(a)
    m = len(b[0])
    k = len(b)
    out = [[zero] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            acc = zero
            for x in range(k):
                if a[i][x].is_zero or b[x][j].is_zero:
                    continue
                acc = acc + a[i][x] * b[x][j]
            out[i][j] = acc
    return out


def vanishes_on_model(p: Polynomial, g: MixedGraph) -> bool:
    """Exact test: does the polynomial vanish on every covariance the graph
    can produce?  Decided by symbolic substitution of the parameterization."""
    ring, images = model_sigma_images(g)
    return p.substitute(ring, images).is_zero


def vanishes_numeric_screen(
    polys, g: MixedGraph, draws: int = 2, seed: int = 0
) -> bool:
    """Cheap exact necessary condition: evaluate at random in-model points."""
    n = g.n
    for t in range(draws):
        rng = random.Random(seed * 7_919 + t)
        lam, om = draw_integer_params(g, rng)
        sig = exact_sigma(g, lam, om)
        values = sigma_values(sig, n)
        for p in polys:
            if p.evaluate(values) != 0:
                return False
    return True


def clusters_equivalent(
    cons_a: ConstraintSet,
    dim_a: int,
    rep_a: MixedGraph,
    cons_b: ConstraintSet,
    dim_b: int,
    rep_b: MixedGraph,
) -> bool:
    """Exact algebraic-equivalence test between two constraint-described
    models: equal dimension plus mutual vanishing of all constraints."""
    if dim_a != dim_b:
        return False
    if cons_a.canonical_key() == cons_b.canonical_key():
        return True
    if not vanishes_numeric_screen(cons_a.polys, rep_b):
        return False
    if not vanishes_numeric_screen(cons_b.polys, rep_a):
        return False
    for p in cons_a.polys:
        if not vanishes_on_model(p, rep_b):
            return False
    for p in cons_b.polys:
        if not vanishes_on_model(p, rep_a):
            return False
    return True
