"""Detection of Y-structures in simulated data, with class-based filtering.

For every ordered 4-tuple of nodes, an independence-test battery decides
whether the tuple looks like a (possibly extended) Y-structure; tuples
passing the battery can additionally be filtered by whether equivalence-
class selection on the 4-variable margin picks the Y-structure classes.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .equivalence import ClassTable
from .errors import DataError, SemalgError
from .fitting import (
    FitOptions,
    GeneratorConfig,
    SampleCov,
    fisher_z_test,
    random_sem,
    sample_cov_from_data,
    sample_data,
    select_class,
)
from .graphs import MixedGraph


# -- latent projection -----------------------------------------------------------

def latent_projection(g: MixedGraph, keep: tuple[int, ...]) -> MixedGraph:
    """Marginal mixed graph on ``keep`` (in the given order).

    A directed edge survives when a directed path runs through dropped
    nodes only; a bidirected edge appears when some path has arrowheads at
    both endpoints and every intermediate is a dropped non-collider.
    """
    if len(set(keep)) != len(keep):
        raise SemalgError("projection nodes must be distinct")
    kept_pos = {v: i for i, v in enumerate(keep)}
    dropped = [v for v in range(g.n) if v not in kept_pos]
    children: dict[int, list[int]] = {v: [] for v in range(g.n)}
    for (u, v) in g.directed:
        children[u].append(v)

    directed = set()
    for u in keep:
        seen: set[int] = set()
        stack = list(children[u])
        while stack:
            x = stack.pop()
            if x in kept_pos:
                if x != u:
                    directed.add((kept_pos[u], kept_pos[x]))
                continue
            if x in seen:
                continue
            seen.add(x)
            stack.extend(children[x])

    incident: dict[int, list[tuple[int, bool, bool]]] = {v: [] for v in range(g.n)}
    for (u, v) in g.directed:
        # (other endpoint, head at this node, head at other node)
        incident[u].append((v, False, True))
        incident[v].append((u, True, False))
    for (u, v) in g.bidirected:
        incident[u].append((v, True, True))
        incident[v].append((u, True, True))

    bidirected = set()
    for a in keep:
        reached: set[tuple[int, bool]] = set()
        stack2: list[tuple[int, bool]] = []
        for (m, head_here, head_there) in incident[a]:
            if not head_here:
                continue
            if m in kept_pos:
                if head_there and m != a:
                    i, j = kept_pos[a], kept_pos[m]
                    bidirected.add((min(i, j), max(i, j)))
            else:
                stack2.append((m, head_there))
        while stack2:
            m, arrived_head = stack2.pop()
            if (m, arrived_head) in reached:
                continue
            reached.add((m, arrived_head))
            for (x, head_at_m, head_at_x) in incident[m]:
                if arrived_head and head_at_m:
                    continue  # collider at a dropped intermediate blocks
                if x in kept_pos:
                    if head_at_x and x != a:
                        i, j = kept_pos[a], kept_pos[x]
                        bidirected.add((min(i, j), max(i, j)))
                else:
                    stack2.append((x, head_at_x))
    names = tuple(g.names[v] for v in keep)
    return MixedGraph(names, frozenset(directed), frozenset(bidirected))


# -- reference structures ------------------------------------------------------------

def y_structure_graph() -> MixedGraph:
    """Two sources converging into a spine: a -> c <- b, c -> d."""
    return MixedGraph.from_edges(4, directed=[(0, 2), (1, 2), (2, 3)])


def extended_y_structure_graph() -> MixedGraph:
    """Variant with confounding in place of the a-side edges."""
    return MixedGraph.from_edges(
        4, directed=[(1, 2), (2, 3)], bidirected=[(0, 2), (0, 3)]
    )


def target_class_ids(table: ClassTable) -> tuple[int, int]:
    return (
        table.class_of_graph(y_structure_graph()),
        table.class_of_graph(extended_y_structure_graph()),
    )


# -- independence-test battery ---------------------------------------------------------

def _corr_given(corr: np.ndarray, x: int, y: int, c: int) -> float:
    rxy, rxc, ryc = corr[x, y], corr[x, c], corr[y, c]
    denom = (1.0 - rxc * rxc) * (1.0 - ryc * ryc)
    if denom <= 0:
        raise DataError("degenerate correlation in conditional test")
    return float((rxy - rxc * ryc) / math.sqrt(denom))


def battery_pass(
    corr: np.ndarray,
    n_samples: int,
    tup: tuple[int, int, int, int],
    alpha: float,
    variant: str = "combined",
) -> bool:
    """Test battery for a candidate Y-structure on (a, b, c, d), spine c->d.

    Requires dependence on {a,c}, {b,c}, {c,d}, {a,d}, {b,d}; conditional
    independence of a,d and b,d given c; conditional dependence of a,b
    given c; and, for the strict variant only, marginal independence of
    a,b.  ``combined`` accepts either structure, i.e. drops the marginal
    requirement.
    """
    if variant not in ("y", "extended", "combined"):
        raise SemalgError(f"unknown battery variant {variant!r}")
    a, b, c, d = tup
    try:
        for (x, y) in ((a, c), (b, c), (c, d), (a, d), (b, d)):
            if not fisher_z_test(corr[x, y], n_samples, 0, alpha):
                return False
        if variant == "y":
            if fisher_z_test(corr[a, b], n_samples, 0, alpha):
                return False
        if fisher_z_test(_corr_given(corr, a, d, c), n_samples, 1, alpha):
            return False
        if fisher_z_test(_corr_given(corr, b, d, c), n_samples, 1, alpha):
            return False
        if not fisher_z_test(_corr_given(corr, a, b, c), n_samples, 1, alpha):
            return False
    except DataError:
        return False
    return True


# -- experiment -------------------------------------------------------------------------

@dataclass
class TupleVerdict:
    nodes: tuple[int, int, int, int]
    battery: bool
    truth: bool
    selected_full: int | None = None
    selected_mag: int | None = None
    filter_pass: dict = field(default_factory=dict)


@dataclass
class FilterStats:
    passes: int = 0
    true_positives: int = 0

    @property
    def precision(self) -> float:
        return self.true_positives / self.passes if self.passes else float("nan")


@dataclass
class ExperimentReport:
    p: int
    reps: int
    n_samples: int
    alpha: float
    seed: int
    filters: tuple[str, ...]
    battery_passes: int = 0
    battery_true_positives: int = 0
    stats: dict = field(default_factory=dict)
    runtime_s: float = 0.0

    def precision(self, mode: str) -> float:
        return self.stats[mode].precision

    def filter_recall(self, mode: str) -> float:
        if self.battery_true_positives == 0:
            return float("nan")
        return self.stats[mode].true_positives / self.battery_true_positives

    def to_json_dict(self) -> dict:
        out = {
            "p": self.p,
            "reps": self.reps,
            "n_samples": self.n_samples,
            "alpha": self.alpha,
            "seed": self.seed,
            "battery_passes": self.battery_passes,
            "battery_true_positives": self.battery_true_positives,
            "runtime_s": round(self.runtime_s, 3),
            "filters": {},
        }
        for mode in self.filters:
            st = self.stats[mode]
            out["filters"][mode] = {
                "passes": st.passes,
                "true_positives": st.true_positives,
                "precision": None if st.passes == 0 else st.precision,
                "filter_recall": None
                if self.battery_true_positives == 0
                else self.filter_recall(mode),
            }
        return out


def _class_perm_maps(table: ClassTable) -> dict[tuple, list[int]]:
    """For each 4-node permutation, the induced map on class ids."""
    import itertools

    maps = {}
    for perm in itertools.permutations(range(4)):
        lookup = [0] * len(table.classes)
        for entry in table.classes:
            lookup[entry.id] = table.class_of_graph(entry.representative.relabel(perm))
        maps[perm] = lookup
    return maps


EXPERIMENT_FIT_OPTS = FitOptions(max_iter=400, restarts=2)

# Sparser than the generic simulation defaults: dense ground truths almost
# never contain Y-patterns after projection, leaving nothing to detect.
EXPERIMENT_GENERATOR = GeneratorConfig(p_directed=0.15, p_bidirected=0.05)


def run_experiment(
    p: int,
    reps: int,
    n_samples: int,
    alpha: float,
    seed: int,
    table: ClassTable | None,
    filters: tuple[str, ...] = ("none", "mag", "full"),
    variant: str = "combined",
    fit_opts: FitOptions | None = None,
    generator: GeneratorConfig | None = None,
) -> ExperimentReport:
    """Run the detection experiment over ``reps`` simulated datasets.

    Class selection is permutation-equivariant, so it runs once per
    unordered node quadruple; every ordered tuple's verdict is derived by
    mapping the selected class through the corresponding relabeling.
    """
    if p < 4:
        raise SemalgError("experiment needs at least four variables")
    need_selection = any(m in ("mag", "full") for m in filters)
    if need_selection and table is None:
        raise SemalgError("class table required for mag/full filters")
    base_opts = fit_opts or EXPERIMENT_FIT_OPTS
    generator = generator or EXPERIMENT_GENERATOR

    report = ExperimentReport(
        p=p, reps=reps, n_samples=n_samples, alpha=alpha, seed=seed, filters=tuple(filters)
    )
    for mode in filters:
        report.stats[mode] = FilterStats()

    if table is not None and need_selection:
        y_id, ext_id = target_class_ids(table)
        targets = {y_id, ext_id}
        perm_maps = _class_perm_maps(table)
        mag_ids = {e.id for e in table.classes if e.is_mag_describable()}
    start = time.monotonic()

    for rep in range(reps):
        rep_seed = seed * 10_007 + rep
        g, params = random_sem(p, rep_seed, generator)
        data = sample_data(g, params, n_samples, rep_seed * 31 + 1)
        cov = sample_cov_from_data(data, g.names)
        sd = np.sqrt(np.diag(cov.s))
        corr = cov.s / np.outer(sd, sd)

        passing: list[tuple[int, int, int, int]] = []
        for tup in _ordered_tuples(p):
            if battery_pass(corr, n_samples, tup, alpha, variant):
                passing.append(tup)

        selections: dict[tuple, tuple[int | None, int | None]] = {}
        if need_selection:
            for quad in sorted({tuple(sorted(t)) for t in passing}):
                sub = cov.s[np.ix_(quad, quad)]
                subcov = SampleCov(sub, n_samples, tuple(cov.names[i] for i in quad))
                opts = FitOptions(
                    tol=base_opts.tol,
                    max_iter=base_opts.max_iter,
                    restarts=base_opts.restarts,
                    seed=rep_seed * 131 + sum(quad),
                )
                sel = select_class(table, subcov, opts)
                best_mag = next(
                    (sc.class_id for sc in sel.scores if sc.class_id in mag_ids),
                    None,
                )
                selections[quad] = (sel.best_class, best_mag)

        for tup in passing:
            truth = is_y_pattern(latent_projection(g, tup))
            report.battery_passes += 1
            if truth:
                report.battery_true_positives += 1
            if need_selection:
                quad = tuple(sorted(tup))
                base_full, base_mag = selections[quad]
                # Position i of the ordered problem holds quad[pos[i]]; the
                # selected class relabels by the inverse position map.
                pos = tuple(quad.index(t) for t in tup)
                mu = tuple(pos.index(q) for q in range(4))
                lookup = perm_maps[mu]
                sel_full = lookup[base_full] if base_full is not None else None
                sel_mag = lookup[base_mag] if base_mag is not None else None
            for mode in filters:
                if mode == "none":
                    keep = True
                elif mode == "full":
                    keep = sel_full in targets
                else:
                    keep = sel_mag in targets
                if keep:
                    report.stats[mode].passes += 1
                    if truth:
                        report.stats[mode].true_positives += 1
    report.runtime_s = time.monotonic() - start
    return report


def _ordered_tuples(p: int):
    for a in range(p):
        for b in range(p):
            if b == a:
                continue
            for c in range(p):
                if c in (a, b):
                    continue
                for d in range(p):
                    if d in (a, b, c):
                        continue
                    yield (a, b, c, d)


def is_y_pattern(proj: MixedGraph) -> bool:
    """Exact membership in the Y or extended-Y pattern on (a, b, c, d).

    Y: a and b each joined to c by any head-at-c edge, spine c -> d, no
    other edges.  Extended: bidirected a-c and a-d, b joined to c by any
    head-at-c edge, spine c -> d, no other edges.
    """
    state = {
        (i, j): proj.pair_state(i, j) for i in range(4) for j in range(i + 1, 4)
    }
    head_at_second = (1, 3, 4)  # lo->hi, lo<->hi, or both
    if state[(2, 3)] != 1:  # spine must be exactly c -> d
        return False
    if state[(0, 1)] != 0 or state[(1, 3)] != 0:
        return False
    y_shape = (
        state[(0, 2)] in head_at_second
        and state[(1, 2)] in head_at_second
        and state[(0, 3)] == 0
    )
    extended_shape = (
        state[(0, 2)] == 3
        and state[(0, 3)] == 3
        and state[(1, 2)] in head_at_second
    )
    return y_shape or extended_shape
