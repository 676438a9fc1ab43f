"""Gaussian likelihood machinery: RICF fitting, BIC class selection,
partial correlations, and the star-graph inequality check."""
from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from . import _kernels
from .errors import DataError, NonGenericError, NotConvergedError, SemalgError
from .graphs import MixedGraph, graph_from_code, skeleton, structure_predicates
from .halftrek import (
    Membership,
    ParamPair,
    find_identifying_sets,
    membership,
    recover_lambda,
    recover_omega,
)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 1000
DEFAULT_RESTARTS = 10

_FLAGS_CACHE: dict = {}


def _graph_flags(g: MixedGraph):
    flags = _FLAGS_CACHE.get(g)
    if flags is None:
        flags = structure_predicates(g)
        _FLAGS_CACHE[g] = flags
    return flags


@dataclass(frozen=True)
class SampleCov:
    """Sample covariance (maximum-likelihood normalization) with its size."""

    s: np.ndarray
    n_samples: int
    names: tuple[str, ...]

    def __post_init__(self):
        s = self.s
        n = len(self.names)
        if s.shape != (n, n):
            raise DataError("covariance shape does not match node names")
        if np.max(np.abs(s - s.T)) > 1e-12 * max(1.0, float(np.max(np.abs(s)))):
            raise DataError("covariance matrix is not symmetric")
        if np.min(np.linalg.eigvalsh((s + s.T) / 2)) <= 0:
            raise DataError("covariance matrix is not positive definite")
        if self.n_samples < n + 1:
            raise DataError("need at least n+1 samples")


@dataclass
class FitResult:
    lam: np.ndarray
    omega: np.ndarray
    sigma_hat: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    restarts_used: int
    fitted_graph: MixedGraph | None = None


@dataclass
class FitOptions:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0


def log_likelihood(sigma_hat: np.ndarray, s: np.ndarray, n_samples: int) -> float:
    """Gaussian profile log-likelihood (means profiled out)."""
    n = s.shape[0]
    sign, logdet = np.linalg.slogdet(sigma_hat)
    if sign <= 0:
        raise DataError("sigma_hat is not positive definite")
    trace = float(np.sum(s * np.linalg.inv(sigma_hat)))
    return -0.5 * n_samples * (n * math.log(2.0 * math.pi) + logdet + trace)


def ricf_fit(
    g: MixedGraph, s: np.ndarray, n_samples: int, opts: FitOptions | None = None
) -> FitResult:
    """Maximum-likelihood fit by iterated node-wise conditional updates.

    DAGs are solved by a single sweep (the update is exact there).  On
    numerical failure or non-convergence, retries from random starting
    points up to ``opts.restarts`` times; raises ``NotConvergedError``
    with the best attempt when all fail.
    """
    opts = opts or FitOptions()
    flags = _graph_flags(g)
    if not flags.is_acyclic:
        raise SemalgError("fitting requires an acyclic graph")
    n = g.n
    pa = [sorted(g.parents(v)) for v in range(n)]
    sib = [sorted(g.siblings(v)) for v in range(n)]
    single_sweep = flags.is_dag

    rng = None
    best: FitResult | None = None
    for attempt in range(opts.restarts + 1):
        if attempt == 0:
            lam0 = np.zeros((n, n))
            om0 = np.diag(np.diag(s)).astype(float)
        else:
            if rng is None:
                rng = np.random.default_rng(opts.seed)
            lam0 = np.zeros((n, n))
            om0 = np.zeros((n, n))
            for (u, v) in g.directed:
                lam0[u, v] = rng.standard_normal()
            scale = float(np.mean(np.diag(s)))
            for (u, v) in g.bidirected:
                om0[u, v] = om0[v, u] = 0.3 * scale * rng.standard_normal()
            for v in range(n):
                om0[v, v] = scale + np.sum(np.abs(om0[v, :]))
        lam, om, ll, iters, converged, status = _kernels.ricf_core(
            s, n_samples, pa, sib, lam0, om0, opts.tol, opts.max_iter, single_sweep
        )
        # status: 1 singular system, 2 covariance left the PD cone, 3 the
        # likelihood decreased beyond slack.  All are numerical failures of
        # this attempt; the ascent guarantee holds within accepted runs.
        result = FitResult(
            lam=np.asarray(lam),
            omega=np.asarray(om),
            sigma_hat=np.zeros((n, n)),
            loglik=float(ll),
            iterations=int(iters),
            converged=bool(converged) and status == 0,
            restarts_used=attempt,
            fitted_graph=g,
        )
        if result.converged:
            a = np.eye(n) - result.lam
            t = np.linalg.inv(a)
            result.sigma_hat = t.T @ result.omega @ t
            return result
        if best is None or (
            not math.isnan(result.loglik)
            and (math.isnan(best.loglik) or result.loglik > best.loglik)
        ):
            best = result
    assert best is not None
    raise NotConvergedError(
        f"RICF failed to converge after {opts.restarts + 1} attempts", best=best
    )


def fit_class(
    members, s: np.ndarray, n_samples: int, opts: FitOptions | None = None
) -> FitResult:
    """Fit one equivalence class via a preferred member.

    ``members`` is an iterable of the class's member graphs.  DAG members
    are tried first, then bow-free members, then the rest; after a
    convergence failure only members with a not-yet-tried skeleton are
    attempted.
    """
    graphs = _member_graphs(members)
    if not graphs:
        raise SemalgError("empty class")

    def preference(g: MixedGraph):
        flags = _graph_flags(g)
        rank = 0 if flags.is_dag else (1 if flags.is_bow_free else 2)
        return (rank, g.edge_count(), g.code())

    ordered = sorted(graphs, key=preference)
    tried_skeletons: set[frozenset] = set()
    last_error: NotConvergedError | None = None
    for g in ordered:
        sk = frozenset(skeleton(g))
        if tried_skeletons and sk in tried_skeletons:
            continue
        try:
            return ricf_fit(g, s, n_samples, opts)
        except NotConvergedError as exc:
            tried_skeletons.add(sk)
            last_error = exc
    assert last_error is not None
    raise NotConvergedError(
        "all distinct-skeleton members failed to converge", best=last_error.best
    )


def _member_graphs(members) -> list[MixedGraph]:
    out = []
    for m in members:
        if isinstance(m, MixedGraph):
            out.append(m)
        else:
            raise SemalgError("fit_class expects MixedGraph members")
    return out


def class_member_graphs(entry, n: int) -> list[MixedGraph]:
    """Decode a ClassEntry's member codes into graphs."""
    return [graph_from_code(n, code) for code in entry.members]


def class_fit_plan(entry, n: int) -> list[MixedGraph]:
    """Members worth fitting, in preference order, cached on the entry.

    The first entry is the preferred member (DAG, else bow-free, else
    fewest edges); the rest are one best member per remaining distinct
    skeleton, which is exactly the retry set after convergence failures.
    """
    plan = getattr(entry, "_fit_plan", None)
    if plan is not None:
        return plan

    def preference(g: MixedGraph):
        flags = _graph_flags(g)
        rank = 0 if flags.is_dag else (1 if flags.is_bow_free else 2)
        return (rank, g.edge_count(), g.code())

    best_by_skeleton: dict[frozenset, MixedGraph] = {}
    for code in entry.members:
        g = graph_from_code(n, code)
        sk = frozenset(skeleton(g))
        cur = best_by_skeleton.get(sk)
        if cur is None or preference(g) < preference(cur):
            best_by_skeleton[sk] = g
    plan = sorted(best_by_skeleton.values(), key=preference)
    entry._fit_plan = plan
    return plan


def recover_params_via_equivalent(
    g_target: MixedGraph, fit: FitResult, tol: float = 1e-8
) -> ParamPair:
    """Parameters for an equivalent graph from a fitted covariance.

    The fitted covariance of any equivalent model lies (generically) in
    the target's model too, so the recovery map applies directly.
    """
    status = find_identifying_sets(g_target)
    if not status.identifiable:
        raise SemalgError("target graph is not identifiable")
    sigma = fit.sigma_hat
    verdict = membership(g_target, status.sets, sigma, tol)
    if verdict is not Membership.INSIDE:
        lam = None
        residual = None
        try:
            lam = recover_lambda(g_target, status.sets, sigma)
            om = recover_omega(lam, sigma)
            residual = 0.0
            for u in range(g_target.n):
                for v in range(u + 1, g_target.n):
                    if (u, v) not in g_target.bidirected:
                        residual = max(residual, abs(float(om[u, v])))
        except SemalgError:
            pass
        raise NonGenericError(
            "fitted covariance is non-generic for the target graph",
            residual=residual,
        )
    lam = recover_lambda(g_target, status.sets, sigma)
    om = recover_omega(lam, sigma)
    om_masked = np.zeros_like(om)
    for v in range(g_target.n):
        om_masked[v, v] = om[v, v]
    for (u, v) in g_target.bidirected:
        om_masked[u, v] = om_masked[v, u] = om[u, v]
    return ParamPair(lam, om_masked)


# -- scoring -------------------------------------------------------------------

def bic(fit: FitResult, dimension: int, n_samples: int, n_nodes: int) -> float:
    """-2 loglik + d log N with d = class dimension plus node variances."""
    if not fit.converged:
        return float("inf")
    d = dimension + n_nodes
    return -2.0 * fit.loglik + d * math.log(n_samples)


@dataclass
class ClassScore:
    class_id: int
    loglik: float
    dimension: int
    param_count: int
    bic: float
    converged: bool
    fitted_code: int | None


@dataclass
class ScoreReport:
    scores: list[ClassScore]
    best_class: int
    ties: list[int]

    def to_json_dict(self) -> dict:
        return {
            "best_class": self.best_class,
            "ties": self.ties,
            "scores": [
                {
                    "class_id": sc.class_id,
                    "loglik": sc.loglik,
                    "dimension": sc.dimension,
                    "param_count": sc.param_count,
                    "bic": sc.bic,
                    "converged": sc.converged,
                    "fitted_member": sc.fitted_code,
                }
                for sc in self.scores
            ],
        }


def select_class(
    table,
    cov: SampleCov,
    opts: FitOptions | None = None,
    class_ids=None,
) -> ScoreReport:
    """Score every class by BIC and pick the best.

    Non-converged classes score +inf (reported, never dropped).  Each
    class fit draws its RNG stream from (master seed, class id), so the
    report is independent of evaluation order.
    """
    opts = opts or FitOptions()
    n = len(cov.names)
    if table.n != n:
        raise DataError("class table node count does not match data")
    scores = []
    for entry in table.classes:
        if class_ids is not None and entry.id not in class_ids:
            continue
        class_opts = FitOptions(
            tol=opts.tol,
            max_iter=opts.max_iter,
            restarts=opts.restarts,
            seed=opts.seed * 100_003 + entry.id,
        )
        members = class_fit_plan(entry, n)
        try:
            fit = fit_class(members, cov.s, cov.n_samples, class_opts)
            score = bic(fit, entry.dimension, cov.n_samples, n)
            scores.append(
                ClassScore(
                    class_id=entry.id,
                    loglik=fit.loglik,
                    dimension=entry.dimension,
                    param_count=entry.dimension + n,
                    bic=score,
                    converged=True,
                    fitted_code=fit.fitted_graph.code() if fit.fitted_graph else None,
                )
            )
        except NotConvergedError:
            scores.append(
                ClassScore(
                    class_id=entry.id,
                    loglik=float("nan"),
                    dimension=entry.dimension,
                    param_count=entry.dimension + n,
                    bic=float("inf"),
                    converged=False,
                    fitted_code=None,
                )
            )
    scores.sort(key=lambda sc: (sc.bic, sc.class_id))
    best = scores[0]
    ties = [
        sc.class_id
        for sc in scores[1:]
        if sc.bic - best.bic <= 1e-6 and math.isfinite(sc.bic)
    ]
    return ScoreReport(scores=scores, best_class=best.class_id, ties=ties)


# -- partial correlations and tests ------------------------------------------------

def partial_corr(s: np.ndarray, v: int, w: int, cond=()) -> float:
    """Partial correlation of v and w given the conditioning set."""
    cond = tuple(cond)
    if v in cond or w in cond or v == w:
        raise DataError("conditioning set must exclude the tested pair")
    idx = [v, w, *cond]
    sub = s[np.ix_(idx, idx)]
    try:
        k = np.linalg.inv(sub)
    except np.linalg.LinAlgError as exc:
        raise DataError("singular submatrix in partial correlation") from exc
    denom = math.sqrt(float(k[0, 0] * k[1, 1]))
    return float(-k[0, 1] / denom)


def fisher_z_test(r: float, n_samples: int, k: int, alpha: float) -> bool:
    """True when dependence is detected at level ``alpha``.

    Uses z = atanh(r) * sqrt(N - k - 3) against the two-sided normal
    quantile; ``k`` is the conditioning-set size.
    """
    if n_samples <= k + 3:
        raise DataError("need more than k+3 samples for the z test")
    r = min(max(r, -0.999999999), 0.999999999)
    z = math.atanh(r) * math.sqrt(n_samples - k - 3)
    return abs(z) > float(norm.ppf(1 - alpha / 2))


def prop2_holds(sigma: np.ndarray, slack: float = 1e-12) -> bool:
    """Inequality satisfied by the three-bow star model on (a, b, c, d):
    the product of the three partial correlations given the hub is
    non-positive."""
    if sigma.shape != (4, 4):
        raise DataError("inequality check is defined for four nodes")
    if np.min(np.linalg.eigvalsh((sigma + sigma.T) / 2)) <= 0:
        raise DataError("covariance matrix is not positive definite")
    r_bc = partial_corr(sigma, 1, 2, (0,))
    r_cd = partial_corr(sigma, 2, 3, (0,))
    r_bd = partial_corr(sigma, 1, 3, (0,))
    return r_bc * r_cd * r_bd <= slack


# -- random models and sampling ------------------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    p_directed: float = 0.3
    p_bidirected: float = 0.15
    lam_low: float = 0.3
    lam_high: float = 0.9
    om_low: float = 0.2
    om_high: float = 0.5


def random_sem(
    p: int, seed: int, config: GeneratorConfig | None = None
) -> tuple[MixedGraph, ParamPair]:
    """Random acyclic mixed graph with parameters; the noise covariance is
    made diagonally dominant, so it is always positive definite."""
    config = config or GeneratorConfig()
    rng = random.Random(seed)
    order = list(range(p))
    rng.shuffle(order)
    directed = []
    bidirected = []
    for i in range(p):
        for j in range(i + 1, p):
            if rng.random() < config.p_directed:
                directed.append((order[i], order[j]))
            if rng.random() < config.p_bidirected:
                bidirected.append((order[i], order[j]))
    g = MixedGraph.from_edges(p, directed=directed, bidirected=bidirected)
    lam = np.zeros((p, p))
    for (u, v) in sorted(g.directed):
        mag = rng.uniform(config.lam_low, config.lam_high)
        lam[u, v] = mag if rng.random() < 0.5 else -mag
    om = np.zeros((p, p))
    for (u, v) in sorted(g.bidirected):
        mag = rng.uniform(config.om_low, config.om_high)
        om[u, v] = om[v, u] = mag if rng.random() < 0.5 else -mag
    for v in range(p):
        om[v, v] = 1.0 + float(np.sum(np.abs(om[v, :])))
    return g, ParamPair(lam, om)


def sample_data(
    g: MixedGraph, params: ParamPair, n_samples: int, seed: int
) -> np.ndarray:
    """Draw rows X = eps (I - L)^{-1} with eps ~ N(0, Omega)."""
    rng = np.random.default_rng(seed)
    n = g.n
    chol = np.linalg.cholesky(params.omega)
    eps = rng.standard_normal((n_samples, n)) @ chol.T
    return eps @ np.linalg.inv(np.eye(n) - params.lam)


def sample_cov_from_data(data: np.ndarray, names) -> SampleCov:
    centered = data - data.mean(axis=0, keepdims=True)
    s = centered.T @ centered / data.shape[0]
    return SampleCov(s, data.shape[0], tuple(names))


# -- CSV input -----------------------------------------------------------------------

def load_covariance_csv(path: str, n_samples: int) -> SampleCov:
    """Covariance CSV: header row of node names, then the matrix."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row and any(x.strip() for x in row)]
    if not rows:
        raise DataError("empty covariance file")
    names = tuple(x.strip() for x in rows[0])
    data = []
    for row in rows[1:]:
        try:
            data.append([float(x) for x in row])
        except ValueError as exc:
            raise DataError(f"non-numeric covariance entry: {exc}") from exc
    s = np.array(data)
    if s.shape != (len(names), len(names)):
        raise DataError("covariance matrix shape does not match header")
    return SampleCov(s, n_samples, names)


def load_data_csv(path: str) -> SampleCov:
    """Raw-sample CSV: header row of node names, one observation per row."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row and any(x.strip() for x in row)]
    if not rows:
        raise DataError("empty data file")
    names = tuple(x.strip() for x in rows[0])
    try:
        data = np.array([[float(x) for x in row] for row in rows[1:]])
    except ValueError as exc:
        raise DataError(f"non-numeric data entry: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != len(names):
        raise DataError("data width does not match header")
    return sample_cov_from_data(data, names)
