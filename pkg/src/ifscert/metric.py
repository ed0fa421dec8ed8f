"""Chain metrics on point clouds: neighbour graphs, shortest chains, profiles.

The chained distance between two samples is the length of the shortest path
in the graph whose edges join samples strictly closer than a hop bound
``epsilon``. Driving ``epsilon`` to zero along a refinement schedule and
watching the values either settle or blow up is the whole point of this
module.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .geometry import ContinuumModel, Point, PointCloud, as_point

# Hops below three pitches cannot be told apart from sampling noise.
_MIN_HOP_PITCHES = 3.0

# Relative tolerance used when snapping query points onto cloud samples.
_SNAP_SLACK = 1.000001

# Edge budget for a single neighbour graph (about 1.3 GB of index pairs).
_MAX_EDGES = 8e7

# Verdict thresholds for chain profiles.
DIVERGENCE_SLOPE = -0.15
CONVERGENCE_REL_STEP = 0.01


def hausdorff(a: PointCloud, b: PointCloud) -> float:
    """Hausdorff distance between two clouds (exact, two nearest-neighbour passes)."""
    ta, tb = cKDTree(a.points), cKDTree(b.points)
    d_ab = tb.query(a.points, k=1)[0].max()
    d_ba = ta.query(b.points, k=1)[0].max()
    return float(max(d_ab, d_ba))


@dataclass(frozen=True)
class EpsGraph:
    """Undirected neighbour graph with hops strictly below ``epsilon``."""

    cloud: PointCloud
    epsilon: float
    edges: np.ndarray   # (E, 2) int64, each pair once with i < j
    weights: np.ndarray  # (E,) float64 Euclidean hop lengths

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def matrix(self) -> csr_matrix:
        n = len(self.cloud)
        i = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        j = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        w = np.concatenate([self.weights, self.weights])
        return csr_matrix((w, (i, j)), shape=(n, n))


def eps_graph(cloud: PointCloud, epsilon: float) -> EpsGraph:
    """Build the neighbour graph of ``cloud`` with hop lengths strictly below ``epsilon``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if epsilon < _MIN_HOP_PITCHES * cloud.pitch:
        warnings.warn(
            f"epsilon={epsilon:g} is below {_MIN_HOP_PITCHES:g} pitches; "
            "chain values at this resolution are unreliable",
            stacklevel=2,
        )
    tree = cKDTree(cloud.points)
    # refuse graphs that would not fit in memory before materializing them
    approx_pairs = (tree.count_neighbors(tree, epsilon) - len(cloud)) // 2
    if approx_pairs > _MAX_EDGES:
        raise ValueError(
            f"epsilon graph would have about {approx_pairs:.2g} edges "
            f"(limit {_MAX_EDGES:.2g}); use a coarser pitch or a smaller epsilon"
        )
    pairs = tree.query_pairs(r=epsilon, output_type="ndarray")
    if len(pairs):
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        pairs = pairs[order]
        w = np.linalg.norm(cloud.points[pairs[:, 0]] - cloud.points[pairs[:, 1]], axis=1)
        keep = w < epsilon  # query_pairs includes hops equal to epsilon
        pairs, w = pairs[keep], w[keep]
    else:
        pairs = np.empty((0, 2), dtype=np.int64)
        w = np.empty(0)
    return EpsGraph(cloud, float(epsilon), pairs.astype(np.int64), w)


def _snap_index(cloud: PointCloud, x: Point, tree: cKDTree | None = None) -> int:
    t = tree if tree is not None else cKDTree(cloud.points)
    dist, idx = t.query(as_point(x, cloud.dimension))
    if dist > cloud.pitch * _SNAP_SLACK:
        raise ValueError(
            f"point {np.asarray(x)} is {dist:g} away from the cloud, beyond its pitch "
            f"{cloud.pitch:g}"
        )
    return int(idx)


def chain_distance(cloud: PointCloud, x, y, epsilon: float) -> float:
    """Shortest chained distance between ``x`` and ``y`` over ``cloud``.

    ``x`` and ``y`` must lie within one pitch of a sample; they are snapped to
    the nearest one. Returns ``math.inf`` when no chain connects them.
    """
    graph = eps_graph(cloud, epsilon)
    return chain_distance_on_graph(graph, x, y)


def chain_distance_on_graph(graph: EpsGraph, x, y) -> float:
    tree = cKDTree(graph.cloud.points)
    si = _snap_index(graph.cloud, x, tree)
    ti = _snap_index(graph.cloud, y, tree)
    if si == ti:
        return 0.0
    dist = dijkstra(graph.matrix(), directed=False, indices=si)
    return float(dist[ti])


@dataclass(frozen=True)
class ChainMetricProfile:
    """Chain values along a geometric refinement schedule, with a verdict.

    ``verdict`` is one of ``"diverges"``, ``"converges"``, ``"inconclusive"``.
    Disconnected entries are recorded as ``inf``.
    """

    epsilons: np.ndarray
    pitches: np.ndarray
    values: np.ndarray
    verdict: str
    slope: float | None = None
    limit: float | None = None
    note: str = ""

    def __post_init__(self):
        for name in ("epsilons", "pitches", "values"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def summary(self) -> str:
        bits = [f"verdict={self.verdict}"]
        if self.slope is not None:
            bits.append(f"slope={self.slope:.6g}")
        if self.limit is not None:
            bits.append(f"limit={self.limit:.17g}")
        if self.note:
            bits.append(f"note={self.note}")
        return " ".join(bits)


def chain_profile(
    model: ContinuumModel,
    x,
    y,
    eps0: float,
    k_max: int,
    pitch_ratio: float = 10.0,
) -> ChainMetricProfile:
    """Chain values between two points of ``model`` at hop bounds ``eps0 * 2**-k``.

    Each entry resamples the model at pitch ``eps_k / pitch_ratio``. ``x`` and
    ``y`` may be marked labels or coordinates.
    """
    if eps0 <= 0 or k_max < 0:
        raise ValueError("need eps0 > 0 and k_max >= 0")
    if pitch_ratio < _MIN_HOP_PITCHES:
        raise ValueError("pitch_ratio below the reliable hop resolution")
    px = model.resolve(x)
    py = model.resolve(y)
    epsilons = eps0 * 0.5 ** np.arange(k_max + 1)
    pitches = epsilons / pitch_ratio
    values = np.empty(k_max + 1)
    for k, (eps, delta) in enumerate(zip(epsilons, pitches)):
        cloud = model.refine(float(delta))
        values[k] = chain_distance(cloud, px, py, float(eps))
    verdict, slope, limit, note = _profile_verdict(epsilons, pitches, values, k_max)
    return ChainMetricProfile(epsilons, pitches, values, verdict, slope, limit, note)


def _profile_verdict(epsilons, pitches, values, k_max):
    window = max(2, math.ceil(k_max / 2)) if k_max >= 1 else 1
    window = min(window, len(values))
    ve = epsilons[-window:]
    vp = pitches[-window:]
    vv = values[-window:]
    if not np.all(np.isfinite(vv)):
        bad = epsilons[~np.isfinite(values)]
        return "inconclusive", None, None, f"disconnected at epsilon={bad.max():g}"
    slope = None
    if window >= 2:
        slope = float(np.polyfit(np.log(ve), np.log(np.maximum(vv, 1e-300)), 1)[0])
        growing = np.all(vv[1:] >= vv[:-1] - _MIN_HOP_PITCHES * vp[1:])
        if slope <= DIVERGENCE_SLOPE and growing:
            return "diverges", slope, None, ""
    if len(values) >= 3 and np.all(np.isfinite(values[-3:])):
        v1, v2, v3 = values[-3:]
        ok12 = abs(v2 - v1) <= CONVERGENCE_REL_STEP * max(abs(v1), 1e-300)
        ok23 = abs(v3 - v2) <= CONVERGENCE_REL_STEP * max(abs(v2), 1e-300)
        if ok12 and ok23:
            return "converges", slope, float(v3), ""
    return "inconclusive", slope, None, "no stable trend over the fit window"


@dataclass(frozen=True)
class MonotonicityResult:
    ok: bool
    subset_value: float
    superset_value: float


def monotonicity_check(sub: PointCloud, sup: PointCloud, x, y, epsilon: float) -> MonotonicityResult:
    """Check that chaining over the superset never beats chaining over the subset.

    ``sub`` must be contained in ``sup`` (within floating slack); raises otherwise.
    """
    tree = cKDTree(sup.points)
    dmax = tree.query(sub.points, k=1)[0].max()
    scale = max(1.0, float(np.abs(sup.points).max()))
    if dmax > 1e-9 * scale:
        raise ValueError(f"first cloud is not contained in the second (offset {dmax:g})")
    d_sub = chain_distance(sub, x, y, epsilon)
    d_sup = chain_distance(sup, x, y, epsilon)
    ok = d_sup <= d_sub + 1e-12 * max(1.0, abs(d_sub) if math.isfinite(d_sub) else 1.0)
    if math.isinf(d_sub) and math.isinf(d_sup):
        ok = True
    if math.isinf(d_sub):
        ok = True
    return MonotonicityResult(bool(ok), d_sub, d_sup)
