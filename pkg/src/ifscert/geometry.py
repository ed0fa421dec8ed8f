"""Geometric primitives: polylines, sampled point clouds, and continuum models.

Coordinates are float64 numpy arrays. A "cloud" is a finite sample of a
continuum together with the pitch (sampling resolution) it was produced at.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Point = np.ndarray

# Near-miss tolerance for self_intersects defaults to this fraction of the
# bounding-box diagonal.
DEFAULT_INTERSECT_TOL = 1e-12

# Above this segment count the quadratic all-pairs test is replaced by a
# plane sweep (2D only).
_ALLPAIRS_MAX_SEGMENTS = 4000

_PAIR_CHUNK = 2_000_000


def as_point(coords, dimension: int | None = None) -> Point:
    """Coerce ``coords`` to a finite 1-D float64 point."""
    p = np.asarray(coords, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("a point must be a nonempty 1-D coordinate array")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    if dimension is not None and p.size != dimension:
        raise ValueError(f"expected dimension {dimension}, got {p.size}")
    return p


@dataclass(frozen=True)
class Polyline:
    """Open or closed broken line with pairwise distinct consecutive vertices."""

    vertices: np.ndarray
    closed: bool = False
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2:
            raise ValueError("a polyline needs at least two vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("polyline vertices must be finite")
        if np.any(np.all(v[1:] == v[:-1], axis=1)):
            raise ValueError("consecutive polyline vertices must be distinct")
        if self.closed and np.all(v[0] == v[-1]):
            raise ValueError("closed polylines must not repeat the first vertex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Segment start and end arrays, including the closing edge if closed."""
        v = self.vertices
        if self.closed:
            return v, np.roll(v, -1, axis=0)
        return v[:-1], v[1:]


@dataclass(frozen=True)
class PointCloud:
    """Finite sample of a set, with the pitch it was sampled at.

    The pitch records the guarantee "every point of the underlying set lies
    within ``pitch`` of a sample and consecutive samples along the generating
    curve are at most ``pitch`` apart" for samplers that provide it.
    """

    points: np.ndarray
    pitch: float

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 2 or p.shape[0] == 0:
            raise ValueError("a point cloud must be a nonempty (N, dim) array")
        if not np.all(np.isfinite(p)):
            raise ValueError("cloud coordinates must be finite")
        if not (self.pitch > 0):
            raise ValueError("pitch must be positive")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class ContinuumModel:
    """Piecewise-polyline model of a continuum with labelled marked points.

    ``sampler``, when present, overrides the default piecewise resampling in
    :meth:`refine`; builders use it when the modelled set is defined by a
    formula rather than by its stored polylines. ``meta`` carries provenance
    (builder name and parameters) so files can be reconstituted.
    """

    pieces: tuple[Polyline, ...]
    marked: dict[str, Point]
    dimension: int
    sampler: Callable[[float], PointCloud] | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.pieces and not self.marked:
            raise ValueError("a model needs at least one piece or marked point")
        for piece in self.pieces:
            if piece.dimension != self.dimension:
                raise ValueError("piece dimension mismatch")
        marked = {k: as_point(v, self.dimension) for k, v in self.marked.items()}
        for label in marked:
            if not label.isascii() or any(c.isspace() for c in label):
                raise ValueError(f"marked label {label!r} must be ASCII without spaces")
        object.__setattr__(self, "marked", marked)

    def refine(self, delta: float) -> PointCloud:
        """Resample the model at pitch ``delta``."""
        if self.sampler is not None:
            return self.sampler(delta)
        if not self.pieces:
            pts = np.array(list(self.marked.values()), dtype=float)
            return PointCloud(pts, delta)
        clouds = [sample_polyline(piece, delta).points for piece in self.pieces]
        return PointCloud(np.vstack(clouds), delta)

    def resolve(self, target) -> Point:
        """Resolve a marked label or a coordinate sequence to a point."""
        if isinstance(target, str):
            if target not in self.marked:
                raise ValueError(f"unknown marked point {target!r}")
            return self.marked[target]
        return as_point(target, self.dimension)


def polar_to_cartesian(points) -> np.ndarray:
    """Map ``(r, theta)`` rows to Cartesian ``(x, y)`` rows."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[1] != 2:
        raise ValueError("polar points must have two components (r, theta)")
    if np.any(p[:, 0] < 0):
        raise ValueError("polar radius must be nonnegative")
    out = np.column_stack((p[:, 0] * np.cos(p[:, 1]), p[:, 0] * np.sin(p[:, 1])))
    return out[0] if single else out


def polyline_length(line: Polyline) -> float:
    """Total chord length of the polyline."""
    a, b = line.segments()
    return float(np.linalg.norm(b - a, axis=1).sum())


def sample_polyline(line: Polyline, delta: float) -> PointCloud:
    """Sample the polyline so consecutive samples are at most ``delta`` apart.

    All vertices are included exactly; points are returned in path order.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    a, b = line.segments()
    seg = b - a
    lens = np.linalg.norm(seg, axis=1)
    counts = np.maximum(1, np.ceil(lens / delta)).astype(np.int64)
    total = int(counts.sum())
    reps = np.repeat(np.arange(len(lens)), counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    frac = offsets / np.repeat(counts, counts)
    pts = a[reps] + seg[reps] * frac[:, None]
    if not line.closed:
        pts = np.vstack([pts, line.vertices[-1:]])
    return PointCloud(pts, float(delta))


@dataclass(frozen=True)
class GraphCurve:
    """Graph of a scalar function x -> f(x), with optional analytic helpers.

    ``min_feature(x)`` should underestimate the local oscillation scale of f;
    the adaptive sampler uses it to seed the initial grid so that chord
    refinement cannot step over a whole oscillation.
    """

    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray] | None = None
    min_feature: Callable[[float], float] | None = None


def sample_graph_curve(curve: GraphCurve, a: float, b: float, delta: float) -> PointCloud:
    """Arc-length-adaptive sample of the graph of ``curve.f`` on ``[a, b]``.

    ``a`` must be positive: the left endpoint is where oscillatory integrands
    of interest blow up, and clouds only approach it through the refinement
    schedule of the metric layer.
    """
    if a <= 0:
        raise ValueError("left endpoint must be positive")
    if b <= a:
        raise ValueError("need a < b")
    if delta <= 0:
        raise ValueError("delta must be positive")
    feat = (b - a) / 1024.0
    if curve.min_feature is not None:
        feat = min(feat, float(curve.min_feature(a)))
    n0 = int(np.ceil((b - a) / max(feat, 1e-12))) + 1
    xs = np.linspace(a, b, max(n0, 17))
    ys = np.asarray(curve.f(xs), dtype=float)
    for _ in range(64):
        chord = np.hypot(np.diff(xs), np.diff(ys))
        bad = chord > delta
        if not bad.any():
            break
        mids = 0.5 * (xs[:-1][bad] + xs[1:][bad])
        xs = np.sort(np.concatenate([xs, mids]))
        ys = np.asarray(curve.f(xs), dtype=float)
    else:
        raise RuntimeError("graph sampling did not reach the requested pitch")
    return PointCloud(np.column_stack((xs, ys)), float(delta))


# ---------------------------------------------------------------------------
# self-intersection testing


def self_intersects(line: Polyline, tol: float | None = None):
    """Check whether non-adjacent segments pass within ``tol`` of each other.

    Returns ``(flag, witness)`` where witness is a pair of segment indices.
    ``tol=0`` means exact contact. Small inputs use a vectorised all-pairs
    test; large 2-D inputs use a plane sweep, since tightly packed
    near-parallel segments defeat uniform spatial grids.
    """
    starts, ends = line.segments()
    if tol is None:
        lo = line.vertices.min(axis=0)
        hi = line.vertices.max(axis=0)
        tol = DEFAULT_INTERSECT_TOL * float(np.linalg.norm(hi - lo))
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    n = len(starts)
    if n < 3 and not line.closed:
        return False, None
    if line.dimension == 2 and n > _ALLPAIRS_MAX_SEGMENTS:
        return _intersects_sweep(starts, ends, line.closed, float(tol))
    return _intersects_allpairs(starts, ends, line.closed, float(tol))


def _adjacent(i: int, j: int, n: int, closed: bool) -> bool:
    if abs(i - j) == 1:
        return True
    return closed and {i, j} == {0, n - 1}


def _intersects_allpairs(P, Q, closed, tol):
    n = len(P)
    ii, jj = np.triu_indices(n, k=2)
    if closed and n > 2:
        keep = ~((ii == 0) & (jj == n - 1))
        ii, jj = ii[keep], jj[keep]
    two_d = P.shape[1] == 2
    for lo in range(0, len(ii), _PAIR_CHUNK):
        ic = ii[lo : lo + _PAIR_CHUNK]
        jc = jj[lo : lo + _PAIR_CHUNK]
        p1, q1, p2, q2 = P[ic], Q[ic], P[jc], Q[jc]
        hit = _segment_distance_batch(p1, q1, p2, q2) <= tol
        if two_d:
            hit |= _cross_mask_2d(p1, q1, p2, q2)
        if hit.any():
            k = int(np.argmax(hit))
            return True, (int(ic[k]), int(jc[k]))
    return False, None


def _segment_distance_batch(p1, q1, p2, q2):
    """Minimum distance between segment pairs (vectorised, any dimension)."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("...i,...i", d1, d1)
    e = np.einsum("...i,...i", d2, d2)
    b = np.einsum("...i,...i", d1, d2)
    c = np.einsum("...i,...i", d1, r)
    f = np.einsum("...i,...i", d2, r)
    denom = a * e - b * b
    s = np.where(denom > 0, np.clip((b * f - c * e) / np.where(denom == 0, 1, denom), 0, 1), 0.0)
    t = (b * s + f) / np.where(e == 0, 1, e)
    t = np.clip(t, 0, 1)
    s = np.clip((b * t - c) / np.where(a == 0, 1, a), 0, 1)
    gap = p1 + s[..., None] * d1 - (p2 + t[..., None] * d2)
    return np.sqrt(np.einsum("...i,...i", gap, gap))


def _cross2(ux, uy, vx, vy):
    return ux * vy - uy * vx


def _cross_mask_2d(p1, q1, p2, q2):
    d1x, d1y = (q1 - p1).T
    d2x, d2y = (q2 - p2).T
    o1 = _cross2(d1x, d1y, (p2 - p1)[:, 0], (p2 - p1)[:, 1])
    o2 = _cross2(d1x, d1y, (q2 - p1)[:, 0], (q2 - p1)[:, 1])
    o3 = _cross2(d2x, d2y, (p1 - p2)[:, 0], (p1 - p2)[:, 1])
    o4 = _cross2(d2x, d2y, (q1 - p2)[:, 0], (q1 - p2)[:, 1])
    proper = (np.sign(o1) * np.sign(o2) < 0) & (np.sign(o3) * np.sign(o4) < 0)

    def on_seg(p, q, r):
        return (
            (np.minimum(p[:, 0], q[:, 0]) <= r[:, 0])
            & (r[:, 0] <= np.maximum(p[:, 0], q[:, 0]))
            & (np.minimum(p[:, 1], q[:, 1]) <= r[:, 1])
            & (r[:, 1] <= np.maximum(p[:, 1], q[:, 1]))
        )

    touch = (
        ((o1 == 0) & on_seg(p1, q1, p2))
        | ((o2 == 0) & on_seg(p1, q1, q2))
        | ((o3 == 0) & on_seg(p2, q2, p1))
        | ((o4 == 0) & on_seg(p2, q2, q1))
    )
    return proper | touch


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_hit_scalar(ax, ay, bx, by, cx, cy, dx, dy, tol):
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        return True

    def on(px, py, qx, qy, rx, ry):
        return min(px, qx) <= rx <= max(px, qx) and min(py, qy) <= ry <= max(py, qy)

    if o1 == 0 and on(ax, ay, bx, by, cx, cy):
        return True
    if o2 == 0 and on(ax, ay, bx, by, dx, dy):
        return True
    if o3 == 0 and on(cx, cy, dx, dy, ax, ay):
        return True
    if o4 == 0 and on(cx, cy, dx, dy, bx, by):
        return True
    if tol > 0:
        p1 = np.array([[ax, ay]])
        q1 = np.array([[bx, by]])
        p2 = np.array([[cx, cy]])
        q2 = np.array([[dx, dy]])
        return float(_segment_distance_batch(p1, q1, p2, q2)[0]) <= tol
    return False


def _intersects_sweep(P, Q, closed, tol):
    """Shamos-Hoey style sweep: check status neighbours at every event.

    Crossings are always detected; near misses (tol > 0) are detected through
    the same adjacency events, which suffices when no third segment separates
    the pair at its closest approach.
    """
    n = len(P)
    swap = (P[:, 0] > Q[:, 0]) | ((P[:, 0] == Q[:, 0]) & (P[:, 1] > Q[:, 1]))
    L = np.where(swap[:, None], Q, P)
    R = np.where(swap[:, None], P, Q)
    ax, ay = L[:, 0].tolist(), L[:, 1].tolist()
    bx, by = R[:, 0].tolist(), R[:, 1].tolist()
    vert = (L[:, 0] == R[:, 0]).tolist()
    with np.errstate(divide="ignore", invalid="ignore"):
        sl = np.where(L[:, 0] == R[:, 0], 0.0, (R[:, 1] - L[:, 1]) / (R[:, 0] - L[:, 0])).tolist()

    ev_x = np.concatenate([L[:, 0], R[:, 0]])
    ev_y = np.concatenate([L[:, 1], R[:, 1]])
    ev_kind = np.concatenate([np.zeros(n, np.int8), np.ones(n, np.int8)])
    ev_seg = np.concatenate([np.arange(n), np.arange(n)])
    order = np.lexsort((ev_y, ev_kind, ev_x))
    ev_x = ev_x[order].tolist()
    ev_kind = ev_kind[order].tolist()
    ev_seg = ev_seg[order].tolist()

    sweep_x = 0.0

    def ykey(s):
        if vert[s]:
            return ay[s]
        return ay[s] + (sweep_x - ax[s]) * sl[s]

    def check(i, j):
        if i == j or _adjacent(i, j, n, closed):
            return False
        return _segments_hit_scalar(
            ax[i], ay[i], bx[i], by[i], ax[j], ay[j], bx[j], by[j], tol
        )

    active: list[int] = []
    for sx, kind, s in zip(ev_x, ev_kind, ev_seg):
        sweep_x = sx
        if kind == 0:
            k = ykey(s)
            pos = bisect.bisect_left(active, k, key=ykey)
            active.insert(pos, s)
            # immediate neighbours, extended through runs of equal keys
            for step in (-1, 1):
                for off in range(1, 66):
                    q = pos + step * off
                    if q < 0 or q >= len(active):
                        break
                    other = active[q]
                    if check(s, other):
                        return True, (min(s, other), max(s, other))
                    if off >= 1 and abs(ykey(other) - k) > tol:
                        break
            if vert[s]:
                lo = bisect.bisect_left(active, ay[s] - tol, key=ykey)
                hi = bisect.bisect_right(active, by[s] + tol, key=ykey)
                for other in active[lo:hi]:
                    if check(s, other):
                        return True, (min(s, other), max(s, other))
        else:
            pos = bisect.bisect_left(active, ykey(s), key=ykey)
            while pos < len(active) and active[pos] != s:
                pos += 1
            if pos >= len(active):
                pos = active.index(s)
            active.pop(pos)
            if 0 < pos < len(active):
                i, j = active[pos - 1], active[pos]
                if check(i, j):
                    return True, (min(i, j), max(i, j))
    return False, None
