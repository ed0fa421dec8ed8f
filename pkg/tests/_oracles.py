"""Independent reference computations used by the test suite.

Everything here recomputes expected values through a different route than
the library under test: direct quadrature, dense brute force, random
iteration, or high precision arithmetic.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad


def wave_arc_length(a: float, b: float) -> float:
    """Arc length of x -> sqrt(x) sin(1/x) over [a, b] by piecewise quadrature.

    Splits at the zero crossings 1/(k pi) so each piece is a single smooth
    hump, which keeps the quadrature honest at small a.
    """
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")

    def speed(x):
        g1 = math.sin(1.0 / x) / (2.0 * math.sqrt(x)) - math.cos(1.0 / x) / x ** 1.5
        return math.hypot(1.0, g1)

    k_hi = math.floor(1.0 / (math.pi * a))
    k_lo = math.ceil(1.0 / (math.pi * b))
    breaks = [a] + [1.0 / (math.pi * k) for k in range(k_hi, k_lo - 1, -1) if a < 1.0 / (math.pi * k) < b] + [b]
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        val, _ = quad(speed, lo, hi, limit=200)
        total += val
    return total


def chain_bruteforce(points: np.ndarray, i: int, j: int, epsilon: float) -> float:
    """Shortest chained distance via a dense distance matrix and Dijkstra.

    Quadratic in the cloud size; only for small reference cases.
    """
    from scipy.sparse.csgraph import dijkstra

    n = len(points)
    if n > 4000:
        raise ValueError("brute force reference limited to 4000 points")
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(-1))
    graph = np.where(dist < epsilon, dist, 0.0)
    out = dijkstra(graph, directed=False, indices=i)
    return float(out[j])


def chaos_game(maps: list[tuple[np.ndarray, np.ndarray]], n_points: int, seed: int,
               burn: int = 64, walkers: int = 4096) -> np.ndarray:
    """Random-iteration sample of the attractor of affine contractions.

    Runs many walkers in parallel, discards a burn-in, then collects one
    point per walker per step until ``n_points`` are gathered.
    """
    rng = np.random.default_rng(seed)
    dim = maps[0][1].size
    x = rng.uniform(-1, 1, size=(walkers, dim))
    out = []
    have = 0
    steps = burn + int(math.ceil(n_points / walkers))
    for step in range(steps):
        pick = rng.integers(0, len(maps), size=walkers)
        nxt = np.empty_like(x)
        for m, (A, b) in enumerate(maps):
            sel = pick == m
            nxt[sel] = x[sel] @ A.T + b
        x = nxt
        if step >= burn:
            out.append(x.copy())
            have += walkers
            if have >= n_points:
                break
    return np.vstack(out)[:n_points]


def spectral_norm(A: np.ndarray) -> float:
    """Largest singular value, straight from numpy's SVD."""
    return float(np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)[0])


def mp_needle_point(x1: float, x2: float, sharpness: float = 100.0, dps: int = 50):
    """High precision image of a point under squeeze-then-ripple (mpmath)."""
    import mpmath as mp

    with mp.workdps(dps):
        x1m, x2m = mp.mpf(x1), mp.mpf(x2)
        y2 = x1m / mp.mpf(sharpness) * x2m
        if x1m > 0:
            y2 = y2 + mp.sqrt(x1m) * mp.sin(1 / x1m)
        return float(x1m), float(y2)
