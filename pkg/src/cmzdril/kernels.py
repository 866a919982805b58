"""Hot numeric kernels.

Each kernel has two implementations with identical results:

* ``*_loop``: explicit scalar loops, compiled with numba when enabled.
* ``*_numpy``: vectorized numpy, used when numba is disabled.

The public names (``lidar_scan``, ``frechet_dp``, ``gae_advantages``) are bound
to whichever path ``cmzdril._accel`` selected at import time.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, select

__all__ = [
    "USE_NUMBA",
    "lidar_scan",
    "frechet_dp",
    "gae_advantages",
    "segment_circle_hit",
]


# --------------------------------------------------------------------------
# lidar


def lidar_loop(x, y, heading, centers, radii, n_beams, max_range):
    out = np.empty(n_beams)
    for k in range(n_beams):
        ang = heading + 2.0 * math.pi * k / n_beams
        dx = math.cos(ang)
        dy = math.sin(ang)
        best = max_range
        for m in range(centers.shape[0]):
            fx = x - centers[m, 0]
            fy = y - centers[m, 1]
            c = fx * fx + fy * fy - radii[m] * radii[m]
            if c <= 0.0:
                best = 0.0
                break
            b = fx * dx + fy * dy
            disc = b * b - c
            if disc < 0.0 or b >= 0.0:
                # miss, or circle behind the origin (origin is outside, so both roots share a sign)
                continue
            t = -b - math.sqrt(disc)
            if t < best:
                best = t
        out[k] = best
    return out


def lidar_numpy(x, y, heading, centers, radii, n_beams, max_range):
    ang = heading + 2.0 * np.pi * np.arange(n_beams) / n_beams
    out = np.full(n_beams, float(max_range))
    if centers.shape[0] == 0:
        return out
    d = np.stack([np.cos(ang), np.sin(ang)], axis=1)  # (B, 2)
    f = np.array([x, y]) - centers  # (M, 2)
    c = np.einsum("ij,ij->i", f, f) - radii * radii  # (M,)
    if np.any(c <= 0.0):
        return np.zeros(n_beams)
    b = d @ f.T  # (B, M)
    disc = b * b - c[None, :]
    hit = (disc >= 0.0) & (b < 0.0)
    t = np.where(hit, -b - np.sqrt(np.where(hit, disc, 0.0)), np.inf)
    return np.minimum(out, t.min(axis=1))


# --------------------------------------------------------------------------
# segment vs circles (collision sweep)


def segment_circle_hit(x0, y0, x1, y1, centers, radii, pad):
    """True if the segment (x0,y0)-(x1,y1) comes within ``radius + pad`` of any circle."""
    if centers.shape[0] == 0:
        return False
    p0 = np.array([x0, y0])
    seg = np.array([x1 - x0, y1 - y0])
    L2 = float(seg @ seg)
    rel = centers - p0
    if L2 > 0.0:
        t = np.clip(rel @ seg / L2, 0.0, 1.0)
    else:
        t = np.zeros(centers.shape[0])
    closest = p0 + t[:, None] * seg
    dist = np.hypot(centers[:, 0] - closest[:, 0], centers[:, 1] - closest[:, 1])
    return bool(np.any(dist < radii + pad))


# --------------------------------------------------------------------------
# discrete Frechet


def frechet_loop(a, b):
    n = a.shape[0]
    m = b.shape[0]
    ca = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(a.shape[1]):
                diff = a[i, k] - b[j, k]
                s += diff * diff
            d = math.sqrt(s)
            if i == 0 and j == 0:
                ca[i, j] = d
            elif i == 0:
                ca[i, j] = max(ca[i, j - 1], d)
            elif j == 0:
                ca[i, j] = max(ca[i - 1, j], d)
            else:
                prev = min(ca[i - 1, j], ca[i, j - 1], ca[i - 1, j - 1])
                ca[i, j] = max(prev, d)
    return ca[n - 1, m - 1]


def frechet_numpy(a, b):
    n = a.shape[0]
    m = b.shape[0]
    diff = a[:, None, :] - b[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    # padded table: row/col 0 are +inf borders except the corner seed
    ca = np.full((n + 1, m + 1), np.inf)
    ca[0, 0] = 0.0
    for k in range(n + m - 1):
        i = np.arange(max(0, k - m + 1), min(n - 1, k) + 1)
        j = k - i
        prev = np.minimum(np.minimum(ca[i, j + 1], ca[i + 1, j]), ca[i, j])
        ca[i + 1, j + 1] = np.maximum(prev, dist[i, j])
    return ca[n, m]


# --------------------------------------------------------------------------
# GAE


def gae_loop(rewards, values, dones, bootstrap_value, gamma, lam):
    T = rewards.shape[0]
    adv = np.empty(T)
    last = 0.0
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        next_value = bootstrap_value if t == T - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv


def gae_numpy(rewards, values, dones, bootstrap_value, gamma, lam):
    nonterminal = 1.0 - dones
    next_values = np.append(values[1:], bootstrap_value)
    deltas = rewards + gamma * next_values * nonterminal - values
    coef = gamma * lam * nonterminal
    adv = np.empty_like(deltas)
    last = 0.0
    # the recursion is sequential; only the deltas vectorize
    for t in range(deltas.shape[0] - 1, -1, -1):
        last = deltas[t] + coef[t] * last
        adv[t] = last
    return adv


_lidar = select(lidar_loop, lidar_numpy)
_frechet = select(frechet_loop, frechet_numpy)
_gae = select(gae_loop, gae_numpy)


def lidar_scan(x, y, heading, centers, radii, n_beams, max_range):
    """Distances along ``n_beams`` evenly spaced rays, beam 0 along ``heading``.

    Each reading is the exact ray/circle intersection distance, capped at
    ``max_range``. A ray origin inside a circle reads 0.
    """
    centers = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 2)
    radii = np.ascontiguousarray(radii, dtype=np.float64).reshape(-1)
    return _lidar(float(x), float(y), float(heading), centers, radii, int(n_beams), float(max_range))


def frechet_dp(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return float(_frechet(a, b))


def gae_advantages(rewards, values, dones, bootstrap_value, gamma, lam):
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    dones = np.ascontiguousarray(dones, dtype=np.float64)
    return _gae(rewards, values, dones, float(bootstrap_value), float(gamma), float(lam))
