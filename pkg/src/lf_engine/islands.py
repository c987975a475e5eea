"""Integration islands of the GN double integral.

For a channel under test (CUT) ``c`` the GN integrand is non-zero only where
f1, f2 and f3 = f1 + f2 - f each sit inside a channel band.  Each ordered
channel triple ``(i, j, k)`` for which that set has positive area is an
island.  Membership is decided by interval arithmetic:
``(a_i + a_j - b_k, b_i + b_j - a_k)`` must overlap the CUT band with
positive length.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .link import WdmGrid


@dataclass(frozen=True)
class Island:
    i: int
    j: int
    k: int
    cut: int
    f1_interval: tuple[float, float]
    f2_interval: tuple[float, float]
    representative: tuple[float, float, float]

    @property
    def channels(self) -> tuple[int, int, int, int]:
        return (self.i, self.j, self.k, self.cut)

    @property
    def key(self) -> tuple[int, int, int, int]:
        return self.channels


def enumerate_islands(grid: WdmGrid, cut_index: int | None = None) -> list[Island]:
    """All non-null islands for the CUT, in lexicographic ``(i, j, k)`` order."""
    c = grid.cut_index if cut_index is None else int(cut_index)
    n = grid.n_channels
    if not 0 <= c < n:
        raise DomainError(f"cut index {c} out of range for {n} channels")
    lo, hi = grid.band_edges
    fc = grid.center_frequencies_hz
    out = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                # f1 + f2 must lie strictly inside (a_c + a_k, b_c + b_k)
                s_lo, s_hi = lo[c] + lo[k], hi[c] + hi[k]
                if max(lo[i] + lo[j], s_lo) >= min(hi[i] + hi[j], s_hi):
                    continue
                a1 = max(lo[i], s_lo - hi[j])
                b1 = min(hi[i], s_hi - lo[j])
                a2 = max(lo[j], s_lo - hi[i])
                b2 = min(hi[j], s_hi - lo[i])
                out.append(Island(i, j, k, c, (float(a1), float(b1)), (float(a2), float(b2)),
                                  (float(fc[i]), float(fc[j]), float(fc[k]))))
    return out


def islands_to_csv(islands, path) -> None:
    """Diagnostic dump; ``path`` may also be an open text stream."""
    if hasattr(path, "write"):
        _write_islands(islands, path)
    else:
        with open(path, "w", newline="") as fh:
            _write_islands(islands, fh)


def _write_islands(islands, fh) -> None:
    w = csv.writer(fh)
    w.writerow(["cut", "i", "j", "k", "f1_lo_hz", "f1_hi_hz", "f2_lo_hz", "f2_hi_hz"])
    for isl in islands:
        w.writerow([isl.cut, isl.i, isl.j, isl.k,
                    repr(isl.f1_interval[0]), repr(isl.f1_interval[1]),
                    repr(isl.f2_interval[0]), repr(isl.f2_interval[1])])


def island_polygon_pieces(grid: WdmGrid, island: Island, f: float):
    """Split the island's support at CUT frequency ``f`` into f1 sub-intervals.

    Returns ``(f1_breaks, lower, upper)`` where on every sub-interval the f2
    limits are ``max(a_j, a_k + f - f1)`` and ``min(b_j, b_k + f - f1)``
    (``lower``/``upper`` are callables of f1).  Breakpoints include every kink
    of those limits, the ridge line f1 = f and the abscissae f1 = a_k, b_k
    where the other ridge f2 = f meets the limits.
    """
    lo, hi = grid.band_edges
    ai, bi = lo[island.i], hi[island.i]
    aj, bj = lo[island.j], hi[island.j]
    ak, bk = lo[island.k], hi[island.k]
    cand = [ai, bi, ak + f - aj, bk + f - bj, ak + f - bj, bk + f - aj, f, ak, bk]
    breaks = np.unique(np.clip(np.array(cand, dtype=float), ai, bi))

    def lower(f1):
        return np.maximum(aj, ak + f - f1)

    def upper(f1):
        return np.minimum(bj, bk + f - f1)

    return breaks, lower, upper


def _sum_interval(grid: WdmGrid, island: Island):
    lo, hi = grid.band_edges
    i, j, k, c = island.channels
    return max(lo[i] + lo[j], lo[c] + lo[k]), min(hi[i] + hi[j], hi[c] + hi[k])


def _split_sum(s, lo_a, hi_a, lo_b, hi_b, frac):
    """Point (x, s - x) with x in [lo_a, hi_a], s - x in [lo_b, hi_b], at fraction ``frac``
    of the feasible x range."""
    x_lo = np.maximum(lo_a, s - hi_b)
    x_hi = np.minimum(hi_a, s - lo_b)
    x = x_lo + frac * (x_hi - x_lo)
    return x, s - x


def island_points(grid: WdmGrid, island: Island, rng=None, n: int | None = None):
    """Points ``(f1, f2, f3, f)`` inside the island support, with f in the CUT band
    and f3 = f1 + f2 - f.

    Without ``rng`` a single central point is returned (scalars); otherwise
    ``n`` uniformly drawn points (arrays).
    """
    lo, hi = grid.band_edges
    i, j, k, c = island.channels
    s_lo, s_hi = _sum_interval(grid, island)
    if rng is None:
        s, a, b = 0.5 * (s_lo + s_hi), 0.5, 0.5
    else:
        s = rng.uniform(s_lo, s_hi, n)
        a = rng.uniform(0.0, 1.0, n)
        b = rng.uniform(0.0, 1.0, n)
    f1, f2 = _split_sum(s, lo[i], hi[i], lo[j], hi[j], a)
    f, f3 = _split_sum(s, lo[c], hi[c], lo[k], hi[k], b)
    if rng is None:
        return float(f1), float(f2), float(f3), float(f)
    return f1, f2, f3, f
