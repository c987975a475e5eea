"""GN-model NLI power spectral density from the link function.

For a CUT frequency ``f`` and rectangular channel spectra

    G_NLI(f) = 16/27 * sum_islands G_i G_j G_k  int int |LK(f1, f2, f1 + f2 - f)|^2 df1 df2

where the double integral runs over the exact island support: f1 in band i,
f2 in band j and f1 + f2 - f in band k.  That support is a convex polygon;
it is cut into pieces along every kink of its f2 limits and along the
ridges f1 = f and f2 = f (where |LK|^2 peaks), and every piece is integrated
with a tensor Gauss-Legendre rule whose order is doubled until the island
value settles.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .errors import ContractError, DomainError, QuadratureToleranceError
from .islands import Island, enumerate_islands, island_polygon_pieces
from .lf import FitConfig, PsiFit, fit_islands, link_function_island, link_function_no_raman
from .link import Link

GN_PREFACTOR = 16.0 / 27.0
KERNELS = ("poly", "closed_form")


@dataclass(frozen=True)
class QuadConfig:
    order: int = 16
    tol: float = 1e-3
    max_order: int = 256
    band_points: int = 1

    def __post_init__(self):
        if self.order < 1 or self.max_order < self.order:
            raise ContractError("need 1 <= order <= max_order")
        if not self.tol > 0:
            raise ContractError("quadrature tolerance must be positive")
        if self.band_points < 1:
            raise ContractError("band_points must be >= 1")


@dataclass(frozen=True)
class IslandContribution:
    key: tuple[int, int, int, int]
    f_hz: float
    psd_w_per_hz: float
    points: int
    error_estimate: float
    order: int


@dataclass
class ChannelNli:
    cut: int
    center_frequency_hz: float
    symbol_rate_baud: float
    psd_w_per_hz: float
    power_w: float
    contributions: list[IslandContribution]
    sample_frequencies_hz: np.ndarray
    sample_psd_w_per_hz: np.ndarray

    @property
    def n_islands(self) -> int:
        return len(self.contributions)

    @property
    def points(self) -> int:
        return sum(c.points for c in self.contributions)

    @property
    def error_estimate(self) -> float:
        return math.fsum(c.error_estimate for c in self.contributions)


@dataclass
class NliReport:
    channels: list[ChannelNli]
    kernel: str
    quad: QuadConfig
    extra: dict = field(default_factory=dict)

    @property
    def power_w(self) -> np.ndarray:
        return np.array([c.power_w for c in self.channels])

    @property
    def psd_w_per_hz(self) -> np.ndarray:
        return np.array([c.psd_w_per_hz for c in self.channels])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cut", "center_frequency_hz", "symbol_rate_baud", "nli_psd_w_per_hz",
                        "nli_power_w", "n_islands", "quad_points", "quad_error_estimate_w_per_hz"])
            for c in self.channels:
                w.writerow([c.cut, repr(c.center_frequency_hz), repr(c.symbol_rate_baud),
                            repr(c.psd_w_per_hz), repr(c.power_w), c.n_islands, c.points,
                            repr(c.error_estimate)])

    def islands_to_csv(self, path) -> None:
        """Per-island breakdown at the channel-centre sample."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cut", "i", "j", "k", "f_hz", "psd_w_per_hz", "points", "order", "error_estimate"])
            for ch in self.channels:
                for c in ch.contributions:
                    w.writerow([c.key[3], c.key[0], c.key[1], c.key[2], repr(c.f_hz),
                                repr(c.psd_w_per_hz), c.points, c.order, repr(c.error_estimate)])

    def summary(self) -> str:
        lines = [f"GN NLI report ({self.kernel} link function, rectangular channel spectra)",
                 f"quadrature: Gauss-Legendre start order {self.quad.order}, max {self.quad.max_order}, "
                 f"tol {self.quad.tol:g}, band points {self.quad.band_points}",
                 f"{'cut':>4} {'f_c [THz]':>12} {'P_NLI [W]':>13} {'P_NLI [dBm]':>12} "
                 f"{'G_NLI [W/Hz]':>13} {'islands':>8} {'points':>9}"]
        for c in self.channels:
            dbm = 10 * math.log10(c.power_w / 1e-3) if c.power_w > 0 else -math.inf
            lines.append(f"{c.cut:>4} {c.center_frequency_hz / 1e12:>12.6f} {c.power_w:>13.6e} {dbm:>12.4f} "
                         f"{c.psd_w_per_hz:>13.6e} {c.n_islands:>8} {c.points:>9}")
        for k, v in self.extra.items():
            lines.append(f"{k}: {v}")
        return "\n".join(lines) + "\n"


def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _island_nodes(grid, island: Island, f: float, order: int):
    """Nodes and weights of the tensor rule on every polygon piece of the island."""
    x, wx = _gauss(order)
    breaks, lower, upper = island_polygon_pieces(grid, island, f)
    f1s, f2s, ws = [], [], []
    for x0, x1 in zip(breaks[:-1], breaks[1:]):
        xm = 0.5 * (x0 + x1)
        if not x1 > x0 or not upper(xm) > lower(xm):
            continue
        f1 = xm + 0.5 * (x1 - x0) * x
        w1 = 0.5 * (x1 - x0) * wx
        lo = lower(f1)
        up = np.maximum(upper(f1), lo)
        mid = np.clip(f, lo, up)
        for a, b in ((lo, mid), (mid, up)):
            width = b - a
            if not np.any(width > 0):
                continue
            f2 = 0.5 * (a + b)[:, None] + 0.5 * width[:, None] * x[None, :]
            f1s.append(np.broadcast_to(f1[:, None], f2.shape).ravel())
            f2s.append(f2.ravel())
            ws.append((w1[:, None] * 0.5 * width[:, None] * wx[None, :]).ravel())
    if not ws:
        return np.empty(0), np.empty(0), np.empty(0)
    return np.concatenate(f1s), np.concatenate(f2s), np.concatenate(ws)


def _lk_squared(link: Link, key, f1, f2, f3, fits, kernel):
    if kernel == "poly":
        lk = link_function_island(link, key, f1, f2, f3, fits[key])
    else:
        lk = link_function_no_raman(link, f1, f2, f3, channels=key)
    return lk.real ** 2 + lk.imag ** 2


def island_integral(link: Link, island: Island, f: float, fits=None, quad: QuadConfig = QuadConfig(),
                    kernel: str = "poly", abs_tol: float = 0.0, pilot: float | None = None):
    """``int int |LK|^2 df1 df2`` over the island support at CUT frequency ``f``.

    The order is doubled until two successive values differ by at most
    ``max(quad.tol * |value|, abs_tol)``.  ``pilot`` is an already computed
    value at ``quad.order``; refinement then starts from the next order.
    Returns ``(value, error_estimate, points, order)``.
    """
    key = island.channels
    order = quad.order if pilot is None else 2 * quad.order
    prev = pilot
    points = 0
    while True:
        f1, f2, w = _island_nodes(link.grid, island, f, order)
        if w.size == 0:
            return 0.0, 0.0, 0, order
        f3 = f1 + f2 - f
        val = float(np.dot(w, _lk_squared(link, key, f1, f2, f3, fits, kernel)))
        points += w.size
        if prev is not None:
            err = abs(val - prev)
            if err <= max(quad.tol * abs(val), abs_tol):
                return val, err, points, order
        if 2 * order > quad.max_order:
            err = math.inf if prev is None else abs(val - prev)
            raise QuadratureToleranceError(
                f"island {key} at f={f!r} Hz: Gauss-Legendre refinement did not reach rel tol "
                f"{quad.tol:g} by order {order} (estimate {val:.6e}, last change {err:.3e})",
                estimate=val, error=err, order=order)
        prev = val
        order *= 2


def _check_inputs(link: Link, f: float, islands: Sequence[Island], fits, kernel: str):
    if kernel not in KERNELS:
        raise ContractError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    cuts = {isl.cut for isl in islands}
    if len(cuts) > 1:
        raise ContractError(f"islands belong to several CUTs: {sorted(cuts)}")
    if cuts:
        c = cuts.pop()
        lo, hi = link.grid.band_edges
        slack = 1e-9 * link.grid.symbol_rates_baud[c]
        if not lo[c] - slack <= f <= hi[c] + slack:
            raise DomainError(f"f={f!r} Hz is outside the band of CUT {c}")
    if kernel == "poly":
        if fits is None:
            raise ContractError("poly kernel needs fits for every island")
        missing = [isl.channels for isl in islands if isl.channels not in fits]
        if missing:
            raise ContractError(f"no fits for islands {missing[:5]}")


def gn_psd_breakdown(link: Link, f: float, islands: Sequence[Island], fits=None,
                     quad: QuadConfig = QuadConfig(), kernel: str = "poly",
                     workers: int = 1) -> tuple[float, list[IslandContribution]]:
    """G_NLI(f) and its per-island contributions (islands in the given order).

    A pilot pass at the starting order gives a rough total ``T``.  Each island
    is then refined until its change is within ``tol * max(|island|, T / n)``,
    which bounds the error of the sum by about ``tol * T`` without forcing
    negligible, strongly oscillating islands to full relative accuracy.

    The total is the correctly rounded sum of the contributions, so it does
    not depend on the order in which parallel workers finish.
    """
    _check_inputs(link, f, islands, fits, kernel)
    psd = link.grid.psd_w_per_hz
    gains = [GN_PREFACTOR * psd[isl.i] * psd[isl.j] * psd[isl.k] for isl in islands]

    def pmap(fn, items):
        if workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(workers) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]

    def pilot(isl):
        f1, f2, w = _island_nodes(link.grid, isl, f, quad.order)
        if w.size == 0:
            return 0.0, 0
        return float(np.dot(w, _lk_squared(link, isl.channels, f1, f2, f1 + f2 - f, fits, kernel))), w.size

    pilots = pmap(pilot, list(islands))
    floor = quad.tol * math.fsum(g * v for g, (v, _) in zip(gains, pilots)) / max(len(islands), 1)

    def work(n):
        isl, g = islands[n], gains[n]
        abs_tol = floor / g if g > 0 else math.inf
        val, err, pts, order = island_integral(link, isl, f, fits, quad, kernel, abs_tol, pilots[n][0])
        return IslandContribution(isl.channels, float(f), g * val, pts + pilots[n][1], g * err, order)

    contribs = pmap(work, list(range(len(islands))))
    return math.fsum(c.psd_w_per_hz for c in contribs), contribs


def gn_nli_psd(link: Link, f: float, islands: Sequence[Island], fits=None,
               quad: QuadConfig = QuadConfig(), kernel: str = "poly", workers: int = 1) -> float:
    """GN NLI PSD (W/Hz) at CUT frequency ``f``."""
    return gn_psd_breakdown(link, f, islands, fits, quad, kernel, workers)[0]


def evaluate_channel(link: Link, cut_index: int, islands: Sequence[Island] | None = None,
                     fits: Mapping[tuple, Sequence[PsiFit]] | None = None,
                     quad: QuadConfig = QuadConfig(), kernel: str = "poly",
                     fit_cfg: FitConfig = FitConfig(), workers: int = 1) -> ChannelNli:
    """NLI of one CUT.  Islands and fits are computed when not supplied.

    With ``quad.band_points == 1`` the power is the centre PSD times the
    symbol rate; otherwise a trapezoid over that many equispaced samples
    spanning the band.
    """
    grid = link.grid
    if not 0 <= cut_index < grid.n_channels:
        raise DomainError(f"cut index {cut_index} out of range")
    if islands is None:
        islands = enumerate_islands(grid, cut_index)
    if kernel == "poly" and fits is None:
        fits = fit_islands(link, islands, fit_cfg, workers)
    fc = float(grid.center_frequencies_hz[cut_index])
    rs = float(grid.symbol_rates_baud[cut_index])
    psd_c, contribs = gn_psd_breakdown(link, fc, islands, fits, quad, kernel, workers)
    if quad.band_points == 1:
        fs = np.array([fc])
        vals = np.array([psd_c])
        power = psd_c * rs
    else:
        lo, hi = grid.band_edges
        fs = np.linspace(lo[cut_index], hi[cut_index], quad.band_points)
        vals = np.array([psd_c if f == fc else gn_nli_psd(link, float(f), islands, fits, quad, kernel, workers)
                         for f in fs])
        power = float(trapezoid(vals, fs))
    return ChannelNli(cut_index, fc, rs, psd_c, power, contribs, fs, vals)


def gn_nli_power(link: Link, cut_index: int, islands: Sequence[Island] | None = None, fits=None,
                 quad: QuadConfig = QuadConfig(), kernel: str = "poly", fit_cfg: FitConfig = FitConfig(),
                 workers: int = 1) -> float:
    """NLI power (W) falling in the CUT band."""
    return evaluate_channel(link, cut_index, islands, fits, quad, kernel, fit_cfg, workers).power_w


def gn_report(link: Link, cuts: Sequence[int] | None = None, fits=None, quad: QuadConfig = QuadConfig(),
              kernel: str = "poly", fit_cfg: FitConfig = FitConfig(), workers: int = 1) -> NliReport:
    """NLI for several CUTs (all channels by default)."""
    cuts = range(link.grid.n_channels) if cuts is None else cuts
    chans = []
    for c in cuts:
        isl = enumerate_islands(link.grid, c)
        chans.append(evaluate_channel(link, c, isl, fits, quad, kernel, fit_cfg, workers))
    return NliReport(chans, kernel, quad)
