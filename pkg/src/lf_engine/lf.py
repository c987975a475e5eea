"""Link function of a multi-span link with arbitrary power evolution.

Per span and per island the loss-compensated profile kernel ``Psi(z)`` is
fitted by a weighted least-squares polynomial in the normalized coordinate
``u = z / L``.  The span integral ``I = int_0^L Psi(z) exp(theta z) dz`` then
reduces to closed-form monomial integrals (see :mod:`lf_engine.kernels`), and
the link function sums the span contributions with their amplitude chains
and accumulated phases.

The pure-phase prefactor common to all spans (it depends on f1 + f2 - f3
only) is never computed: it drops out of every ``|LK|**2`` consumer.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial import Legendre, Polynomial
from numpy.polynomial.legendre import legvander
from scipy.special import expm1

from .errors import ContractError, FitDegeneracyError, LinkFunctionError, OracleResolutionError, add_context
from .islands import Island
from .kernels import DEFAULT_EPS, DEFAULT_TERMS, normalized_monomial_integrals
from .link import Link, end_of_span_factors_idx, rho_at

FOUR_PI2 = 4.0 * math.pi ** 2


@dataclass(frozen=True)
class FitConfig:
    n_psi: int = 10
    m_w: float = 2.0
    eps_theta: float = DEFAULT_EPS
    series_terms: int = DEFAULT_TERMS
    max_condition: float = 1e12

    def __post_init__(self):
        if self.n_psi < 0:
            raise ContractError("n_psi must be >= 0")
        if self.m_w < 0:
            raise ContractError("m_w must be >= 0")
        if not self.eps_theta > 0:
            raise ContractError("eps_theta must be > 0")
        if self.series_terms < 1:
            raise ContractError("series_terms must be >= 1")


@dataclass(frozen=True)
class PsiFit:
    """Polynomial fit of Psi for one span and one island.

    ``h`` holds the coefficients in ``u = z / L``; ``tau`` the derived
    ``tau_m = (-1)^m sum_{k>=m} h_k k!/(k-m)!``.
    """

    span_index: int
    channels: tuple[int, int, int, int]
    length_m: float
    h: np.ndarray
    tau: np.ndarray
    residual: float
    condition: float
    eps_theta: float = DEFAULT_EPS
    series_terms: int = DEFAULT_TERMS

    @property
    def degree(self) -> int:
        return self.h.size - 1

    def __call__(self, u):
        return Polynomial(self.h)(u)


def tau_coefficients(h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    n = h.size
    tau = np.zeros(n)
    for m in range(n):
        falling = np.array([math.perm(k, m) for k in range(m, n)], dtype=float)
        tau[m] = (-1) ** m * np.dot(h[m:], falling)
    return tau


# -- profile kernels ---------------------------------------------------------

def _channels(link: Link, f1, f2, f3):
    ch = link.grid.channel_of
    return ch(f1), ch(f2), ch(f3), ch(np.add(f1, f2) - f3)


def _loss_sum(alpha, c1, c2, c3, c4):
    return alpha[c1] + alpha[c2] + alpha[c3] - alpha[c4]


def _theta(span, chans, f1, f2, f3):
    f1, f2, f3 = (np.asarray(x, dtype=float) for x in (f1, f2, f3))
    return (-_loss_sum(span.alpha_per_m, *chans)
            + 1j * FOUR_PI2 * ((f1 - f3) * (f2 - f3)) * span.beta2_eff(f1, f2))


def theta_exponent(link: Link, span_index: int, f1, f2, f3):
    """Complex, z-independent exponent of the span integrand (1/m).

    Real part: loss imbalance -a(f1) - a(f2) - a(f3) + a(f1+f2-f3).
    Imaginary part: 4 pi^2 (f1-f3)(f2-f3)[beta2 + pi beta3 (f1+f2-2 f_c)].
    """
    out = _theta(link.spans[span_index], _channels(link, f1, f2, f3), f1, f2, f3)
    return complex(out) if np.ndim(out) == 0 else out


def vartheta(link: Link, span_index: int, z, f1, f2, f3):
    """sqrt(rho(z,f1) rho(z,f2) rho(z,f3) / rho(z,f1+f2-f3))."""
    r = [rho_at(link, span_index, z, f) for f in (f1, f2, f3, f1 + f2 - f3)]
    return np.sqrt(r[0] * r[1] * r[2] / r[3])


def psi(link: Link, span_index: int, z, f1, f2, f3):
    """vartheta times exp(z [a(f1) + a(f2) + a(f3) - a(f1+f2-f3)])."""
    span = link.spans[span_index]
    c1, c2, c3, c4 = _channels(link, f1, f2, f3)
    return vartheta(link, span_index, z, f1, f2, f3) * np.exp(
        np.asarray(z) * _loss_sum(span.alpha_per_m, c1, c2, c3, c4))


def _grid_kernels(link: Link, span_index: int, chans):
    c1, c2, c3, c4 = chans
    prof = link.require_profiles()[span_index]
    rho = prof.rho
    vt = np.sqrt(rho[:, c1] * rho[:, c2] * rho[:, c3] / rho[:, c4])
    asum = _loss_sum(link.spans[span_index].alpha_per_m, c1, c2, c3, c4)
    return prof.z_m, vt, vt * np.exp(prof.z_m * asum)


# -- weighted least squares ---------------------------------------------------

def trapezoid_weights(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def weighted_polyfit(u, values, weight, degree: int, max_condition: float = 1e12, refine: int = 2):
    """Minimize int W(u) [values - sum_k h_k u^k]^2 du on [0, 1].

    The integral is the trapezoid rule on the samples, so the normal matrix
    is ``A^T A`` with ``A`` the sqrt-weighted design matrix.  ``A`` is built
    in the shifted Legendre basis (same minimizer as monomials, well
    conditioned) and solved through its SVD, which never squares the
    condition number; ``refine`` steps of iterative refinement then remove
    most of the rounding left in the coefficients.  ``condition`` is that of
    the normal matrix, ``(s_max / s_min)**2``.  Returns
    ``(h, weighted_rms_residual, condition)`` with ``h`` in the monomial
    basis of ``u``.
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(values, dtype=float)
    ww = trapezoid_weights(u) * np.asarray(weight, dtype=float)
    sw = np.sqrt(ww)
    P = legvander(2.0 * u - 1.0, degree)
    U, sv, Vt = np.linalg.svd(sw[:, None] * P, full_matrices=False)
    cond = (sv[0] / sv[-1]) ** 2 if sv[-1] > 0 else math.inf
    if not cond <= max_condition:
        raise FitDegeneracyError(
            f"normal equations of degree {degree} are numerically singular (condition {cond:.3g}); "
            "lower the polynomial degree or refine the z grid")
    c = np.zeros(degree + 1)
    resid = y
    for _ in range(refine + 1):
        c = c + Vt.T @ ((U.T @ (sw * resid)) / sv)
        resid = y - P @ c
    rms = math.sqrt(float(np.sum(ww * resid ** 2) / np.sum(ww)))
    h = Legendre(c, domain=[0.0, 1.0]).convert(kind=Polynomial).coef
    h = np.pad(h, (0, degree + 1 - h.size))
    return h, rms, float(cond)


def fit_psi(link: Link, span_index: int, island: Island, cfg: FitConfig = FitConfig(),
            frequencies: tuple[float, float, float] | None = None) -> PsiFit:
    """Fit Psi of ``span_index`` over ``island``.

    ``frequencies`` may pick any in-band (f1, f2, f3) of the island's channels;
    the result is the same because all profile data are per channel.
    """
    chans = island.channels
    if frequencies is not None:
        got = tuple(link.grid.channel_of(f) for f in frequencies)
        if got != chans[:3]:
            raise ContractError(f"frequencies resolve to channels {got}, island has {chans[:3]}")
    span = link.spans[span_index]
    z, vt, ps = _grid_kernels(link, span_index, chans)
    weight = vt ** cfg.m_w / ps ** 2
    h, rms, cond = weighted_polyfit(z / span.length_m, ps, weight, cfg.n_psi, cfg.max_condition)
    h.setflags(write=False)
    tau = tau_coefficients(h)
    tau.setflags(write=False)
    return PsiFit(span_index, chans, span.length_m, h, tau, rms, cond, cfg.eps_theta, cfg.series_terms)


def fit_island(link: Link, island: Island, cfg: FitConfig = FitConfig()) -> tuple[PsiFit, ...]:
    out = []
    for n in range(link.n_spans):
        try:
            out.append(fit_psi(link, n, island, cfg))
        except LinkFunctionError as exc:
            raise add_context(exc, f"span {n}, island {island.channels}")
    return tuple(out)


def fit_islands(link: Link, islands: Sequence[Island], cfg: FitConfig = FitConfig(),
                workers: int = 1) -> dict[tuple, tuple[PsiFit, ...]]:
    """Fits for every island, keyed by ``(i, j, k, cut)``.

    Psi is symmetric in f1 <-> f2, so ``(j, i, k, c)`` reuses ``(i, j, k, c)``.
    """
    canon = {}
    for isl in islands:
        i, j, k, c = isl.channels
        canon.setdefault((min(i, j), max(i, j), k, c), isl)

    def work(item):
        key, isl = item
        base = replace(isl, i=key[0], j=key[1])
        return key, fit_island(link, base, cfg)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            done = dict(pool.map(work, canon.items()))
    else:
        done = dict(map(work, canon.items()))
    out = {}
    for isl in islands:
        i, j, k, c = isl.channels
        fits = done[(min(i, j), max(i, j), k, c)]
        out[isl.channels] = tuple(replace(f, channels=isl.channels) for f in fits)
    return out


# -- span integrals -----------------------------------------------------------

def span_integral_poly(fit: PsiFit, theta, L: float | None = None):
    """I = L * sum_k h_k J_k(theta L) with J_k the normalized monomial integral."""
    L = fit.length_m if L is None else L
    J = normalized_monomial_integrals(np.asarray(theta) * L, fit.degree, fit.eps_theta, fit.series_terms)
    out = L * (J @ fit.h)
    return complex(out) if np.ndim(out) == 0 else out


def span_integral_tau(fit: PsiFit, theta, L: float | None = None):
    """I = L * sum_m [exp(t) tau_m - (-1)^m m! h_m] / t^(m+1), t = theta L.

    Exact for any non-zero ``t`` but loses accuracy when |t| is not large
    compared with the degree; kept as a cross-check of the kernel path.
    """
    L = fit.length_m if L is None else L
    t = np.asarray(theta, dtype=complex) * L
    et = np.exp(t)
    out = np.zeros_like(t)
    tp = t.copy()
    for m in range(fit.degree + 1):
        out = out + (et * fit.tau[m] - (-1) ** m * math.factorial(m) * fit.h[m]) / tp
        tp = tp * t
    out = L * out
    return complex(out) if np.ndim(out) == 0 else out


def span_integral_oracle(link: Link, span_index: int, f1: float, f2: float, f3: float,
                         rtol: float = 1e-8, max_phase_step: float = 0.05,
                         max_points: int = 2 ** 24, chunk: int = 1 << 20) -> complex:
    """Direct trapezoid quadrature of int_0^L vartheta(z) exp(z delta) dz.

    vartheta is interpolated log-linearly between profile samples.  Starts
    from the profile grid, halves the step until the phase advance per step
    is below ``max_phase_step``, then keeps halving until two successive
    estimates agree to ``rtol``.
    """
    prof = link.require_profiles()[span_index]
    L = prof.length_m
    c1, c2, c3, c4 = _channels(link, f1, f2, f3)
    omega = float(np.imag(theta_exponent(link, span_index, f1, f2, f3)))
    zp, rho = prof.z_m, prof.rho
    # log-linear between profile samples: exact for exponential decay
    log_vt = 0.5 * (np.log(rho[:, c1]) + np.log(rho[:, c2]) + np.log(rho[:, c3]) - np.log(rho[:, c4]))

    def f(z):
        return np.exp(np.interp(z, zp, log_vt) + 1j * omega * z)

    n = zp.size - 1
    while abs(omega) * L / n >= max_phase_step:
        n *= 2
    if n + 1 > max_points:
        raise OracleResolutionError(f"oracle needs more than {max_points} points")
    z = np.linspace(0.0, L, n + 1)
    vals = f(z)
    T = (L / n) * (np.sum(vals) - 0.5 * (vals[0] + vals[-1]))
    while True:
        if 2 * n + 1 > max_points:
            raise OracleResolutionError(
                f"trapezoid oracle did not reach rtol={rtol:g} within {max_points} points")
        h = L / n
        s = 0.0j
        for start in range(0, n, chunk):
            mids = (np.arange(start, min(n, start + chunk)) + 0.5) * h
            s += np.sum(f(mids))
        T_new = 0.5 * T + 0.5 * h * s
        n *= 2
        if abs(T_new - T) <= rtol * abs(T_new):
            return complex(T_new)
        T = T_new


# -- link function ------------------------------------------------------------

def link_function_island(link: Link, chans, f1, f2, f3, fits: Sequence[PsiFit]):
    """LK on one island with explicit channel indices ``(c1, c2, c3, c4)``."""
    c1, c2, c3, c4 = chans
    if len(fits) != link.n_spans:
        raise ContractError(f"need one fit per span, got {len(fits)} for {link.n_spans} spans")
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    f3 = np.asarray(f3, dtype=float)
    mix = (f1 - f3) * (f2 - f3)
    total = np.zeros(np.broadcast(f1, f2, f3).shape, dtype=complex)
    amp_phase = 0.0
    disp = np.zeros_like(mix)
    for n, span in enumerate(link.spans):
        fit = fits[n]
        if fit.channels != tuple(chans) or fit.span_index != n:
            raise ContractError(f"fit for span {fit.span_index}, island {fit.channels} "
                                f"used for span {n}, island {tuple(chans)}")
        theta = _theta(span, chans, f1, f2, f3)
        I = span_integral_poly(fit, theta, span.length_m)
        amp = end_of_span_factors_idx(link, n, c1, c2, c3, c4)
        total = total + span.gamma_per_w_per_m * amp * np.exp(1j * (amp_phase + FOUR_PI2 * mix * disp)) * I
        th = link.amplifiers[n].phase_rad
        amp_phase += th[c1] + th[c2] - th[c3] - th[c4]
        disp = disp + link.amplifiers[n].beta_dcu_s2 + span.length_m * span.beta2_eff(f1, f2)
    return total


def link_function(link: Link, f1, f2, f3, fits: Mapping[tuple, Sequence[PsiFit]]):
    """LK(f1, f2, f3) from per-island polynomial fits.

    ``fits`` maps ``(i, j, k, cut)`` channel tuples to one :class:`PsiFit`
    per span, as returned by :func:`fit_islands`.
    """
    f1, f2, f3 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (f1, f2, f3)))
    c = np.stack([np.atleast_1d(x) for x in _channels(link, f1, f2, f3)], axis=-1).reshape(-1, 4)
    flat = [np.ravel(x) for x in (f1, f2, f3)]
    out = np.empty(c.shape[0], dtype=complex)
    keys, inverse = np.unique(c, axis=0, return_inverse=True)
    for g, key in enumerate(keys):
        key = tuple(int(x) for x in key)
        try:
            island_fits = fits[key]
        except KeyError:
            raise ContractError(f"no fits for island {key}") from None
        sel = np.ravel(inverse) == g
        out[sel] = link_function_island(link, key, flat[0][sel], flat[1][sel], flat[2][sel], island_fits)
    return complex(out[0]) if f1.ndim == 0 else out.reshape(f1.shape)


def link_function_no_raman(link: Link, f1, f2, f3, channels=None):
    """Closed-form LK for links whose spans have no Raman gain and no pumps.

    Every span integral is (1 - exp(-x L)) / x with x the loss imbalance
    minus the phase-mismatch rate, and every rho(L) is exp(-2 a L).
    ``channels`` optionally fixes the (c1, c2, c3, c4) indices instead of
    resolving them from the frequencies.
    """
    if not link.raman_free:
        raise ContractError("closed-form link function requires Raman-free spans")
    f1, f2, f3 = (np.asarray(x, dtype=float) for x in (f1, f2, f3))
    c1, c2, c3, c4 = _channels(link, f1, f2, f3) if channels is None else channels
    mix = (f1 - f3) * (f2 - f3)
    n_sp = link.n_spans
    after = []
    for p in range(n_sp):
        s, g = link.spans[p], link.amplifiers[p].gain
        after.append(np.sqrt(g[c4] * np.exp(-2.0 * s.alpha_per_m[c4] * s.length_m)))
    total = 0.0j
    before = 1.0
    phase = 0.0
    disp = 0.0
    for n in range(n_sp):
        s, amp = link.spans[n], link.amplifiers[n]
        a = s.alpha_per_m
        x = (a[c1] + a[c2] + a[c3] - a[c4]) - 1j * FOUR_PI2 * mix * s.beta2_eff(f1, f2)
        xl = x * s.length_m
        with np.errstate(invalid="ignore", divide="ignore"):
            I = np.where(xl == 0, s.length_m, -s.length_m * expm1(-xl) / np.where(xl == 0, 1.0, xl))
        chain = before * np.prod([after[p] for p in range(n, n_sp)], axis=0)
        total = total + s.gamma_per_w_per_m * chain * np.exp(1j * (phase + FOUR_PI2 * mix * disp)) * I
        g = amp.gain
        before = before * np.sqrt(g[c1] * g[c2] * g[c3]
                                  * np.exp(-2.0 * (a[c1] + a[c2] + a[c3]) * s.length_m))
        phase = phase + amp.phase_rad[c1] + amp.phase_rad[c2] - amp.phase_rad[c3] - amp.phase_rad[c4]
        disp = disp + amp.beta_dcu_s2 + s.length_m * s.beta2_eff(f1, f2)
    return complex(total) if np.ndim(total) == 0 else total


def fits_to_csv(link: Link, fits: Mapping[tuple, Sequence[PsiFit]], path,
                oracle_dev: Mapping[tuple, Sequence[float]] | None = None,
                points: Mapping[tuple, tuple[float, float, float]] | None = None) -> None:
    """One row per (island, span): h_k, tau_m, residual and theta at the island
    centre (``points[key]``; the channel centres when not given)."""
    degree = max(f.degree for fs in fits.values() for f in fs)
    header = (["cut", "i", "j", "k", "span", "degree", "residual", "condition",
               "theta_re_per_m", "theta_im_per_m"]
              + [f"h_{k}" for k in range(degree + 1)] + [f"tau_{m}" for m in range(degree + 1)])
    if oracle_dev is not None:
        header.append("oracle_rel_dev")
    fc = link.grid.center_frequencies_hz
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for key, fs in fits.items():
            i, j, k, c = key
            for fit in fs:
                p = (fc[i], fc[j], fc[k]) if points is None else points[key]
                th = complex(_theta(link.spans[fit.span_index], key, *p))
                h = list(fit.h) + [0.0] * (degree - fit.degree)
                tau = list(fit.tau) + [0.0] * (degree - fit.degree)
                row = [c, i, j, k, fit.span_index, fit.degree, repr(fit.residual), repr(fit.condition),
                       repr(th.real), repr(th.imag)] + [repr(float(x)) for x in h + tau]
                if oracle_dev is not None:
                    dev = oracle_dev.get(key)
                    row.append("" if dev is None else repr(float(dev[fit.span_index])))
                w.writerow(row)
