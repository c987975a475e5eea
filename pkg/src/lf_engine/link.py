"""Multi-span link description and the per-span scalars the link function needs.

Channel-indexed quantities (loss, normalized power, amplifier gain and phase)
are stored once per channel: a frequency anywhere inside a channel band
resolves to that channel.  Span and channel indices are zero-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ContractError, DomainError, FrequencyLookupError, LinkFunctionError, add_context
from .raman import PowerProfileSet, RamanGainProfile, SpectralComponent, solve_power_evolution


def _as_channel_array(value, n, name):
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ContractError(f"{name}: expected a scalar or {n} per-channel values, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WdmGrid:
    """Rectangular-spectrum WDM comb."""

    center_frequencies_hz: np.ndarray
    symbol_rates_baud: np.ndarray
    launch_powers_w: np.ndarray
    cut_index: int = 0

    def __post_init__(self):
        f = np.array(self.center_frequencies_hz, dtype=float).ravel()
        n = f.size
        if n == 0:
            raise DomainError("WDM grid needs at least one channel")
        f.setflags(write=False)
        object.__setattr__(self, "center_frequencies_hz", f)
        object.__setattr__(self, "symbol_rates_baud", _as_channel_array(self.symbol_rates_baud, n, "symbol rates"))
        object.__setattr__(self, "launch_powers_w", _as_channel_array(self.launch_powers_w, n, "launch powers"))
        if np.any(np.diff(f) <= 0):
            raise DomainError("channel center frequencies must be strictly increasing")
        if np.any(self.symbol_rates_baud <= 0):
            raise DomainError("symbol rates must be positive")
        if np.any(self.launch_powers_w < 0):
            raise DomainError("launch powers must be non-negative")
        lo, hi = self.band_edges
        if np.any(lo[1:] < hi[:-1]):
            raise DomainError("channel bands overlap")
        if not 0 <= self.cut_index < n:
            raise DomainError(f"cut_index {self.cut_index} out of range")

    @property
    def n_channels(self) -> int:
        return self.center_frequencies_hz.size

    @property
    def band_edges(self) -> tuple[np.ndarray, np.ndarray]:
        half = 0.5 * self.symbol_rates_baud
        return self.center_frequencies_hz - half, self.center_frequencies_hz + half

    @property
    def psd_w_per_hz(self) -> np.ndarray:
        return self.launch_powers_w / self.symbol_rates_baud

    def scaled(self, factor: float) -> "WdmGrid":
        return replace(self, launch_powers_w=self.launch_powers_w * factor)

    def channel_of(self, f, strict: bool = True):
        """Index of the channel whose band contains ``f``; ``-1`` when none
        and ``strict`` is false."""
        lo, hi = self.band_edges
        slack = 1e-9 * self.symbol_rates_baud
        fa = np.asarray(f, dtype=float)
        idx = np.searchsorted(lo - slack, fa, side="right") - 1
        safe = np.clip(idx, 0, self.n_channels - 1)
        ok = (idx >= 0) & (fa <= hi[safe] + slack[safe])
        if strict and not np.all(ok):
            bad = fa[~ok] if fa.ndim else fa
            raise FrequencyLookupError(f"frequency {np.ravel(bad)[0]!r} Hz lies outside every channel band")
        out = np.where(ok, idx, -1)
        return int(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FiberSpan:
    """One fiber span.

    ``alpha_per_m`` is the field loss (scalar or one value per channel);
    ``beta2_s2_per_m`` and ``beta3_s3_per_m`` are the dispersion Taylor terms
    around ``center_frequency_hz``.  ``beta0``/``beta1`` only shift a global
    phase and are kept for completeness.
    """

    length_m: float
    gamma_per_w_per_m: float
    alpha_per_m: np.ndarray | float
    beta2_s2_per_m: float
    beta3_s3_per_m: float
    center_frequency_hz: float
    beta0_per_m: float = 0.0
    beta1_s_per_m: float = 0.0
    raman_gain: RamanGainProfile | None = None
    pumps: tuple[SpectralComponent, ...] = ()

    def __post_init__(self):
        if not (self.length_m > 0 and math.isfinite(self.length_m)):
            raise DomainError(f"span length must be positive, got {self.length_m!r}")
        if not self.gamma_per_w_per_m >= 0:
            raise DomainError("nonlinearity coefficient must be non-negative")
        if not self.center_frequency_hz > 0:
            raise DomainError("dispersion expansion frequency must be positive")
        a = np.array(self.alpha_per_m, dtype=float)
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise DomainError("fiber loss must be finite and non-negative")
        object.__setattr__(self, "pumps", tuple(self.pumps))
        for p in self.pumps:
            if p.kind != "pump":
                raise DomainError("span pumps must have kind='pump'")

    @property
    def raman_free(self) -> bool:
        return (self.raman_gain is None or self.raman_gain.is_zero) and not self.pumps

    def beta2_eff(self, f1, f2):
        """beta2 + pi*beta3*(f1 + f2 - 2 f_c), the phase-mismatch slope."""
        return self.beta2_s2_per_m + math.pi * self.beta3_s3_per_m * (f1 + f2 - 2.0 * self.center_frequency_hz)


@dataclass(frozen=True)
class Amplifier:
    """Lumped amplifier at the end of a span: per-channel power gain and phase,
    plus optional lumped dispersion ``beta_dcu_s2``.  ``gain="transparent"``
    asks :func:`propagate_link` for the gain that restores the span input."""

    gain: np.ndarray | float | str = 1.0
    phase_rad: np.ndarray | float = 0.0
    beta_dcu_s2: float = 0.0

    def __post_init__(self):
        if isinstance(self.gain, str):
            if self.gain != "transparent":
                raise DomainError(f"unknown amplifier gain {self.gain!r}")
            g = np.ones(1)
        else:
            g = np.array(self.gain, dtype=float)
        if np.any(g <= 0) or not np.all(np.isfinite(g)):
            raise DomainError("amplifier gain must be positive and finite")
        if not math.isfinite(self.beta_dcu_s2):
            raise DomainError("lumped dispersion must be finite")
        if not np.all(np.isfinite(np.array(self.phase_rad, dtype=float))):
            raise DomainError("amplifier phase must be finite")


@dataclass(frozen=True)
class Link:
    """Ordered spans with their amplifiers, the WDM grid and one power
    profile set per span."""

    spans: tuple[FiberSpan, ...]
    amplifiers: tuple[Amplifier, ...]
    grid: WdmGrid
    profiles: tuple[PowerProfileSet, ...] = field(default=())

    def __post_init__(self):
        n = self.grid.n_channels
        if len(self.spans) == 0 or len(self.spans) != len(self.amplifiers):
            raise ContractError("need one amplifier per span and at least one span")
        if any(isinstance(a, str) or isinstance(a.gain, str) for a in self.amplifiers):
            raise ContractError("transparent amplifiers are resolved by propagate_link")
        spans = tuple(replace(s, alpha_per_m=_as_channel_array(s.alpha_per_m, n, "alpha")) for s in self.spans)
        amps = tuple(replace(a, gain=_as_channel_array(a.gain, n, "amplifier gain"),
                             phase_rad=_as_channel_array(a.phase_rad, n, "amplifier phase"))
                     for a in self.amplifiers)
        object.__setattr__(self, "spans", spans)
        object.__setattr__(self, "amplifiers", amps)
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if self.profiles:
            if len(self.profiles) != len(spans):
                raise ContractError("need one profile set per span")
            for s, p in zip(spans, self.profiles):
                if p.rho.shape[1] != n:
                    raise ContractError("profile set channel count does not match the grid")
                if not math.isclose(p.length_m, s.length_m, rel_tol=1e-12):
                    raise ContractError("profile grid does not cover the span")

    @property
    def n_spans(self) -> int:
        return len(self.spans)

    @property
    def raman_free(self) -> bool:
        return all(s.raman_free for s in self.spans)

    def with_grid(self, grid: WdmGrid) -> "Link":
        """Same link and profiles, different launch spectrum (profiles are not recomputed)."""
        return replace(self, grid=grid)

    def require_profiles(self):
        if not self.profiles:
            raise ContractError("link has no power profiles; call propagate_link first")
        return self.profiles

    def rho_end(self, span_index: int) -> np.ndarray:
        return self.require_profiles()[span_index].rho_end


def propagate_link(spans: Sequence[FiberSpan], amplifiers: Sequence[Amplifier | str], grid: WdmGrid,
                   dz: float = 10.0, tol: float = 1e-8, max_iter: int = 50) -> Link:
    """Solve the power evolution span by span and return a filled :class:`Link`.

    The launch into span ``n + 1`` is the output of span ``n`` times the
    amplifier gain.  An amplifier given as the string ``"transparent"`` gets
    the per-channel gain ``1 / rho(L)`` of its span, as does an
    :class:`Amplifier` whose gain is ``"transparent"``.  ``tol`` and ``max_iter``
    control the backward-pump shooting.
    """
    n = grid.n_channels
    power = grid.launch_powers_w.copy()
    profiles, amps = [], []
    if len(spans) != len(amplifiers):
        raise ContractError("need one amplifier per span")
    for s_idx, (span, amp) in enumerate(zip(spans, amplifiers)):
        alpha = _as_channel_array(span.alpha_per_m, n, "alpha")
        launch = [SpectralComponent(float(f), float(p), float(a))
                  for f, p, a in zip(grid.center_frequencies_hz, power, alpha)]
        try:
            prof = solve_power_evolution(span, launch, dz, tol, max_iter)
        except LinkFunctionError as exc:
            raise add_context(exc, f"span {s_idx}")
        profiles.append(prof)
        if isinstance(amp, str):
            if amp != "transparent":
                raise ContractError(f"unknown amplifier spec {amp!r}")
            amp = Amplifier(gain=1.0 / prof.rho_end)
        elif isinstance(amp.gain, str):
            amp = replace(amp, gain=1.0 / prof.rho_end)
        amps.append(amp)
        power = prof.power_w[-1] * _as_channel_array(amp.gain, n, "amplifier gain")
    return Link(tuple(spans), tuple(amps), grid, tuple(profiles))


def rho_at(link: Link, span_index: int, z, f):
    """Normalized power of the channel containing ``f`` at distance ``z``,
    linearly interpolated between grid samples."""
    prof = link.require_profiles()[span_index]
    ch = link.grid.channel_of(f)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(z > prof.length_m * (1 + 1e-12)):
        raise ContractError("z outside the span")
    if np.ndim(ch) == 0:
        out = np.interp(z, prof.z_m, prof.rho[:, ch])
    else:
        out = np.array([np.interp(zz, prof.z_m, prof.rho[:, c]) for zz, c in np.broadcast(z, ch)])
        out = out.reshape(np.broadcast(z, ch).shape)
    return float(out) if np.ndim(out) == 0 else out


def _sorted_pair(a, b):
    return np.minimum(a, b), np.maximum(a, b)


def end_of_span_factors_idx(link: Link, span_index: int, c1, c2, c3, c4):
    """Both gain/loss product chains of span ``span_index`` for channel indices."""
    c1, c2 = _sorted_pair(np.asarray(c1), np.asarray(c2))
    out = 1.0
    for p in range(span_index, link.n_spans):
        g = link.amplifiers[p].gain * link.rho_end(p)
        out = out * np.sqrt(g[c4])
    for p in range(span_index):
        g = link.amplifiers[p].gain * link.rho_end(p)
        out = out * np.sqrt(g[c1] * g[c2] * g[c3])
    return out


def end_of_span_factors(link: Link, span_index: int, f1, f2, f3):
    """Real positive amplitude factor of span ``span_index`` in the link function:
    the product of sqrt(G*rho(L)) at f1+f2-f3 over spans ``span_index..N-1``
    times the product of sqrt(G*rho(L)) at f1, f2, f3 over earlier spans."""
    ch = link.grid.channel_of
    out = end_of_span_factors_idx(link, span_index, ch(f1), ch(f2), ch(f3), ch(np.add(f1, f2) - f3))
    return float(out) if np.ndim(out) == 0 else out
