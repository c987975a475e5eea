"""Run configuration: a YAML (or JSON) file with SI units spelled out in the keys.

Example::

    grid:
      center_frequencies_hz: [193.0e12, 193.05e12, 193.1e12]   # or start/spacing/n_channels
      symbol_rates_baud: 32.0e9          # scalar or one per channel
      launch_powers_w: 1.0e-3            # scalar or one per channel
    spans:
      - length_m: 80.0e3
        count: 3                         # repeat this span (and its amplifier)
        gamma_per_w_per_m: 1.3e-3
        alpha_per_m: 2.303e-5            # field loss, scalar or one per channel
        beta2_s2_per_m: -21.7e-27
        beta3_s3_per_m: 1.4e-40
        center_frequency_hz: 193.1e12
        raman_gain: silica               # none | silica | {silica_peak_per_w_per_m} | {offsets_hz, gain_per_w_per_m}
        pumps:
          - {frequency_hz: 206.3e12, direction: forward, power_w: 0.4, alpha_per_m: 2.8e-5}
          - {frequency_hz: 206.0e12, direction: backward, boundary_power_w: 0.3, alpha_per_m: 2.8e-5}
        amplifier: {gain: transparent, phase_rad: 0.0, beta_dcu_s2: 0.0}
    solver: {dz_m: 10.0, shooting_tol: 1.0e-8, shooting_max_iter: 50}
    fit: {n_psi: 10, m_w: 2.0, eps_theta: 1.0e-3}
    quadrature: {order: 16, tol: 1.0e-3, max_order: 256, band_points: 1}
    cut: all                             # index, list of indices or "all"
    mode: {oracle: false, no_raman: false}
    threads: 4
    output_dir: out

:func:`validate_config` collects every problem as a human-readable string;
:func:`build_run_config` turns a clean mapping into a :class:`RunConfig`.
"""
from __future__ import annotations

import copy
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError, LinkFunctionError
from .gn import QuadConfig
from .lf import FitConfig
from .link import Amplifier, FiberSpan, WdmGrid
from .raman import BACKWARD, FORWARD, RamanGainProfile, SpectralComponent, silica_raman_gain

TOP_KEYS = {"grid", "spans", "solver", "fit", "quadrature", "cut", "mode", "threads", "output_dir"}
GRID_KEYS = {"center_frequencies_hz", "start_frequency_hz", "spacing_hz", "n_channels",
             "symbol_rates_baud", "launch_powers_w"}
SPAN_KEYS = {"length_m", "count", "gamma_per_w_per_m", "alpha_per_m", "beta2_s2_per_m", "beta3_s3_per_m",
             "center_frequency_hz", "beta0_per_m", "beta1_s_per_m", "raman_gain", "pumps", "amplifier"}
SPAN_REQUIRED = ("length_m", "gamma_per_w_per_m", "alpha_per_m", "beta2_s2_per_m")
RAMAN_KEYS = {"silica_peak_per_w_per_m", "offsets_hz", "gain_per_w_per_m"}
PUMP_KEYS = {"frequency_hz", "direction", "power_w", "boundary_power_w", "alpha_per_m"}
AMP_KEYS = {"gain", "phase_rad", "beta_dcu_s2"}
SOLVER_KEYS = {"dz_m", "shooting_tol", "shooting_max_iter"}
FIT_KEYS = {"n_psi", "m_w", "eps_theta", "series_terms", "max_condition"}
QUAD_KEYS = {"order", "tol", "max_order", "band_points"}
MODE_KEYS = {"oracle", "no_raman"}


@dataclass
class RunConfig:
    grid: WdmGrid
    spans: list[FiberSpan]
    amplifiers: list[Amplifier]
    dz_m: float = 10.0
    shooting_tol: float = 1e-8
    shooting_max_iter: int = 50
    fit: FitConfig = field(default_factory=FitConfig)
    quad: QuadConfig = field(default_factory=QuadConfig)
    cuts: list[int] = field(default_factory=list)
    oracle: bool = False
    no_raman: bool = False
    threads: int = 1
    output_dir: str | None = None
    source: dict = field(default_factory=dict)

    def knobs(self) -> dict:
        """Every numeric setting that affects results."""
        return {
            "dz_m": self.dz_m, "shooting_tol": self.shooting_tol, "shooting_max_iter": self.shooting_max_iter,
            "n_psi": self.fit.n_psi, "m_w": self.fit.m_w, "eps_theta": self.fit.eps_theta,
            "series_terms": self.fit.series_terms, "max_condition": self.fit.max_condition,
            "quad_order": self.quad.order, "quad_tol": self.quad.tol, "quad_max_order": self.quad.max_order,
            "band_points": self.quad.band_points, "cuts": list(self.cuts), "oracle": self.oracle,
            "no_raman": self.no_raman, "threads": self.threads,
        }


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-3``-style literals (no decimal point) as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*\.?[0-9_]*|\.[0-9_]+)[eE][-+]?[0-9]+$"),
    list("-+0123456789."))


def load_config_file(path) -> dict:
    """Read a YAML or JSON config into a plain mapping."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return raw


# -- validation ----------------------------------------------------------------

def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _unknown(d: dict, allowed: set, where: str, out: list) -> None:
    for k in sorted(set(d) - allowed, key=str):
        out.append(f"{where}: unknown key {k!r}")


def _scalar_or_list(v, n, where, out, positive=False, nonneg=False):
    vals = v if isinstance(v, list) else [v]
    if isinstance(v, list) and n is not None and len(v) != n:
        out.append(f"{where}: expected a scalar or {n} values, got {len(v)}")
        return
    for x in vals:
        if not _num(x):
            out.append(f"{where}: {x!r} is not a finite number")
        elif positive and not x > 0:
            out.append(f"{where}: must be positive, got {x!r}")
        elif nonneg and x < 0:
            out.append(f"{where}: must be non-negative, got {x!r}")


def _grid_centers(g: dict):
    if "center_frequencies_hz" in g:
        return g["center_frequencies_hz"]
    try:
        return [g["start_frequency_hz"] + k * g["spacing_hz"] for k in range(int(g["n_channels"]))]
    except (KeyError, TypeError, ValueError):
        return None


def _check_grid(g, out) -> int | None:
    if not isinstance(g, dict):
        out.append("grid: missing or not a mapping")
        return None
    _unknown(g, GRID_KEYS, "grid", out)
    explicit = "center_frequencies_hz" in g
    ranged = {"start_frequency_hz", "spacing_hz", "n_channels"} & set(g)
    if explicit and ranged:
        out.append("grid: give either center_frequencies_hz or start_frequency_hz/spacing_hz/n_channels, not both")
    fc = _grid_centers(g)
    if fc is None or not isinstance(fc, list) or not fc:
        out.append("grid: channel centers missing (center_frequencies_hz or start_frequency_hz + spacing_hz "
                   "+ n_channels)")
        return None
    bad = [x for x in fc if not _num(x) or not x > 0]
    if bad:
        out.append(f"grid.center_frequencies_hz: invalid values {bad[:3]}")
        return None
    n = len(fc)
    for k in range(n - 1):
        if not fc[k + 1] > fc[k]:
            out.append(f"grid: channel centers must be strictly increasing (channel {k} at {fc[k]!r} Hz, "
                       f"channel {k + 1} at {fc[k + 1]!r} Hz)")
    for key in ("symbol_rates_baud", "launch_powers_w"):
        if key not in g:
            out.append(f"grid: missing {key}")
    _scalar_or_list(g.get("symbol_rates_baud", 1.0), n, "grid.symbol_rates_baud", out, positive=True)
    _scalar_or_list(g.get("launch_powers_w", 0.0), n, "grid.launch_powers_w", out, nonneg=True)
    rs = g.get("symbol_rates_baud")
    if rs is not None and (not isinstance(rs, list) or len(rs) == n):
        try:
            r = np.broadcast_to(np.array(rs, dtype=float), (n,))
            f = np.array(fc, dtype=float)
            for k in range(n - 1):
                upper, lower = float(f[k] + 0.5 * r[k]), float(f[k + 1] - 0.5 * r[k + 1])
                if f[k + 1] > f[k] and upper > lower:
                    out.append(f"grid: bands of channels {k} and {k + 1} overlap "
                               f"(upper edge {upper!r} Hz > lower edge {lower!r} Hz)")
        except (TypeError, ValueError):
            pass
    return n


def _check_raman(r, where, out) -> None:
    if r is None or r in ("none", "silica"):
        return
    if isinstance(r, str):
        out.append(f"{where}: unknown Raman gain model {r!r} (use none, silica or a table)")
        return
    if not isinstance(r, dict):
        out.append(f"{where}: must be none, silica or a mapping")
        return
    _unknown(r, RAMAN_KEYS, where, out)
    if "silica_peak_per_w_per_m" in r:
        if {"offsets_hz", "gain_per_w_per_m"} & set(r):
            out.append(f"{where}: give either silica_peak_per_w_per_m or a table, not both")
        if not (_num(r["silica_peak_per_w_per_m"]) and r["silica_peak_per_w_per_m"] >= 0):
            out.append(f"{where}.silica_peak_per_w_per_m: must be a non-negative number")
        return
    off, gain = r.get("offsets_hz"), r.get("gain_per_w_per_m")
    if not isinstance(off, list) or not isinstance(gain, list):
        out.append(f"{where}: table needs lists offsets_hz and gain_per_w_per_m")
        return
    if len(off) != len(gain):
        out.append(f"{where}: offsets_hz and gain_per_w_per_m differ in length")
    elif not all(_num(x) for x in off + gain):
        out.append(f"{where}: table entries must be finite numbers")
    else:
        try:
            RamanGainProfile(np.array(off, dtype=float), np.array(gain, dtype=float))
        except LinkFunctionError as exc:
            out.append(f"{where}: {exc}")


def _check_pump(p, where, span_alpha, out) -> None:
    if not isinstance(p, dict):
        out.append(f"{where}: must be a mapping")
        return
    _unknown(p, PUMP_KEYS, where, out)
    if not (_num(p.get("frequency_hz")) and p["frequency_hz"] > 0):
        out.append(f"{where}.frequency_hz: missing or not a positive number")
    direction = p.get("direction", "forward")
    if direction not in ("forward", "backward"):
        out.append(f"{where}.direction: must be 'forward' or 'backward', got {direction!r}")
    if direction == "backward":
        if "boundary_power_w" not in p:
            out.append(f"{where}: backward pump needs boundary_power_w (its power at z = L); the shooting "
                       "method solves for the unknown z = 0 power from this boundary condition")
        if "power_w" in p:
            out.append(f"{where}: backward pump takes boundary_power_w (at z = L), not power_w")
        pw = p.get("boundary_power_w", 0.0)
    else:
        if "power_w" not in p:
            out.append(f"{where}: forward pump needs power_w (its launch power at z = 0)")
        if "boundary_power_w" in p:
            out.append(f"{where}: boundary_power_w only applies to backward pumps")
        pw = p.get("power_w", 0.0)
    if not (_num(pw) and pw >= 0):
        out.append(f"{where}: pump power must be a non-negative number, got {pw!r}")
    a = p.get("alpha_per_m", span_alpha if _num(span_alpha) else None)
    if a is None:
        out.append(f"{where}.alpha_per_m: required when the span loss is given per channel")
    elif not (_num(a) and a >= 0):
        out.append(f"{where}.alpha_per_m: must be a non-negative number")


def _check_amp(a, where, n, out) -> None:
    if a is None:
        return
    if not isinstance(a, dict):
        out.append(f"{where}: must be a mapping")
        return
    _unknown(a, AMP_KEYS, where, out)
    g = a.get("gain", "transparent")
    if g != "transparent":
        _scalar_or_list(g, n, f"{where}.gain", out, positive=True)
    _scalar_or_list(a.get("phase_rad", 0.0), n, f"{where}.phase_rad", out)
    if not _num(a.get("beta_dcu_s2", 0.0)):
        out.append(f"{where}.beta_dcu_s2: must be a finite number")


def _check_span(s, where, n, out) -> None:
    if not isinstance(s, dict):
        out.append(f"{where}: must be a mapping")
        return
    _unknown(s, SPAN_KEYS, where, out)
    for k in SPAN_REQUIRED:
        if k not in s:
            out.append(f"{where}: missing {k}")
    L = s.get("length_m")
    if L is not None and not (_num(L) and L > 0):
        out.append(f"{where}.length_m: span length must be positive, got {L!r}")
    c = s.get("count", 1)
    if not (isinstance(c, int) and not isinstance(c, bool) and c >= 1):
        out.append(f"{where}.count: must be a positive integer, got {c!r}")
    g = s.get("gamma_per_w_per_m")
    if g is not None and not (_num(g) and g >= 0):
        out.append(f"{where}.gamma_per_w_per_m: must be a non-negative number")
    if "alpha_per_m" in s:
        _scalar_or_list(s["alpha_per_m"], n, f"{where}.alpha_per_m", out, nonneg=True)
    for k in ("beta2_s2_per_m", "beta3_s3_per_m", "beta0_per_m", "beta1_s_per_m"):
        if k in s and not _num(s[k]):
            out.append(f"{where}.{k}: must be a finite number")
    if "center_frequency_hz" in s and not (_num(s["center_frequency_hz"]) and s["center_frequency_hz"] > 0):
        out.append(f"{where}.center_frequency_hz: must be a positive number")
    _check_raman(s.get("raman_gain"), f"{where}.raman_gain", out)
    pumps = s.get("pumps", [])
    if not isinstance(pumps, list):
        out.append(f"{where}.pumps: must be a list")
    else:
        for q, p in enumerate(pumps):
            _check_pump(p, f"{where}.pumps[{q}]", s.get("alpha_per_m"), out)
    _check_amp(s.get("amplifier"), f"{where}.amplifier", n, out)


def _check_section(d, allowed, where, checks, out) -> None:
    if d is None:
        return
    if not isinstance(d, dict):
        out.append(f"{where}: must be a mapping")
        return
    _unknown(d, allowed, where, out)
    for key, ok, msg in checks:
        if key in d and not ok(d[key]):
            out.append(f"{where}.{key}: {msg}, got {d[key]!r}")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def validate_config(cfg) -> list[str]:
    """Every problem found in ``cfg`` (a mapping or a path); empty when valid."""
    out: list[str] = []
    if isinstance(cfg, (str, os.PathLike)):
        try:
            cfg = load_config_file(cfg)
        except ConfigError as exc:
            return list(exc.diagnostics)
    if not isinstance(cfg, dict):
        return ["config must be a mapping"]
    _unknown(cfg, TOP_KEYS, "config", out)
    n = _check_grid(cfg.get("grid"), out)
    spans = cfg.get("spans")
    if not isinstance(spans, list) or not spans:
        out.append("spans: need a non-empty list of spans")
    else:
        for q, s in enumerate(spans):
            _check_span(s, f"spans[{q}]", n, out)
    _check_section(cfg.get("solver"), SOLVER_KEYS, "solver", [
        ("dz_m", lambda v: _num(v) and v > 0, "must be a positive number"),
        ("shooting_tol", lambda v: _num(v) and v > 0, "must be a positive number"),
        ("shooting_max_iter", lambda v: _is_int(v) and v >= 1, "must be a positive integer")], out)
    _check_section(cfg.get("fit"), FIT_KEYS, "fit", [
        ("n_psi", lambda v: _is_int(v) and v >= 0, "must be a non-negative integer"),
        ("m_w", lambda v: _num(v) and v >= 0, "must be a non-negative number"),
        ("eps_theta", lambda v: _num(v) and v > 0, "must be a positive number"),
        ("series_terms", lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
        ("max_condition", lambda v: _num(v) and v > 1, "must be a number > 1")], out)
    _check_section(cfg.get("quadrature"), QUAD_KEYS, "quadrature", [
        ("order", lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
        ("max_order", lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
        ("tol", lambda v: _num(v) and v > 0, "must be a positive number"),
        ("band_points", lambda v: _is_int(v) and v >= 1, "must be a positive integer")], out)
    q = cfg.get("quadrature") or {}
    if isinstance(q, dict) and _is_int(q.get("order", 16)) and _is_int(q.get("max_order", 256)) \
            and q.get("max_order", 256) < q.get("order", 16):
        out.append("quadrature: max_order must be >= order")
    _check_section(cfg.get("mode"), MODE_KEYS, "mode", [
        ("oracle", lambda v: isinstance(v, bool), "must be true or false"),
        ("no_raman", lambda v: isinstance(v, bool), "must be true or false")], out)
    t = cfg.get("threads", 1)
    if not (_is_int(t) and t >= 1):
        out.append(f"threads: must be a positive integer, got {t!r}")
    cut = cfg.get("cut", "all")
    if cut != "all":
        cuts = cut if isinstance(cut, list) else [cut]
        for c in cuts:
            if not _is_int(c):
                out.append(f"cut: {c!r} is not a channel index")
            elif n is not None and not 0 <= c < n:
                out.append(f"cut: channel {c} does not exist (grid has {n} channels, indices 0..{n - 1})")
        if isinstance(cut, list) and not cut:
            out.append("cut: empty list")
    od = cfg.get("output_dir")
    if od is not None and not isinstance(od, str):
        out.append("output_dir: must be a string")
    return out


# -- construction -----------------------------------------------------------------

def _raman(r):
    if r is None or r == "none":
        return None
    if r == "silica":
        return silica_raman_gain()
    if "silica_peak_per_w_per_m" in r:
        return silica_raman_gain(float(r["silica_peak_per_w_per_m"]))
    return RamanGainProfile(np.array(r["offsets_hz"], dtype=float), np.array(r["gain_per_w_per_m"], dtype=float))


def _pump(p, span_alpha):
    backward = p.get("direction", "forward") == "backward"
    return SpectralComponent(
        float(p["frequency_hz"]),
        float(p["boundary_power_w"] if backward else p["power_w"]),
        float(p.get("alpha_per_m", span_alpha)),
        direction=BACKWARD if backward else FORWARD, kind="pump")


def build_run_config(cfg, overrides: dict | None = None) -> RunConfig:
    """Validate and convert.  ``overrides`` uses the flat knob names of the CLI
    (``dz_m``, ``n_psi``, ``m_w``, ``threads``, ``oracle``, ``no_raman``,
    ``output_dir``) and wins over the file."""
    if isinstance(cfg, (str, os.PathLike)):
        cfg = load_config_file(cfg)
    cfg = copy.deepcopy(cfg)
    diags = validate_config(cfg)
    if diags:
        raise ConfigError(diags)
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}
    g = cfg["grid"]
    fc = np.array(_grid_centers(g), dtype=float)
    solver, fit, quad, mode = (cfg.get(k) or {} for k in ("solver", "fit", "quadrature", "mode"))
    try:
        grid = WdmGrid(fc, np.array(g["symbol_rates_baud"], dtype=float),
                       np.array(g["launch_powers_w"], dtype=float))
        spans, amps = [], []
        for s in cfg["spans"]:
            alpha = np.array(s["alpha_per_m"], dtype=float)
            span = FiberSpan(
                float(s["length_m"]), float(s["gamma_per_w_per_m"]),
                alpha if alpha.ndim else float(alpha),
                float(s["beta2_s2_per_m"]), float(s.get("beta3_s3_per_m", 0.0)),
                float(s.get("center_frequency_hz", 0.5 * (fc[0] + fc[-1]))),
                float(s.get("beta0_per_m", 0.0)), float(s.get("beta1_s_per_m", 0.0)),
                _raman(s.get("raman_gain")),
                tuple(_pump(p, s["alpha_per_m"]) for p in s.get("pumps", [])))
            a = s.get("amplifier") or {}
            gain = a.get("gain", "transparent")
            phase = np.array(a.get("phase_rad", 0.0), dtype=float)
            dcu = float(a.get("beta_dcu_s2", 0.0))
            amp = Amplifier(gain if gain == "transparent" else np.array(gain, dtype=float), phase, dcu)
            for _ in range(s.get("count", 1)):
                spans.append(span)
                amps.append(amp)
        fit_cfg = FitConfig(n_psi=int(ov.get("n_psi", fit.get("n_psi", 10))),
                            m_w=float(ov.get("m_w", fit.get("m_w", 2.0))),
                            eps_theta=float(fit.get("eps_theta", 1e-3)),
                            series_terms=int(fit.get("series_terms", 24)),
                            max_condition=float(fit.get("max_condition", 1e12)))
        quad_cfg = QuadConfig(order=int(quad.get("order", 16)), tol=float(quad.get("tol", 1e-3)),
                              max_order=int(quad.get("max_order", 256)),
                              band_points=int(quad.get("band_points", 1)))
    except LinkFunctionError as exc:
        raise ConfigError([str(exc)]) from None
    cut = cfg.get("cut", "all")
    cuts = list(range(grid.n_channels)) if cut == "all" else [int(c) for c in (cut if isinstance(cut, list) else [cut])]
    dz = float(ov.get("dz_m", solver.get("dz_m", 10.0)))
    threads = int(ov.get("threads", cfg.get("threads", os.cpu_count() or 1)))
    if not dz > 0 or threads < 1:
        raise ConfigError(["dz_m must be positive and threads >= 1"])
    return RunConfig(
        grid=grid, spans=spans, amplifiers=amps, dz_m=dz,
        shooting_tol=float(solver.get("shooting_tol", 1e-8)),
        shooting_max_iter=int(solver.get("shooting_max_iter", 50)),
        fit=fit_cfg, quad=quad_cfg, cuts=cuts,
        oracle=bool(ov.get("oracle", mode.get("oracle", False))),
        no_raman=bool(ov.get("no_raman", mode.get("no_raman", False))),
        threads=threads, output_dir=ov.get("output_dir", cfg.get("output_dir")), source=cfg)


def config_echo(rc: RunConfig) -> dict[str, Any]:
    """JSON-friendly echo of the resolved configuration."""
    return {"source": rc.source, "resolved": rc.knobs(),
            "n_channels": rc.grid.n_channels, "n_spans": len(rc.spans)}
