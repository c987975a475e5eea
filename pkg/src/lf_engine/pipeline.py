"""End-to-end NLI computation driven by a :class:`RunConfig`.

Stages run in order: power profiles per span, islands per CUT, per-island
per-span fits, optional oracle check of every span integral, GN integration
per CUT and report writing.  Within a stage, islands fan out to a thread
pool.  Every total is a correctly rounded sum, so serial and threaded runs
write identical files.
"""
from __future__ import annotations

import json
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy
import yaml

from .config import RunConfig, config_echo
from .errors import ContractError, LinkFunctionError, add_context
from .gn import NliReport, evaluate_channel
from .islands import Island, enumerate_islands, island_points, islands_to_csv
from .lf import fit_islands, fits_to_csv, span_integral_oracle, span_integral_poly, theta_exponent
from .link import Link, propagate_link


@dataclass
class RunResult:
    link: Link
    islands: dict[int, list[Island]]
    fits: dict
    report: NliReport
    closed_form: NliReport | None = None
    oracle_dev: dict | None = None
    files: list[str] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"lf_engine": pkg, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pyyaml": yaml.__version__}


def _pmap(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def oracle_deviations(link: Link, islands, fits, workers: int = 1):
    """Relative deviation |I_poly - I_oracle| / |I_oracle| per island key and span,
    evaluated at the island's central point."""
    def one(isl):
        f1, f2, f3, _ = island_points(link.grid, isl)
        devs = []
        for n, fit in enumerate(fits[isl.channels]):
            try:
                ref = span_integral_oracle(link, n, f1, f2, f3)
            except LinkFunctionError as exc:
                raise add_context(exc, f"span {n}, island {isl.channels}")
            got = span_integral_poly(fit, theta_exponent(link, n, f1, f2, f3))
            devs.append(abs(got - ref) / abs(ref))
        return isl.channels, devs
    return dict(_pmap(one, list(islands), workers))


def strip_raman(spans):
    return [replace(s, raman_gain=None, pumps=()) for s in spans]


def run_pipeline(cfg: RunConfig, out_dir=None) -> RunResult:
    """Run every stage and write the artifacts to ``out_dir`` (default
    ``cfg.output_dir``; nothing is written when both are ``None``).

    Files: ``profiles_span<k>.csv``, ``islands.csv``, ``fits.csv``,
    ``nli_report.csv``, ``nli_islands.csv``, ``summary.txt`` and
    ``manifest.json`` (plus ``nli_report_closed_form.csv`` in no-Raman mode).
    If a stage fails, the manifest is still written with ``partial: true``
    and the error, then the error propagates.
    """
    out = out_dir if out_dir is not None else cfg.output_dir
    out = Path(out) if out is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    workers = cfg.threads
    timings: dict[str, float] = {}
    files: list[str] = []
    stages: list[str] = []
    manifest = {"config": config_echo(cfg), "versions": _versions(), "knobs": cfg.knobs(),
                "timings_s": timings, "files": files, "completed_stages": stages, "partial": True}
    state: dict = {}

    def write(name, fn):
        if out is not None:
            fn(out / name)
            files.append(name)

    def stage(name):
        class _Stage:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, et, ev, tb):
                timings[name] = time.perf_counter() - self.t0
                if et is None:
                    stages.append(name)
                elif issubclass(et, LinkFunctionError):
                    add_context(ev, f"stage {name}")
                return False
        return _Stage()

    try:
        spans = cfg.spans
        raman_in_config = any(not s.raman_free for s in spans)
        if cfg.no_raman:
            spans = strip_raman(spans)
        manifest["raman_stripped"] = bool(cfg.no_raman and raman_in_config)

        with stage("profiles"):
            link = propagate_link(spans, cfg.amplifiers, cfg.grid, cfg.dz_m, cfg.shooting_tol,
                                  cfg.shooting_max_iter)
            manifest["shooting"] = [{"span": k, "iterations": p.shooting_iterations,
                                     "residual": p.shooting_residual} for k, p in enumerate(link.profiles)]
            manifest["rho_end"] = [list(map(float, p.rho_end)) for p in link.profiles]
            manifest["amplifier_gain"] = [list(map(float, a.gain)) for a in link.amplifiers]
            for k, prof in enumerate(link.profiles):
                write(f"profiles_span{k}.csv", prof.to_csv)
        state["link"] = link

        with stage("islands"):
            islands = {c: enumerate_islands(cfg.grid, c) for c in cfg.cuts}
            flat = [isl for c in cfg.cuts for isl in islands[c]]
            write("islands.csv", lambda p: islands_to_csv(flat, p))

        with stage("fits"):
            fits = fit_islands(link, flat, cfg.fit, workers)

        oracle_dev = None
        if cfg.oracle:
            with stage("oracle"):
                oracle_dev = oracle_deviations(link, flat, fits, workers)
            worst = max((d for v in oracle_dev.values() for d in v), default=0.0)
            manifest["oracle_max_rel_dev"] = worst
        centres = {isl.channels: island_points(cfg.grid, isl)[:3] for isl in flat}
        write("fits.csv", lambda p: fits_to_csv(link, fits, p, oracle_dev, centres))

        with stage("gn"):
            chans = [evaluate_channel(link, c, islands[c], fits, cfg.quad, "poly", cfg.fit, workers)
                     for c in cfg.cuts]
            report = NliReport(chans, "poly", cfg.quad)

        closed = None
        if cfg.no_raman:
            if not link.raman_free:
                raise ContractError("no-raman mode needs Raman-free spans")
            with stage("gn_closed_form"):
                closed = NliReport([evaluate_channel(link, c, islands[c], None, cfg.quad, "closed_form",
                                                     cfg.fit, workers) for c in cfg.cuts], "closed_form", cfg.quad)
            dev = [abs(a.power_w - b.power_w) / b.power_w if b.power_w > 0 else abs(a.power_w)
                   for a, b in zip(report.channels, closed.channels)]
            manifest["closed_form_max_rel_dev"] = max(dev, default=0.0)
            report.extra["closed-form NLI power [W]"] = " ".join(f"{c.power_w:.6e}" for c in closed.channels)
            report.extra["max relative deviation poly vs closed form"] = f"{max(dev, default=0.0):.3e}"
            write("nli_report_closed_form.csv", closed.to_csv)
        if oracle_dev is not None:
            report.extra["max relative deviation poly vs oracle span integral"] = \
                f"{manifest['oracle_max_rel_dev']:.3e}"
        if manifest["raman_stripped"]:
            report.extra["note"] = "Raman gain and pumps removed from the configured spans (no-raman mode)"

        write("nli_report.csv", report.to_csv)
        write("nli_islands.csv", report.islands_to_csv)
        write("summary.txt", lambda p: p.write_text(report.summary()))
        manifest["partial"] = False
        manifest["nli_power_w"] = {str(c.cut): c.power_w for c in report.channels}
        return RunResult(link, islands, fits, report, closed, oracle_dev, files, manifest)
    except LinkFunctionError as exc:
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc),
                             "exit_code": exc.exit_code, "context": getattr(exc, "context", [])}
        raise
    finally:
        if out is not None:
            files.append("manifest.json")
            (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default,
                                                          allow_nan=True) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return repr(o)
    raise TypeError(f"not serializable: {type(o).__name__}")
