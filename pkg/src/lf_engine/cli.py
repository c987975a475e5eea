"""``lf-engine`` command line.

    lf-engine run --config link.yaml --out results [--oracle] [--no-raman]
                  [--dz 10] [--n-psi 10] [--m-w 2] [--threads 4]
    lf-engine validate --config link.yaml
    lf-engine islands --config link.yaml --cut 2

Exit status is 0 on success, 2 for usage errors, 3 for configuration
problems and the ``exit_code`` of the raised error otherwise (see
:mod:`lf_engine.errors`).
"""
from __future__ import annotations

import argparse
import sys

from .config import build_run_config, load_config_file, validate_config
from .errors import ConfigError, LinkFunctionError
from .islands import enumerate_islands, islands_to_csv
from .pipeline import run_pipeline


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lf-engine", description="GN-model link function and NLI with arbitrary "
                                "power evolution (ISRS and Raman pumps).")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the full pipeline and write reports")
    r.add_argument("--config", required=True, help="YAML or JSON run configuration")
    r.add_argument("--out", help="output directory (overrides output_dir in the config)")
    r.add_argument("--oracle", action="store_true", default=None,
                   help="check every span integral against direct quadrature")
    r.add_argument("--no-raman", action="store_true", default=None,
                   help="drop Raman gain and pumps and compare against the closed-form link function")
    r.add_argument("--dz", type=float, help="ODE step in m")
    r.add_argument("--n-psi", type=int, help="polynomial degree of the Psi fit")
    r.add_argument("--m-w", type=float, help="weight exponent of the Psi fit")
    r.add_argument("--threads", type=int, help="worker threads (default: config value or CPU count)")

    v = sub.add_parser("validate", help="check a configuration and list every problem")
    v.add_argument("--config", required=True)

    i = sub.add_parser("islands", help="print the integration islands of one CUT as CSV")
    i.add_argument("--config", required=True)
    i.add_argument("--cut", type=int, required=True, help="zero-based channel index")
    return p


def _run(args) -> int:
    overrides = {"output_dir": args.out, "oracle": args.oracle, "no_raman": args.no_raman,
                 "dz_m": args.dz, "n_psi": args.n_psi, "m_w": args.m_w, "threads": args.threads}
    cfg = build_run_config(args.config, overrides)
    if cfg.output_dir is None:
        raise ConfigError(["no output directory: pass --out or set output_dir"])
    result = run_pipeline(cfg)
    sys.stdout.write(result.report.summary())
    print(f"wrote {len(result.files)} files to {cfg.output_dir}")
    return 0


def _validate(args) -> int:
    diags = validate_config(args.config)
    if diags:
        for d in diags:
            print(d)
        print(f"{len(diags)} problem(s) found", file=sys.stderr)
        return ConfigError.exit_code
    print("config OK")
    return 0


def _islands(args) -> int:
    cfg = build_run_config(load_config_file(args.config))
    if not 0 <= args.cut < cfg.grid.n_channels:
        raise ConfigError([f"cut {args.cut} out of range (grid has {cfg.grid.n_channels} channels)"])
    islands_to_csv(enumerate_islands(cfg.grid, args.cut), sys.stdout)
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _run, "validate": _validate, "islands": _islands}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return exc.exit_code
    except LinkFunctionError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
