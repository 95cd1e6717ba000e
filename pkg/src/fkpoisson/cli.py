"""Command line: ``fkpoisson classify|diagnose|solve|report --config FILE``.

Exit codes: 0 success, 1 invalid input (schema, expression or evaluation
error), 2 refused computation (Unsupported verdict or divergence risk),
3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import report as report_mod
from .config import ConfigError, config_hash, load_config
from .expr import ExprError
from .outputs import update_metadata, write_csv, write_json
from .pipeline import Session
from .sde import set_default_workers
from .solver import Refused

log = logging.getLogger("fkpoisson")

EXIT_OK, EXIT_INVALID, EXIT_REFUSED, EXIT_INTERNAL = 0, 1, 2, 3


def _outdir(cfg, override=None) -> Path:
    d = Path(override or cfg.output.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _stamp(cfg) -> dict:
    return {"config_hash": config_hash(cfg), "seed": cfg.simulation.seed}


def _want(cfg, fmt):
    return fmt in cfg.output.formats


def cmd_classify(cfg, outdir: Path, workers=None, session=None) -> dict:
    s = session or Session(cfg, workers)
    payload = s.classify_payload()
    if _want(cfg, "json"):
        write_json(outdir / "classify.json", payload, _stamp(cfg))
    v = payload["verdict"]
    print(f"verdict: {v['label']}" + (f" (also {', '.join(v['also'])})" if v["also"] else ""))
    for r in v["reasons"]:
        print(f"  reason: {r}")
    for w in v["warnings"]:
        print(f"  warning: {w}")
    return payload


def cmd_diagnose(cfg, outdir: Path, workers=None, session=None) -> dict:
    s = session or Session(cfg, workers)
    payload = s.diagnostics_payload()
    rows = payload.pop("_rows")
    stamp = _stamp(cfg)
    if _want(cfg, "json"):
        write_json(outdir / "diagnostics.json", payload, stamp)
    if _want(cfg, "csv"):
        write_csv(outdir / "tv_decay.csv", ["time", "estimate", "stderr", "used_in_fit"], rows["tv"], stamp)
        m = rows["moments"]
        write_csv(outdir / "exp_moments.csv", ["time", "estimate", "stderr"],
                  zip(m.times, m.values, m.stderr), stamp)
        dev = rows["deviation"]
        up = dev.extra["upper"]
        write_csv(outdir / "deviation.csv", ["time", "lower", "lower_stderr", "upper", "upper_stderr"],
                  zip(dev.times, dev.values, dev.stderr, up.values, up.stderr), stamp)
        write_csv(outdir / "lmgf.csv", ["beta", "T", "H_T", "stderr"], rows["lmgf"], stamp)
    mix = payload["mixing"]
    lo, hi = (_g(v) for v in mix["rate_ci"])
    print(f"mixing rate: {_g(mix['rate'])} (95% CI [{lo}, {hi}]){'  NON-MIXING' if mix['non_mixing'] else ''}")
    cmp_ = payload["lmgf_mean_comparison"]
    if cmp_:
        print(f"H'(0) = {cmp_['derivative_at_zero']:.5g} vs mu-average {cmp_['mu_average']:.5g}"
              f" ({'agree' if cmp_['agrees'] else 'DISAGREE'})")
    return payload


def cmd_solve(cfg, outdir: Path, workers=None, *, force=False, crosscheck=False, oracle=False, session=None) -> dict:
    s = session or Session(cfg, workers)
    payload = s.solve_payload(force=force, crosscheck=crosscheck, oracle=oracle)
    stamp = _stamp(cfg)
    grid = None
    if "oracle" in payload and "_grid" in payload["oracle"]:
        grid = payload["oracle"].pop("_grid")
    if _want(cfg, "json"):
        write_json(outdir / "solve.json", payload, stamp)
    if _want(cfg, "csv"):
        d = s.d
        rows = [[*e.x, e.value, e.stderr, e.T, e.tail_bound, e.dt, e.N, e.case] for e in payload["estimates"]]
        header = [f"x{i + 1}" for i in range(d)] + ["value", "stderr", "T", "tail_bound", "dt", "N", "case"]
        write_csv(outdir / "solve.csv", header, rows, stamp)
        if grid is not None:
            write_csv(outdir / "oracle_grid.csv", ["x", "u"], grid, stamp)
    for w in payload["warnings"]:
        print(f"warning: {w}")
    for e in payload["estimates"]:
        print(f"u({', '.join(f'{v:g}' for v in e.x)}) = {e.value:.6g} +- {e.stderr:.2g}"
              f"  (T={e.T:.4g}, tail<={e.tail_bound:.2g})")
    return payload


def _build_parser():
    p = argparse.ArgumentParser(prog="fkpoisson", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["classify", "diagnose", "solve", "report"])
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--dir", help="run directory (report); defaults to output.directory of --config")
    p.add_argument("--out", help="override output.directory")
    p.add_argument("--crosscheck", action="store_true", help="solve: run semigroup, ball, growth and centering checks")
    p.add_argument("--oracle", action="store_true", help="solve: compare with the finite-difference oracle (d=1)")
    p.add_argument("--force", action="store_true", help="solve past an Unsupported verdict or divergence risk")
    p.add_argument("--workers", type=int, default=None, help="worker threads (results do not depend on it)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _g(v):
    return "n/a" if v is None else f"{v:.4g}"


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            set_default_workers(args.workers)
        if args.command == "report":
            if args.dir:
                directory = Path(args.dir)
            elif args.config:
                directory = Path(args.out or load_config(args.config).output.directory)
            else:
                raise ConfigError("report needs --dir or --config")
            summary = report_mod.build_report(directory)
            print(f"wrote {summary}")
            return EXIT_OK
        if not args.config:
            raise ConfigError("--config is required")
        cfg = load_config(args.config)
        outdir = _outdir(cfg, args.out)
        if args.command == "classify":
            cmd_classify(cfg, outdir, args.workers)
        elif args.command == "diagnose":
            cmd_diagnose(cfg, outdir, args.workers)
        else:
            cmd_solve(cfg, outdir, args.workers, force=args.force, crosscheck=args.crosscheck, oracle=args.oracle)
        update_metadata(outdir, args.command, {"argv": list(argv if argv is not None else sys.argv[1:]),
                                               "workers": args.workers})
        return EXIT_OK
    except (ConfigError, ExprError, report_mod.ReportError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Refused as e:
        print(f"refused: {e}", file=sys.stderr)
        for r in e.reasons:
            print(f"  reason: {r}", file=sys.stderr)
        return EXIT_REFUSED
    except Exception as e:  # noqa: BLE001 - the exit code contract covers everything else
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
