"""Command-line entry point: ``fbmdrift {fbm,sde,estimate,experiment,verify,replay}``.

Exit codes: 0 success, 2 configuration/argument error, 3 numerical failure.
Data goes to ``--out`` when given (plus a ``*.manifest.json`` or
``manifest.json`` next to it), otherwise to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from fbmdrift.coefficients import parse_coefficient_spec
from fbmdrift.config import parse_config, resolved_map
from fbmdrift.errors import ConfigError, DomainError, FbmDriftError, NumericalError
from fbmdrift.estimators import estimate
from fbmdrift.experiment import ESTIMATORS, run_experiment, worker_count
from fbmdrift.fbm import FineGrid, generate_fbm
from fbmdrift.fracderiv import theorem1_statistic, z_scaling_slope
from fbmdrift.report import (
    RunManifest,
    emit_report,
    fmt,
    markdown_table,
    read_manifest,
    report_rows,
    REPORT_HEADER,
    write_manifest,
)
from fbmdrift.sde import DRIVERS, ObservationGrid, ObservationSeries, downsample, simulate_sde

log = logging.getLogger("fbmdrift")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _write_csv(header, rows, out: str | None):
    if out is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return None
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _manifest_beside(out: str | None, subcommand: str, config: dict, seed):
    if out is not None:
        write_manifest(RunManifest(subcommand, config, seed), Path(f"{out}.manifest.json"))


def cmd_fbm(args) -> int:
    grid = FineGrid.from_horizon(args.horizon, args.step)
    path = generate_fbm(args.hurst, grid, args.seed)
    rows = ((fmt(t), fmt(v)) for t, v in zip(grid.times, path.values))
    _write_csv(("t", "value"), rows, args.out)
    _manifest_beside(args.out, "fbm", {
        "hurst": args.hurst, "horizon": args.horizon, "step": args.step, "seed": args.seed,
    }, args.seed)
    return EXIT_OK


def cmd_sde(args) -> int:
    model = parse_coefficient_spec(args.coeff)
    path = simulate_sde(
        args.theta, model, args.x0, args.hurst, args.n, args.refinement, args.seed,
        driver=args.driver,
    )
    obs = downsample(path, ObservationGrid(args.n))
    rows = ((str(k), fmt(t), fmt(x)) for k, (t, x) in enumerate(zip(obs.grid.points, obs.values)))
    _write_csv(("k", "t", "x"), rows, args.out)
    _manifest_beside(args.out, "sde", {
        "theta": args.theta, "hurst": args.hurst, "n": args.n, "refinement": args.refinement,
        "seed": args.seed, "x0": args.x0, "coeff": args.coeff, "driver": args.driver,
    }, args.seed)
    return EXIT_OK


def read_observations(path: str | Path) -> ObservationSeries:
    """Parse an observation CSV with columns ``k,t,x`` on the dyadic design."""
    try:
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"k", "t", "x"} <= set(reader.fieldnames):
                raise ConfigError(f"{path}: expected columns k,t,x", "input")
            rows = [(int(r["k"]), float(r["t"]), float(r["x"])) for r in reader]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", "input") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed row ({exc})", "input") from None
    size = len(rows) - 1
    n = round(math.log(size, 4)) if size > 0 else 0
    if n < 1 or 4**n != size:
        raise ConfigError(f"{path}: {len(rows)} rows is not 2^(2n)+1 for any n >= 1", "input")
    grid = ObservationGrid(n)
    ks = np.array([r[0] for r in rows])
    ts = np.array([r[1] for r in rows])
    if not np.array_equal(ks, np.arange(size + 1)) or not np.allclose(ts, grid.points, rtol=0, atol=1e-12):
        raise ConfigError(f"{path}: rows must be k = 0..2^(2n) with t = k 2^-n", "input")
    return ObservationSeries(grid=grid, values=[r[2] for r in rows])


def cmd_estimate(args) -> int:
    obs = read_observations(args.input)
    model = parse_coefficient_spec(args.coeff)
    kinds = ESTIMATORS if args.estimator == "both" else (args.estimator,)
    if "weighted" in kinds and args.hurst is None:
        raise ConfigError("--hurst is required for the weighted estimator", "hurst")
    rows = []
    for kind in kinds:
        res = estimate(kind, obs, model, args.hurst)
        for note in res.warnings:
            log.warning("%s: %s", kind, note)
        rows.append((kind, str(res.n), fmt(res.value), fmt(res.numerator), fmt(res.denominator)))
    _write_csv(("estimator", "n", "value", "numerator", "denominator"), rows, args.out)
    _manifest_beside(args.out, "estimate", {
        "input": str(args.input), "coeff": args.coeff, "hurst": args.hurst,
        "estimator": args.estimator,
    }, None)
    return EXIT_OK


def _experiment_overrides(args) -> dict[str, Any]:
    return {
        "theta": args.theta, "hurst": args.hurst, "n": args.n, "replicates": args.replicates,
        "refinement": args.refinement, "seed": args.seed, "driver": args.driver,
        "estimator": args.estimator,
    }


def run_experiment_command(config_path, overrides, out, markdown) -> int:
    config, resolved = parse_config(config_path, overrides)
    report = run_experiment(config, workers=worker_count())
    for key, cell in sorted(report.cells.items()):
        if cell.failures:
            log.warning("cell H=%g n=%d %s: %d failed replicate(s)", *key, cell.failures)
    if out is None:
        _write_csv(REPORT_HEADER, report_rows(report), None)
        if markdown:
            sys.stdout.write("\n" + markdown_table(report))
        return EXIT_OK
    emit_report(report, out, markdown=markdown)
    manifest = RunManifest("experiment", resolved, resolved["seed"], derived=resolved_map(resolved))
    write_manifest(manifest, Path(out) / "manifest.json")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.config is None and args.theta is None:
        raise ConfigError("--config is required (or give every required key as a flag)", "config")
    return run_experiment_command(args.config, _experiment_overrides(args), args.out, args.markdown)


def cmd_verify_frac_deriv(args) -> int:
    grid = FineGrid.from_horizon(args.horizon, args.step)
    paths = [generate_fbm(args.hurst, grid, args.seed, (i,)) for i in range(args.paths)]
    stat = theorem1_statistic(paths, args.alpha, args.gamma)
    slope = z_scaling_slope(paths[0], args.alpha)
    header = ("hurst", "alpha", "gamma", "paths", "horizon", "statistic", "pair_count", "scaling_slope")
    row = (fmt(args.hurst), fmt(args.alpha), fmt(args.gamma), str(args.paths), fmt(args.horizon),
           fmt(stat.value), str(stat.pair_count), fmt(slope))
    _write_csv(header, [row], None)
    return EXIT_OK


def cmd_replay(args) -> int:
    manifest = read_manifest(args.manifest)
    cfg = manifest.config
    if manifest.subcommand == "experiment":
        if args.out is None:
            raise ConfigError("replaying an experiment needs --out DIR", "out")
        overrides = dict(cfg)
        overrides["coeff"] = dict(cfg["coeff"])
        return run_experiment_command(None, overrides, args.out, args.markdown)
    argv = [manifest.subcommand]
    for key, value in cfg.items():
        if value is not None:
            argv += [f"--{key}", str(value)]
    if args.out is not None:
        argv += ["--out", args.out]
    return main(argv)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fbmdrift", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fbm", help="sample one fBm path")
    f.add_argument("--hurst", type=float, required=True)
    f.add_argument("--horizon", type=float, required=True)
    f.add_argument("--step", type=float, required=True)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fbm)

    s = sub.add_parser("sde", help="simulate and observe one SDE path")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--hurst", type=float, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--refinement", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--coeff", required=True, help='"builtin:<name>" or "<a expr>; <b expr>"')
    s.add_argument("--driver", choices=DRIVERS, default="exact")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sde)

    e = sub.add_parser("estimate", help="estimate theta from an observation CSV")
    e.add_argument("--input", required=True)
    e.add_argument("--coeff", required=True)
    e.add_argument("--hurst", type=float)
    e.add_argument("--estimator", choices=(*ESTIMATORS, "both"), default="both")
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    x = sub.add_parser("experiment", help="Monte Carlo relative-error experiment")
    x.add_argument("--config")
    x.add_argument("--out", help="output directory")
    x.add_argument("--markdown", action="store_true")
    x.add_argument("--theta", type=float)
    x.add_argument("--hurst", type=float, nargs="+")
    x.add_argument("--n", type=int, nargs="+")
    x.add_argument("--replicates", type=int)
    x.add_argument("--refinement", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--driver", choices=DRIVERS)
    x.add_argument("--estimator", choices=(*ESTIMATORS, "both"))
    x.set_defaults(func=cmd_experiment)

    v = sub.add_parser("verify", help="diagnostic checks")
    vsub = v.add_subparsers(dest="check", required=True, parser_class=_Parser)
    fd = vsub.add_parser("frac-deriv", help="fractional-derivative sup-ratio statistic")
    fd.add_argument("--hurst", type=float, default=0.7)
    fd.add_argument("--alpha", type=float, default=0.35)
    fd.add_argument("--gamma", type=float, default=0.6)
    fd.add_argument("--paths", type=int, default=100)
    fd.add_argument("--horizon", type=float, default=8.0)
    fd.add_argument("--step", type=float, default=2.0**-8)
    fd.add_argument("--seed", type=int, default=0)
    fd.set_defaults(func=cmd_verify_frac_deriv)

    r = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out")
    r.add_argument("--markdown", action="store_true")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"fbmdrift: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="fbmdrift: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        key = getattr(exc, "key", None)
        prefix = f"[{key}] " if key else ""
        print(f"fbmdrift: config error: {prefix}{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"fbmdrift: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FbmDriftError as exc:
        print(f"fbmdrift: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
