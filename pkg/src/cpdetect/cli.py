"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .ingest import DataError, read_series
from .recursions import NumericalError, refine_positions
from .runner import build_provider, run_bayes_factor, run_detect, write_document
from .simulate import (
    RNG_ID,
    default_sv_params,
    gen_piecewise_gaussian,
    gen_poisson_ar1,
    gen_sv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _parse_overrides(pairs):
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _load(args) -> RunConfig:
    overrides = _parse_overrides(getattr(args, "set", None))
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = str(args.workers)
    if getattr(args, "output", None) is not None:
        overrides["output.path"] = args.output
    return load_config(args.config, overrides)


def cmd_ingest_check(args) -> int:
    if args.config:
        config = load_config(args.config, _parse_overrides(args.set))
        path, fmt = config.data_path, config.data_format
    else:
        if not args.data or not args.format:
            raise ConfigError("ingest-check needs --config or both --data and --format")
        path, fmt = args.data, args.format
    data = read_series(path, fmt)
    print(json.dumps({"path": str(path), "format": fmt, "n": data.n, "meta": data.meta}, indent=2))
    return EXIT_OK


def cmd_detect(args) -> int:
    config = _load(args)
    document, result = run_detect(config)
    write_document(document, config.output_path)
    print(f"wrote {config.output_path}")
    print(f"map_k = {result.map_k}")
    if result.refined_positions is not None:
        print("refined positions:", " ".join(str(int(t)) for t in result.refined_positions))
    elif result.map_positions_time.size:
        print("grid positions:", " ".join(str(int(t)) for t in result.map_positions_time))
    return EXIT_OK


def cmd_bayes_factor(args) -> int:
    config_a = load_config(args.config_a, _parse_overrides(args.set))
    config_b = load_config(args.config_b, _parse_overrides(args.set))
    report = run_bayes_factor(config_a, config_b, args.k)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    for k, block in report["factors"].items():
        print(f"B_{k} = {block['bayes_factor']:.6g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = args.seed
    if args.kind == "sv":
        y, latent = gen_sv(default_sv_params(), seed)
        meta = {
            "kind": "sv",
            "rng": RNG_ID,
            "seed": seed,
            "true_changepoints": [200, 400, 600, 700, 800, 850, 900, 950],
        }
        extra = {"latent": [float(v) for v in latent]}
    elif args.kind == "piecewise-gaussian":
        means = [float(v) for v in args.means.split(",")]
        sds = [float(v) for v in args.sds.split(",")]
        lengths = [int(v) for v in args.lengths.split(",")]
        y = gen_piecewise_gaussian(means, sds, lengths, seed)
        cps = list(np.cumsum(lengths)[:-1])
        meta = {
            "kind": "piecewise-gaussian",
            "rng": RNG_ID,
            "seed": seed,
            "means": means,
            "sds": sds,
            "lengths": lengths,
            "true_changepoints": [int(c) for c in cps],
        }
        extra = {}
    else:
        y = gen_poisson_ar1(args.n, args.alpha, args.phi, args.sigma_x, seed)
        meta = {
            "kind": "poisson-ar1",
            "rng": RNG_ID,
            "seed": seed,
            "n": args.n,
            "alpha": args.alpha,
            "phi": args.phi,
            "sigma_x": args.sigma_x,
        }
        extra = {}
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    if np.issubdtype(np.asarray(y).dtype, np.integer):
        out.write_text("\n".join(str(int(v)) for v in y) + "\n")
    else:
        out.write_text("\n".join(repr(float(v)) for v in y) + "\n")
    meta.update(extra)
    meta_path = out.with_suffix(out.suffix + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} ({len(y)} values) and {meta_path}")
    return EXIT_OK


def cmd_refine(args) -> int:
    result_path = Path(args.result)
    try:
        document = json.loads(result_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load result document {result_path}: {exc}")
    raw = {k: str(v) for k, v in document["config"].items() if v is not None}
    for key in ("model.intercept.enabled", "refine.enabled", "scaling.enabled", "field.enabled"):
        if key in raw:
            raw[key] = raw[key].lower()
    config = RunConfig.from_mapping(raw)
    if args.max_sweeps is not None:
        config.refine_max_sweeps = args.max_sweeps
    from .runner import _prepare_data  # late import to keep startup light

    prepared = _prepare_data(config)
    provider = build_provider(config, prepared)
    positions = document["result"]["map_positions_time"]
    if not positions:
        print("no changepoints to refine")
        return EXIT_OK
    refined = refine_positions(
        positions, config.grid_g, provider, provider.n, max_sweeps=config.refine_max_sweeps
    )
    document["result"]["refined_positions"] = [int(t) for t in refined]
    out = Path(args.out) if args.out else result_path
    write_document(document, out)
    print(f"wrote {out}")
    print("refined positions:", " ".join(str(int(t)) for t in refined))
    return EXIT_OK


def cmd_report(args) -> int:
    from . import report

    written = report.render(args.result, args.outdir, data_path=args.data)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpdetect",
        description="Bayesian multiple-changepoint detection on a candidate grid",
    )
    parser.add_argument("--version", action="version", version=f"cpdetect {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", help="parse a data file and report its size")
    p.add_argument("--config")
    p.add_argument("--data")
    p.add_argument("--format", choices=("fasta", "numeric", "event-dates"))
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("detect", help="run the full detection pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--workers", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bayes-factor", help="compare two segment models on the same data")
    p.add_argument("--config-a", required=True)
    p.add_argument("--config-b", required=True)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bayes_factor)

    p = sub.add_parser("simulate", help="generate a benchmark series")
    p.add_argument("--kind", choices=("sv", "piecewise-gaussian", "poisson-ar1"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--means", default="0,5")
    p.add_argument("--sds", default="1,1")
    p.add_argument("--lengths", default="97,103")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--phi", type=float, default=0.9)
    p.add_argument("--sigma-x", dest="sigma_x", type=float, default=0.1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("refine", help="re-run refinement on an existing result")
    p.add_argument("--result", required=True)
    p.add_argument("--max-sweeps", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("report", help="render figures and a csv summary from a result")
    p.add_argument("--result", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--data", help="override the data path recorded in the result")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
