"""Command-line interface: ``mrect analyze | generate | sweep``.

Exit codes: 0 success, 1 input error, 2 report written but some certificate check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .curvatures import CurvatureKind
from .errors import MrectError
from .generators import GraphSpec, gen_c1beta_graph, gen_cantor4, gen_plane, gen_segment, gen_sphere, write_fixture
from .measure import read_cloud_csv
from .report import AnalysisConfig, analyze, dumps, run_sweep, write_scales_csv, write_sweep_csv

GENERATORS = ("plane", "sphere", "segment", "c1beta", "cantor4")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which we reserve
        raise InputError(message)


def _floats(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    return vals


def _ints(text: str) -> list[int]:
    return [int(v) for v in _floats(text)]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mrect", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="analyze a CSV point cloud and write a JSON report")
    a.add_argument("--input", required=True)
    a.add_argument("--m", type=int, required=True)
    a.add_argument("--l", type=int, default=2)
    a.add_argument("--p", type=float, default=2.0)
    a.add_argument("--alpha", type=float, default=0.5)
    a.add_argument("--kind", default="kappa")
    a.add_argument("--r0", type=float, default=None)
    a.add_argument("--depth", type=int, default=6)
    a.add_argument("--budget", type=int, default=100_000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--points", type=int, default=10, help="number of base points to analyze")
    a.add_argument("--out", default="report.json")
    a.add_argument("--scales-csv", default=None, help="optional per-scale CSV for plotting")

    g = sub.add_parser("generate", help="write a synthetic fixture CSV and JSON sidecar")
    g.add_argument("generator")
    g.add_argument("--count", type=int, default=1000)
    g.add_argument("--m", type=int, default=None)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--beta", type=float, default=0.5)
    g.add_argument("--depth", type=int, default=8, help="series depth of the c1beta graph")
    g.add_argument("--amplitude", type=float, default=0.25)
    g.add_argument("--level", type=int, default=4, help="cantor4 level")
    g.add_argument("--sampling", default="random", choices=("random", "grid"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=None)

    s = sub.add_parser("sweep", help="k_energy refinement trends over (beta, alpha, kind) grids")
    s.add_argument("--betas", type=_floats, default=[0.5])
    s.add_argument("--alphas", type=_floats, default=[0.3, 0.8])
    s.add_argument("--kinds", default="kappa_h")
    s.add_argument("--counts", type=_ints, default=[250, 500, 1000, 2000])
    s.add_argument("--l", type=int, default=3)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--r", type=float, default=0.25)
    s.add_argument("--points", type=int, default=5)
    s.add_argument("--budget", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="sweep.csv")
    return p


def _generate(args) -> int:
    name = args.generator
    if name not in GENERATORS:
        raise InputError(f"unknown generator {name!r}; choose from {', '.join(GENERATORS)}")
    if name == "plane":
        fx = gen_plane(args.count, args.m or 2, args.n or 3, args.seed, args.sampling)
    elif name == "sphere":
        fx = gen_sphere(args.count, args.m or 1, args.n, args.seed, args.sampling)
    elif name == "segment":
        fx = gen_segment(args.count, args.n or 2, args.seed, args.sampling)
    elif name == "c1beta":
        spec = GraphSpec(m=args.m or 1, n=args.n or 2, hoelder_beta=args.beta, series_depth=args.depth,
                         amplitude=args.amplitude, seed=args.seed, count=args.count, sampling=args.sampling)
        fx = gen_c1beta_graph(spec)
    else:
        fx = gen_cantor4(args.level)
    out = Path(args.out or f"{name}.csv")
    side = write_fixture(fx, out)
    print(json.dumps({"csv": str(out), "sidecar": str(side), **fx.meta}, sort_keys=True))
    return 0


def _analyze(args) -> int:
    CurvatureKind.parse(args.kind)
    cloud = read_cloud_csv(args.input, args.m)
    cfg = AnalysisConfig(m=args.m, l=args.l, p=args.p, alpha=args.alpha, kind=args.kind, r0=args.r0,
                         depth=args.depth, budget=args.budget, seed=args.seed, points=args.points)
    report = analyze(cloud, cfg, args.input)
    Path(args.out).write_text(dumps(report), encoding="utf-8")
    if args.scales_csv:
        write_scales_csv(report, args.scales_csv)
    return 0 if report["certificates_ok"] else 2


def _sweep(args) -> int:
    kinds = [CurvatureKind.parse(k).value for k in args.kinds.split(",") if k.strip()]
    base = np.linspace(-0.4, 0.4, args.points).tolist() if args.points > 1 else [0.0]
    trends = run_sweep(args.betas, args.alphas, kinds, args.counts, l=args.l, p=args.p, r=args.r,
                       base_x=base, seed=args.seed, budget=args.budget)
    write_sweep_csv(trends, args.out)
    print(json.dumps([t.to_dict() for t in trends], sort_keys=True))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"analyze": _analyze, "generate": _generate, "sweep": _sweep}[args.command]
        return handler(args)
    except (InputError, MrectError, ValueError, OSError) as exc:
        print(f"mrect: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
