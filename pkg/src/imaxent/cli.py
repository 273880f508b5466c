"""Command-line interface.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .datafile import read_observations
from .kernels import Sample
from .mixtures import min_mise_bandwidths, mixture
from .permutohedron import N_MAX, marginal_density_exact
from .reference import build_reference, cached_reference, load_reference, save_reference
from .select import parse_method, select
from .simulate import SimConfig, emit, run_simulation

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(_fail(EXIT_CONFIG, f"{self.prog}: error: {message}"))


def _fail(code: int, message: str) -> int:
    print(message, file=sys.stderr)
    return code


def _write_json(obj, out) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _cmd_reference_build(args) -> int:
    if args.out:
        ref = build_reference(args.n, draws=args.draws, grid_size=args.grid, seed=args.seed,
                              workers=args.workers)
        path = save_reference(ref, args.out)
    else:
        ref = cached_reference(args.n, draws=args.draws, grid_size=args.grid, seed=args.seed,
                               workers=args.workers)
        path = None
    summary = {"n": ref.n, "source": ref.source, "draws": ref.draws,
               "central_moments": {str(k): v for k, v in ref.central_moments.items()},
               "path": str(path) if path else None}
    _write_json(summary, None)
    return EXIT_OK


def _cmd_marginal(args) -> int:
    out = Path(args.out)
    u = np.linspace(0.0, 1.0, args.grid + 1)
    if args.exact:
        if args.n > N_MAX:
            return _fail(EXIT_CONFIG, f"--exact supports n <= {N_MAX}")
        dens = marginal_density_exact(args.n)
        values = dens(u)
        _write_json(dens.to_json(), out.with_suffix(".json"))
    else:
        ref = cached_reference(args.n, draws=args.draws, grid_size=args.grid, seed=args.seed)
        values = ref.density_values
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "l_n_u"])
        for a, b in zip(u, values):
            w.writerow([repr(float(a)), repr(float(b))])
    return EXIT_OK


def _load_ref(source: str, n: int, seed: int, draws: int, grid: int):
    if source == "auto":
        return cached_reference(n, draws=draws, grid_size=grid, seed=seed)
    ref = load_reference(source)
    if ref.n != n:
        raise ValueError(f"reference {source} is for n={ref.n}, data has n={n}")
    return ref


def _cmd_bandwidth(args) -> int:
    x = read_observations(args.input, args.column)
    method = parse_method(args.method)
    sample = Sample.from_array(x)
    ref = None
    if method.kind != "cv":
        ref = _load_ref(args.ref, sample.n, args.seed, args.ref_draws, args.ref_grid)
    est = select(method, sample, ref, args.kernel)
    _write_json(est.to_dict(), args.out)
    return EXIT_OK


def _cmd_mise(args) -> int:
    res = min_mise_bandwidths(mixture(args.density), args.n, args.kernel)
    _write_json(res, args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    methods = tuple(m for m in args.methods.split(",") if m.strip())
    config = SimConfig(density_id=args.density, n=args.n, replications=args.reps,
                       methods=methods, kernel=args.kernel, master_seed=args.seed,
                       ref_source=args.ref, workers=args.workers, ref_draws=args.ref_draws,
                       ref_grid=args.ref_grid)
    result = run_simulation(config)
    emit(result, "csv", args.out)
    emit(result, "json", Path(args.out) / "result.json")
    for s in result.summary():
        print(f"{s.method}: median {s.quantiles[3]:.4f}  mean {s.mean:.4f}  sd {s.sd:.4f}"
              f"  edge minima {s.edge_minima}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="imaxent", description="iMaxEnt bandwidth selection tools")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ref = sub.add_parser("reference", help="reference distribution tables")
    ref_sub = ref.add_subparsers(dest="action", required=True, parser_class=_Parser)
    rb = ref_sub.add_parser("build", help="tabulate L_n and its moments")
    rb.add_argument("--n", type=int, required=True)
    rb.add_argument("--draws", type=int, default=100_000)
    rb.add_argument("--grid", type=int, default=1000)
    rb.add_argument("--seed", type=int, default=0)
    rb.add_argument("--workers", type=int, default=1)
    rb.add_argument("--out", help="JSON path; default is the on-disk cache")
    rb.set_defaults(func=_cmd_reference_build)

    mg = sub.add_parser("marginal", help="tabulate the marginal density l_n")
    mg.add_argument("--n", type=int, required=True)
    mg.add_argument("--exact", action="store_true", help=f"exact piecewise polynomial (n <= {N_MAX})")
    mg.add_argument("--grid", type=int, default=1000)
    mg.add_argument("--draws", type=int, default=100_000)
    mg.add_argument("--seed", type=int, default=0)
    mg.add_argument("--out", required=True, help="CSV path; --exact also writes PATH.json")
    mg.set_defaults(func=_cmd_marginal)

    bw = sub.add_parser("bandwidth", help="select a bandwidth for a data file")
    bw.add_argument("--input", required=True)
    bw.add_argument("--column")
    bw.add_argument("--method", default="ad", help="ad | cvm:ALPHA:EPS | ns:R | cue:R | m2 | cv")
    bw.add_argument("--kernel", default="gaussian", choices=["gaussian", "epanechnikov"])
    bw.add_argument("--ref", default="auto", help="reference JSON path or 'auto'")
    bw.add_argument("--seed", type=int, default=0, help="seed of an auto-built reference")
    bw.add_argument("--ref-draws", type=int, default=100_000)
    bw.add_argument("--ref-grid", type=int, default=1000)
    bw.add_argument("--out", help="JSON path; default stdout")
    bw.set_defaults(func=_cmd_bandwidth)

    ms = sub.add_parser("mise", help="exact min-MISE bandwidths for a normal mixture")
    ms.add_argument("--density", type=int, required=True)
    ms.add_argument("--n", type=int, required=True)
    ms.add_argument("--kernel", default="gaussian")
    ms.add_argument("--out")
    ms.set_defaults(func=_cmd_mise)

    sm = sub.add_parser("simulate", help="Monte Carlo study of the selectors")
    sm.add_argument("--density", type=int, required=True)
    sm.add_argument("--n", type=int, required=True)
    sm.add_argument("--reps", type=int, default=500)
    sm.add_argument("--methods", default="ad,ns2,ns4", help="comma-separated method list")
    sm.add_argument("--kernel", default="gaussian", choices=["gaussian", "epanechnikov"])
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--workers", type=int, default=1)
    sm.add_argument("--ref", default="auto")
    sm.add_argument("--ref-draws", type=int, default=100_000)
    sm.add_argument("--ref-grid", type=int, default=1000)
    sm.add_argument("--out", required=True, help="output directory")
    sm.set_defaults(func=_cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, f"numerical failure: {exc}")
    except (ValueError, OSError, KeyError) as exc:
        return _fail(EXIT_CONFIG, f"error: {exc}")


if __name__ == "__main__":
    sys.exit(main())
