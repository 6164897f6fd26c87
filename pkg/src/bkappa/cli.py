"""Command-line entry point: ``bkappa {roots,partition,fractal,embed}``.

Exit codes: 0 success, 1 usage or input error, 2 partial result (a root
solve that could not account for every root, or a failed ``--check``).
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from bkappa import embedding, fractal, partitions, rootfinder

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _num(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _emit_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------- roots


def parse_coeff_list(text: str) -> list[complex]:
    items = [s for s in text.split(",")]
    if not items or any(not s.strip() for s in items):
        raise UsageError(f"malformed coefficient list {text!r}")
    try:
        return [fractal.parse_complex(s) for s in items]
    except ValueError as exc:
        raise UsageError(f"malformed coefficient in {text!r}") from exc


def load_coeff_json(path: str) -> list[complex]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    raw = data.get("coeffs") if isinstance(data, dict) else None
    if not isinstance(raw, list) or not raw:
        raise UsageError(f'{path}: expected {{"coeffs": [[re, im], ...]}}')
    out = []
    for c in raw:
        if isinstance(c, (int, float)) and not isinstance(c, bool):
            out.append(complex(c))
        elif isinstance(c, list) and len(c) == 2 and all(isinstance(v, (int, float)) for v in c):
            out.append(complex(c[0], c[1]))
        else:
            raise UsageError(f"{path}: bad coefficient {c!r}")
    return out


def _seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("BKAPPA_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise UsageError(f"BKAPPA_SEED must be an integer, got {env!r}") from exc


def cmd_roots(args) -> int:
    if (args.coeffs is None) == (args.input is None):
        raise UsageError("give exactly one of --coeffs or --input")
    coeffs = parse_coeff_list(args.coeffs) if args.coeffs is not None else load_coeff_json(args.input)
    if not all(np.isfinite(c) for c in coeffs):
        raise UsageError("coefficients must be finite")
    try:
        cfg = rootfinder.FlowConfig(
            dkappa=args.dkappa, kappa_max=args.kappa_max, perturb=not args.no_perturb,
            seed=_seed(args.seed), polish_tol=args.polish_tol, trace_stride=args.trace_stride,
            workers=args.workers,
        )
        report = rootfinder.solve(coeffs, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit_text(report.to_json() + "\n", args.out)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            rootfinder.write_trace_csv(report, cfg, fh)
    if report.partial:
        print("warning: partial solve; see diagnostics", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# ------------------------------------------------------------------ partition


def cmd_partition(args) -> int:
    N = args.N
    if N < 0 or (args.from_ is not None and args.from_ < 1):
        raise UsageError("N must be >= 0 and M >= 1")
    out: dict = {"N": N}
    try:
        if args.multiplicative:
            out["m"] = partitions.multiplicative_partitions(N)
            if args.from_ is not None:
                out["M"] = args.from_
                out["entropy_change"] = partitions.entropy_change_multiplicative(args.from_, N)
        else:
            if N > args.n_max or (args.from_ or 0) > args.n_max:
                raise UsageError(f"N exceeds --n-max {args.n_max}")
            out["p"] = partitions.partition_exact(N, args.n_max)
            if args.hrr:
                K = args.terms or partitions.hrr_terms(max(N, 1))
                value = partitions.partition_hrr(N, K) if N >= 1 else 1.0
                out.update(hrr=value, hrr_rounded=partitions.round_half_away(value), terms=K)
            if args.from_ is not None:
                out["M"] = args.from_
                out["entropy_change"] = partitions.entropy_change_additive(args.from_, N)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(json.dumps(out))
    return EXIT_OK


# -------------------------------------------------------------------- fractal


def _suffixed(path: str, n: int) -> str:
    p = Path(path)
    return str(p.with_name(f"{p.stem}_n{n}{p.suffix}"))


def _write_table(table: fractal.GridTable, fmt: str, out: str | None) -> None:
    if fmt == "binary":
        Path(out).write_bytes(table.to_bytes())
    elif out:
        with open(out, "w", newline="") as fh:
            table.write_csv(fh)
    else:
        buf = io.StringIO()
        table.write_csv(buf)
        sys.stdout.write(buf.getvalue())


def cmd_fractal(args) -> int:
    if (args.x is None) == (args.square is None):
        raise UsageError("give exactly one of --x or --square")
    if args.n is None and not args.all and args.kappa is None:
        raise UsageError("give --n, --all or --kappa")
    if args.kappa is not None and args.n is not None:
        raise UsageError("--kappa samples the embedding; use --m instead of --n")
    if args.check and not args.all:
        raise UsageError("--check needs --all")
    if args.format == "binary" and not args.out:
        raise UsageError("--format binary needs --out")
    if args.all and not args.out and not args.check:
        raise UsageError("--all writes one table per object; give --out or --check")
    try:
        mother = fractal.parse_mother(args.mother)
        grid = fractal.Grid.interval(args.x) if args.x else fractal.Grid.square(args.square)
        family = fractal.FractalFamily(args.p, args.lam, mother, args.depth)
        family.spec(0)
        if args.n is not None:
            family.spec(args.n)
        if args.kappa is not None and not 0 <= args.m < args.lam:
            raise ValueError(f"--m must lie in 0..{args.lam - 1}")
        if args.kappa is not None and not args.kappa >= 0:
            raise ValueError("--kappa must be >= 0")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    values, bad = mother.sample(grid.points())
    if bad.any() and not args.allow_nan:
        raise UsageError(f"{int(bad.sum())} grid points are singular for {mother.name}; pass --allow-nan")

    tables: list[tuple[fractal.GridTable, str | None]] = []
    if args.kappa is not None:
        src = fractal.FractalEmbedding(family, args.m, args.kappa)
        tables.append((fractal.sample_grid(src, grid, args.workers), args.out))
    if args.n is not None:
        tables.append((fractal.sample_grid(family.spec(args.n), grid, args.workers), args.out))
    if args.all and args.out:
        for n in range(args.lam):
            t = fractal.sample_grid(family.spec(n), grid, args.workers)
            tables.append((t, _suffixed(args.out, n)))
    if sum(1 for _, o in tables if o is None) and args.check:
        raise UsageError("--check prints to stdout; give --out for the table")

    for table, out in tables:
        _write_table(table, args.format, out)

    if args.check:
        pts = grid.points()
        resid = family.reconstruction_residual(pts, grid.complex_plane)
        bound = fractal.truncation_bound(values, args.p, family.digits)
        allowance = bound + 16.0 * np.finfo(float).eps * np.abs(values)
        ok_cells = ~bad
        worst = float(np.max(resid[ok_cells])) if ok_cells.any() else 0.0
        passed = bool(np.all(resid[ok_cells] <= allowance[ok_cells]))
        print(json.dumps({"max_residual": worst, "depth": family.digits, "ok": passed}))
        if not passed:
            return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------------- embed


def _kappa_grid(kmin: float, kmax: float, count: int) -> list[float]:
    return [0.0] + [float(k) for k in np.logspace(math.log10(kmin), math.log10(kmax), count)] + [math.inf]


def cmd_embed(args) -> int:
    if (args.parts is None) == (args.demo is None):
        raise UsageError("give exactly one of --parts or --demo")
    if not 0 < args.kmin < args.kmax or args.kpoints < 2:
        raise UsageError("need 0 < --kmin < --kmax and --kpoints >= 2")
    kappas = _kappa_grid(args.kmin, args.kmax, args.kpoints)
    buf = io.StringIO()

    if args.parts is not None:
        try:
            values = [float(s) for s in args.parts.split(",")]
        except ValueError as exc:
            raise UsageError(f"malformed parts {args.parts!r}") from exc
        if not all(math.isfinite(v) for v in values):
            raise UsageError("parts must be finite")
        fam = embedding.IndexedParts.from_sequence(values)
        branches = _branches(args.branches, fam.labels)
        buf.write("kappa,n,value\n")
        for k in kappas:
            for n in branches:
                buf.write(f"{_num(k)},{n},{_num(embedding.evaluate(fam, n, k))}\n")
    elif args.demo == "rke2":
        try:
            grid = fractal.Grid.interval(args.x or "-40:40:81")
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        x = grid.xs
        fam = embedding.IndexedParts({1: 5 * np.sin(x), 2: 17 * np.cos(x) + 68 - x**2 / 25})
        branches = _branches(args.branches, fam.labels)
        buf.write("kappa,n,x,value\n")
        for k in kappas:
            for n in branches:
                vals = embedding.evaluate(fam, n, k)
                for xi, v in zip(x, vals):
                    buf.write(f"{_num(k)},{n},{_num(xi)},{_num(v)}\n")
    else:
        try:
            grid = fractal.Grid.square(args.square or "-1-2i:5+3i:25")
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        X, Y = np.meshgrid(grid.xs, grid.ys)
        labels = tuple(range(len(embedding.VENN_DISKS)))
        branches = _branches(args.branches, labels)
        buf.write("kappa,n,x,y,value\n")
        for k in kappas:
            for n in branches:
                vals = embedding.venn_sum(embedding.VENN_DISKS, X, Y, k, args.kappa1, n)
                for xi, yi, v in zip(X.ravel(), Y.ravel(), np.ravel(vals)):
                    buf.write(f"{_num(k)},{n},{_num(xi)},{_num(yi)},{_num(v)}\n")
    _emit_text(buf.getvalue(), args.out)
    return EXIT_OK


def _branches(text: str | None, labels) -> list[int]:
    if text is None:
        return list(labels)
    try:
        return [int(s) for s in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"malformed branch list {text!r}") from exc


# --------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bkappa", description="B-kappa embeddings, partitions, fractal decompositions "
                 "and a global polynomial root finder.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("roots", help="all roots of a complex polynomial")
    r.add_argument("--coeffs", help='ascending coefficients, e.g. "2,-3,1" or "1+2i,0,1"')
    r.add_argument("--input", help='JSON file {"coeffs": [[re, im], ...]}')
    r.add_argument("--out", help="write the JSON report here instead of stdout")
    r.add_argument("--trace", help="write sampled paths as CSV (step,kappa,m,re,im)")
    r.add_argument("--dkappa", type=float, default=0.003)
    r.add_argument("--kappa-max", type=float, default=8.0)
    r.add_argument("--seed", type=int, default=None, help="default: $BKAPPA_SEED, else 0")
    r.add_argument("--no-perturb", action="store_true")
    r.add_argument("--polish-tol", type=float, default=1e-12)
    r.add_argument("--trace-stride", type=int, default=10)
    r.add_argument("--workers", type=int, default=1, help="threads for path tracking")
    r.set_defaults(func=cmd_roots)

    p = sub.add_parser("partition", help="partition counts and entropy changes")
    p.add_argument("N", type=int)
    p.add_argument("--hrr", action="store_true", help="also evaluate the convergent series")
    p.add_argument("--terms", type=int, default=None, help="series terms (default ceil(2 sqrt N))")
    p.add_argument("--from", dest="from_", type=int, default=None, metavar="M",
                   help="entropy change from part M to N")
    p.add_argument("--multiplicative", action="store_true")
    p.add_argument("--n-max", type=int, default=partitions.DEFAULT_N_MAX)
    p.set_defaults(func=cmd_partition)

    f = sub.add_parser("fractal", help="sample fractal objects on a grid")
    f.add_argument("--mother", required=True, help="log1p | sin | tan | poly:c0,c1,...")
    f.add_argument("--p", type=int, default=3)
    f.add_argument("--lambda", dest="lam", type=int, default=3)
    f.add_argument("--n", type=int, default=None)
    f.add_argument("--all", action="store_true", help="every object n = 0..lambda-1")
    f.add_argument("--check", action="store_true", help="verify that the objects sum to the mother function")
    f.add_argument("--depth", type=int, default=None)
    f.add_argument("--x", help="real interval a:b:n")
    f.add_argument("--square", help="complex square z0:z1:n, e.g. -2-2i:2+2i:512")
    f.add_argument("--kappa", type=float, default=None, help="sample the embedding at this kappa")
    f.add_argument("--m", type=int, default=0, help="embedding branch")
    f.add_argument("--allow-nan", action="store_true")
    f.add_argument("--format", choices=("csv", "binary"), default="csv")
    f.add_argument("--out")
    f.add_argument("--workers", type=int, default=1)
    f.set_defaults(func=cmd_fractal)

    e = sub.add_parser("embed", help="embedding curves over a log-spaced kappa grid")
    e.add_argument("--parts", help='numeric parts at labels 1.., e.g. "3,5"')
    e.add_argument("--demo", choices=("rke2", "disks"))
    e.add_argument("--branches", help="comma-separated branch labels (default: all)")
    e.add_argument("--x", help="x grid a:b:n for --demo rke2")
    e.add_argument("--square", help="grid z0:z1:n for --demo disks")
    e.add_argument("--kappa1", type=float, default=0.0, help="disk edge smoothing for --demo disks")
    e.add_argument("--kmin", type=float, default=1e-3)
    e.add_argument("--kmax", type=float, default=1e3)
    e.add_argument("--kpoints", type=int, default=25)
    e.add_argument("--out")
    e.set_defaults(func=cmd_embed)
    return ap


# options whose values often start with "-" (negative numbers, complex corners)
_SIGNED_VALUE_OPTS = ("--coeffs", "--parts", "--x", "--square")


def _glue_signed_values(argv: list[str]) -> list[str]:
    out = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in _SIGNED_VALUE_OPTS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_signed_values(argv))
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"bkappa {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # reader went away (e.g. piped into head); stop quietly
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return EXIT_OK
    except OSError as exc:
        print(f"bkappa {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
