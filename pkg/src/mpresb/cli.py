"""Command-line entry point: ``mpresb-bench {table,spectrum,export}``."""

import argparse
import logging
import re
import sys
from fractions import Fraction
from pathlib import Path

from .bench import SPECTRUM_TARGETS, RunConfig, export_problem, run_spectrum, run_table
from .errors import ContractError
from .precond import KINDS


def parse_h(text: str) -> float:
    """Accept ``2^-5``, ``2**-5``, ``1/32`` or ``0.03125``."""
    t = text.strip()
    m = re.fullmatch(r"2\s*(?:\^|\*\*)\s*(-?\d+)", t)
    if m:
        return 2.0 ** int(m.group(1))
    try:
        return float(Fraction(t))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"cannot parse mesh width {text!r}") from None


def _common(p):
    p.add_argument("--dim", type=int, choices=(2, 3), default=2)
    p.add_argument("--h", type=parse_h, default=2.0**-5, help="mesh width, e.g. 2^-5")
    p.add_argument("--nu", type=float, action="append", help="regularization (repeatable)")
    p.add_argument("--omega", type=float, action="append", help="frequency (repeatable)")
    p.add_argument("--precond", action="append", choices=KINDS, help="preconditioner (repeatable)")
    p.add_argument("--restart", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--maxit", type=int, default=1000)
    p.add_argument("--inner", choices=("direct", "cg"), default="direct",
                   help="inner solver: sparse factorization or Krylov")
    p.add_argument("--inner-tol", type=float, default=1e-12)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpresb-bench",
        description="GMRES iteration tables, spectra and problem export for "
                    "MPRESB, PRESB, BD and BAS preconditioners.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("table", help="run a preconditioner x (nu, omega) grid"))
    sp = sub.add_parser("spectrum", help="eigenvalue scatter of a preconditioned matrix")
    _common(sp)
    sp.add_argument("--target", choices=SPECTRUM_TARGETS, default="RinvQ")
    _common(sub.add_parser("export", help="write M, K, b as Matrix Market files"))
    return parser


def _config(args) -> RunConfig:
    kw = dict(
        dim=args.dim, h=args.h, restart=args.restart, tol=args.tol, maxit=args.maxit,
        inner_mode="direct" if args.inner == "direct" else "iterative",
        inner_tol=args.inner_tol, output_dir=args.out,
    )
    if args.nu:
        kw["nu_list"] = args.nu
    if args.omega:
        kw["omega_list"] = args.omega
    if args.precond:
        kw["preconditioners"] = args.precond
    return RunConfig(**kw)


def _subdir(base: Path, nu, omega) -> Path:
    return base / f"nu={nu:g}_omega={omega:g}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _config(args)
        if args.command == "table":
            rows = run_table(config)
            print((config.output_dir / "table.md").read_text(), end="")
            return 0 if all(r.status != "ERROR" for r in rows) else 1
        grid = [(nu, om) for nu in config.nu_list for om in config.omega_list]
        for nu, om in grid:
            outdir = config.output_dir if len(grid) == 1 else _subdir(config.output_dir, nu, om)
            if args.command == "spectrum":
                single = RunConfig(**{**vars(config), "nu_list": [nu], "omega_list": [om]})
                path, line = run_spectrum(single, args.target, outdir)
                print(line)
                print(f"wrote {path}")
            else:
                paths = export_problem(config, nu, om, outdir)
                print(f"wrote {', '.join(str(p) for p in paths.values())}")
    except ContractError as exc:
        print(f"mpresb-bench: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
