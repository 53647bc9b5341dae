"""Benchmark harness: run solver variants on the built-in problems and tabulate the results."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

from .baselines import MmParams, PgParams, mm_solve, pg_solve
from .discretization import Space
from .pde_problems import PROBLEMS, make_spec
from .report import ReportRow, emit_report
from .tr_driver import VARIANTS, TRConfig, solve

ALL_VARIANTS = ("pg", "mm") + tuple(VARIANTS)
H01_VARIANTS = ("mm", "tr-mm-spg", "tr-nc-mm-spg")

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 2, 3


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem: str = "poisson"
    space: str = "l2"
    constrained: bool = True
    p: float = 0.5
    n: int = 64
    variant: str = "tr-mm-spg"
    tau0: float = 1e-4
    max_iter: int = 1000
    seed: int = 0  # accepted for reproducible suites; the solvers are deterministic

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise UsageError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEMS)}")
        if self.space not in ("l2", "h01"):
            raise UsageError("space must be l2 or h01")
        if self.variant not in ALL_VARIANTS:
            raise UsageError(f"unknown variant {self.variant!r}; choose from {', '.join(ALL_VARIANTS)}")
        if self.space == "h01" and self.variant not in H01_VARIANTS:
            raise UsageError(f"variant {self.variant} needs L2 controls; "
                             f"in h01 use one of {', '.join(H01_VARIANTS)}")
        if not 0 < self.p < 1:
            raise UsageError("p must lie in (0, 1)")
        if self.n < 2:
            raise UsageError("n must be at least 2")
        if self.tau0 <= 0 or self.max_iter < 0:
            raise UsageError("tau0 must be positive and max_iter nonnegative")


@dataclass(frozen=True, eq=False)
class RunOutcome:
    config: RunConfig
    row: ReportRow
    converged: bool


def run(config: RunConfig) -> RunOutcome:
    config.validate()
    spec = make_spec(config.problem, config.n, config.p, Space(config.space), config.constrained)
    if config.variant == "pg":
        res = pg_solve(spec, PgParams(max_iter=config.max_iter))
    elif config.variant == "mm":
        res = mm_solve(spec, MmParams(max_outer=max(config.max_iter, 1)))
    else:
        res = solve(spec, TRConfig.for_variant(config.variant, tau0=config.tau0,
                                               max_outer=config.max_iter))
    return RunOutcome(config, res.row, res.converged)


_BOOL = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}


def parse_suite(text: str, base: RunConfig = RunConfig()) -> list[RunConfig]:
    """One run per nonblank line, written as ``key=value`` pairs; ``#`` starts a comment."""
    types = {f.name: f.type for f in fields(RunConfig)}
    configs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        kw = {}
        for tok in line.split():
            key, sep, val = tok.partition("=")
            key = key.replace("-", "_")
            if not sep or key not in types:
                raise UsageError(f"line {lineno}: bad entry {tok!r}")
            try:
                if key == "constrained":
                    kw[key] = _BOOL[val.lower()]
                elif types[key] in ("int", int):
                    kw[key] = int(val)
                elif types[key] in ("float", float):
                    kw[key] = float(val)
                else:
                    kw[key] = val
            except (KeyError, ValueError):
                raise UsageError(f"line {lineno}: bad value in {tok!r}") from None
        cfg = replace(base, **kw)
        cfg.validate()
        configs.append(cfg)
    if not configs:
        raise UsageError("suite file lists no runs")
    return configs


def run_all(configs: list[RunConfig], jobs: int = 1) -> list[RunOutcome]:
    if jobs <= 1 or len(configs) == 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, configs))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lptrust-bench",
        description="Compare trust-region and baseline solvers on L^p-regularized control problems.")
    ap.add_argument("--problem", choices=PROBLEMS, default="poisson")
    ap.add_argument("--space", choices=("l2", "h01"), default="l2")
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--n", type=int, default=64, help="interior grid nodes per axis")
    ap.add_argument("--variant", action="append", choices=ALL_VARIANTS,
                    help="solver variant; repeat to compare several (default tr-mm-spg)")
    ap.add_argument("--tau0", type=float, default=1e-4)
    ap.add_argument("--max-iter", type=int, default=1000)
    box = ap.add_mutually_exclusive_group()
    box.add_argument("--constrained", dest="constrained", action="store_true", default=None,
                     help="impose the problem's box bounds (default in l2; h01 is always unconstrained)")
    box.add_argument("--unconstrained", dest="constrained", action="store_false")
    ap.add_argument("--suite", metavar="FILE", help="key=value run list, one run per line")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", metavar="FILE", help="write the table here instead of stdout")
    ap.add_argument("--format", choices=("csv", "markdown"), default="csv")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    constrained = args.constrained if args.constrained is not None else args.space == "l2"
    base = RunConfig(problem=args.problem, space=args.space, constrained=constrained, p=args.p,
                     n=args.n, tau0=args.tau0, max_iter=args.max_iter)
    try:
        if args.suite:
            with open(args.suite, encoding="utf-8") as fh:
                configs = parse_suite(fh.read(), base)
        else:
            configs = [replace(base, variant=v) for v in (args.variant or ["tr-mm-spg"])]
            for c in configs:
                c.validate()
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    outcomes = run_all(configs, args.jobs)
    text = emit_report([o.row for o in outcomes], args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for o in outcomes:
        if not o.converged:
            print(f"warning: {o.config.variant} on {o.config.problem} did not converge",
                  file=sys.stderr)
    return EXIT_OK if all(o.converged for o in outcomes) else EXIT_NONCONVERGED


if __name__ == "__main__":
    raise SystemExit(main())
