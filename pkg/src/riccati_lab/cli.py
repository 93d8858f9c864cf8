"""``riccati-lab`` command line: construct, verify, star, fuzz.

Exit status: 0 success, 1 usage or parse error, 2 guard or domain failure,
3 tolerance failure, 4 metric signature violation.  Errors are reported as one
``ERROR <code> <detail>`` line on stderr.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import astro, errors
from .calculus import from_expr
from .cases import CASE_MANIFEST, CONSTANT_NAMES, CaseSpec, condition_sides, construct, seed_relation_check
from .checks import CaseCheck, Tolerances, case_rng, check_case, random_spec
from .riccati import GUARD_RADIUS, TOL_COND, TOL_RES, integrate_numeric, sup_residual

EXIT_OK, EXIT_USAGE, EXIT_GUARD, EXIT_TOLERANCE, EXIT_SIGNATURE = 0, 1, 2, 3, 4

_EXIT_BY_ERROR = (
    (errors.MetricSignatureViolation, EXIT_SIGNATURE),
    ((errors.ExprSyntaxError, errors.UnknownIdentifier, errors.SpecError), EXIT_USAGE),
    ((errors.ToleranceNotMet, errors.ConditionResidualTooLarge, errors.ParticularNotASolution,
      errors.NotASolution), EXIT_TOLERANCE),
    (errors.RiccatiLabError, EXIT_GUARD),
)

TOL_ORACLE = 1e-6
TOL_POLE = 1e-3
CSV_GRID = 257


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_text(path: Path, lines: Sequence[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# configuration ----------------------------------------------------------------------

@dataclass
class RunConfig:
    subcommand: str
    case: Optional[int] = None
    exprs: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    branch: Optional[int] = None
    interval: tuple = (0.0, 1.0)
    x0: Optional[float] = None
    tol_quad: Optional[float] = None
    tol_cond: float = TOL_COND
    tol_res: float = TOL_RES
    out: Path = Path(".")
    seed: int = 0

    def spec(self) -> CaseSpec:
        """Build the case spec after checking the inputs against the case manifest."""
        entry = CASE_MANIFEST[self.case]
        allowed = set(entry["free"]) | {"f"}
        given = {k for k, v in self.exprs.items() if v is not None}
        extra = sorted(given - allowed)
        missing = sorted(allowed - given)
        if extra:
            raise errors.SpecError(f"case {self.case} does not take --{' --'.join(extra)}")
        if missing:
            raise errors.SpecError(f"case {self.case} needs --{' --'.join(missing)}")
        bad_c = sorted(k for k in self.constants if k not in entry["constants"])
        if bad_c:
            raise errors.SpecError(f"case {self.case} does not take --{' --'.join(bad_c)}")
        if self.branch is not None and not entry["branch"]:
            raise errors.SpecError(f"case {self.case} has no branch sign")
        coeffs = {k: self.exprs[k] for k in entry["free"]}
        return CaseSpec.from_exprs(self.case, self.interval, f=self.exprs["f"], branch=self.branch,
                                   x0=self.x0, constants=self.constants, **coeffs)


def _branch(text: str) -> int:
    table = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1}
    if text not in table:
        raise argparse.ArgumentTypeError("branch must be + or -")
    return table[text]


def _case_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--case", type=int, choices=range(1, 11), required=required, metavar="1..10")
    for name in ("a", "b", "c", "f"):
        p.add_argument(f"--{name}", metavar="EXPR")
    for name in CONSTANT_NAMES:
        p.add_argument(f"--{name}", type=float, metavar="VALUE")
    p.add_argument("--branch", type=_branch, metavar="+|-")
    p.add_argument("--interval", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--x0", type=float)


def _common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol-quad", type=float)
    p.add_argument("--tol-cond", type=float, default=TOL_COND)
    p.add_argument("--tol-res", type=float, default=TOL_RES)
    p.add_argument("--out", type=Path, default=Path("."))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riccati-lab", description="Integrable Riccati constructions and checks.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("construct", help="complete a case and tabulate its family")
    _case_args(p)
    _common_args(p)
    p.add_argument("--Cs", type=float, nargs="*", default=[], metavar="C",
                   help="family constants to tabulate")

    p = sub.add_parser("verify", help="compare a family member with the numerical oracle")
    _case_args(p)
    _common_args(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--C", type=float, help="family constant (default 2)")
    g.add_argument("--y0", type=float, help="initial value at x0 instead of C")
    p.add_argument("--rk-rtol", type=float, default=1e-12)
    p.add_argument("--rk-atol", type=float, default=1e-14)
    p.add_argument("--tol-oracle", type=float, default=TOL_ORACLE)

    p = sub.add_parser("star", help="stellar profile and physicality verdicts")
    p.add_argument("--eta", required=True, metavar="EXPR")
    p.add_argument("--delta", metavar="EXPR")
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--A0", type=float, default=1.0)
    p.add_argument("--u", metavar="EXPR", help="solution of the metric equation, given directly")
    p.add_argument("--case", type=int, choices=range(1, 11), metavar="1..10")
    p.add_argument("--f", metavar="EXPR")
    for name in CONSTANT_NAMES:
        p.add_argument(f"--{name}", type=float, metavar="VALUE")
    p.add_argument("--branch", type=_branch, metavar="+|-")
    p.add_argument("--C", type=float, help="family constant (default: particular solution)")
    _common_args(p)

    p = sub.add_parser("fuzz", help="random specs per case with the full residual battery")
    p.add_argument("--case", default="all", help="case number or 'all'")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("."))
    return parser


def _config(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(ns.subcommand, out=ns.out)
    if ns.subcommand in ("construct", "verify"):
        lo, hi = ns.interval
        if not lo < hi:
            raise UsageError(f"--interval needs LO < HI, got {lo} {hi}")
        cfg.case = ns.case
        cfg.exprs = {k: getattr(ns, k) for k in ("a", "b", "c", "f")}
        cfg.constants = {k: getattr(ns, k) for k in CONSTANT_NAMES if getattr(ns, k) is not None}
        cfg.branch = ns.branch
        cfg.interval = (lo, hi)
        cfg.x0 = ns.x0
    if hasattr(ns, "tol_quad"):
        cfg.tol_quad, cfg.tol_cond, cfg.tol_res = ns.tol_quad, ns.tol_cond, ns.tol_res
    if ns.subcommand == "fuzz":
        cfg.seed = ns.seed
    return cfg


# subcommands ------------------------------------------------------------------------

def cmd_construct(cfg: RunConfig, Cs: Sequence[float]) -> int:
    spec = cfg.spec()
    cc = construct(spec, cfg.tol_quad, cfg.tol_cond, cfg.tol_res)
    p = cc.problem
    xs = np.linspace(*spec.interval, CSV_GRID)
    lhs, rhs = condition_sides(cc, xs)
    cols = [xs, p.a(xs), p.b(xs), p.c(xs), cc.y_p(xs), lhs, rhs]
    header = ["x", "a", "b", "c", "y_p", "condition_lhs", "condition_rhs"]
    with np.errstate(all="ignore"):
        for C in Cs:
            header.append(f"y_C={_fmt(C)}")
            cols.append(cc.general.member(C)(xs))
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "case.csv", header, zip(*cols))

    seed = seed_relation_check(cc)
    part = sup_residual(p, cc.y_p, p.grid())
    lines = [
        f"CASE {spec.case}",
        f"COMPLETES {spec.completes}",
        f"FAMILY_CONSTANT {spec.family_constant}",
        f"CONDITION_RESIDUAL {_fmt(cc.condition_residual)}",
        f"SEED_RESIDUAL {_fmt(seed)}",
        f"PARTICULAR_RESIDUAL {_fmt(part)}",
    ]
    failed = part > cfg.tol_res
    for C in Cs:
        poles = cc.general.poles(C)
        fam_res = sup_residual(p, cc.general.member(C), cc.general.safe_grid(C))
        failed |= fam_res > cfg.tol_res
        lines.append(f"C {_fmt(C)} FAMILY_RESIDUAL {_fmt(fam_res)} POLES {len(poles)}"
                     + "".join(f" {_fmt(q)}" for q in poles))
    lines.append("STATUS " + ("FAIL" if failed else "OK"))
    _write_text(cfg.out / "report.txt", lines)
    if failed:
        _emit("ToleranceFailure", "residual above tolerance; see report.txt")
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_verify(cfg: RunConfig, C: Optional[float], y0: Optional[float], rk_rtol: float,
               rk_atol: float, tol_oracle: float) -> int:
    spec = cfg.spec()
    cc = construct(spec, cfg.tol_quad, cfg.tol_cond, cfg.tol_res)
    fam, p, x0 = cc.general, cc.problem, spec.x0
    if y0 is not None:
        C = fam.match_constant(x0, y0)
    elif C is None:
        C = 2.0
    y_start = float(fam(C, x0))
    poles = fam.poles(C)
    xs_all, ys_all, stops = [], [], []
    lo, hi = spec.interval
    for direction, end in ((-1, lo), (1, hi)):
        if end == x0:
            continue
        tr = integrate_numeric(p, x0, y_start, direction, end, rtol=rk_rtol, atol=rk_atol)
        xs_all.append(tr.x)
        ys_all.append(tr.y)
        ahead = [q for q in poles if (q - x0) * direction > 0]
        first = min(ahead, key=lambda q: abs(q - x0)) if ahead else None
        stops.append((tr.reason, tr.pole_x, first))
    x = np.concatenate(xs_all)
    y = np.concatenate(ys_all)
    x, idx = np.unique(x, return_index=True)
    y = y[idx]
    keep = np.ones(x.shape, bool)
    for q in poles:
        keep &= np.abs(x - q) > GUARD_RADIUS
    x, y = x[keep], y[keep]
    cf = np.asarray(fam(C, x), dtype=float)
    abs_err = np.abs(cf - y)
    rel_err = abs_err / np.maximum(1.0, np.abs(y))
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "verify.csv", ["x", "closed_form", "rk_oracle", "abs_err", "rel_err"],
              zip(x, cf, y, abs_err, rel_err))

    fam_res = sup_residual(p, fam.member(C), fam.safe_grid(C))
    sup_rel = float(rel_err.max()) if rel_err.size else math.nan
    ok = fam_res <= cfg.tol_res and (rel_err.size == 0 or sup_rel <= tol_oracle)
    lines = [
        f"CASE {spec.case}",
        f"C {_fmt(C)}",
        f"Y0 {_fmt(y_start)}",
        f"FAMILY_RESIDUAL {_fmt(fam_res)}",
        f"SUP_ABS_ERR {_fmt(abs_err.max() if abs_err.size else math.nan)}",
        f"SUP_REL_ERR {_fmt(sup_rel)}",
        f"POINTS {x.size}",
        f"POLES {len(poles)}",
    ]
    for q in poles:
        lines.append(f"POLE {_fmt(q)} BRACKET {_fmt(q - GUARD_RADIUS)} {_fmt(q + GUARD_RADIUS)}")
    for reason, stop, first in stops:
        if reason == "pole-detected":
            gap = abs(first - stop) if first is not None else math.inf
            ok &= gap <= TOL_POLE
            lines.append(f"ORACLE_BLOWUP {_fmt(stop)} GAP {_fmt(gap)}")
        elif reason == "step-failure":
            ok = False
            lines.append("ORACLE_STEP_FAILURE")
    lines.append("STATUS " + ("OK" if ok else "FAIL"))
    _write_text(cfg.out / "summary.txt", lines)
    if not ok:
        _emit("ToleranceFailure", f"oracle comparison failed (sup rel err {sup_rel:.3e})")
        return EXIT_TOLERANCE
    return EXIT_OK


_PLOT = """set datafile separator ","
set key autotitle columnhead
set xlabel "r"
set terminal pngcairo size 900,600
set output "profile.png"
plot "profile.csv" using 1:6 with lines title "rho", \\
     "profile.csv" using 1:7 with lines title "p_r", \\
     "profile.csv" using 1:8 with lines title "p_perp"
"""


def cmd_star(ns: argparse.Namespace, cfg: RunConfig) -> int:
    if (ns.u is None) == (ns.case is None):
        raise UsageError("star needs exactly one of --u or --case")
    consts = {k: getattr(ns, k) for k in CONSTANT_NAMES if getattr(ns, k) is not None}
    if ns.u is not None:
        if ns.f is not None or consts or ns.branch is not None or ns.C is not None:
            raise UsageError("--f, constants, --branch and --C go with --case, not --u")
        model = astro.StellarModel.from_exprs(ns.eta, "0" if ns.delta is None else ns.delta, ns.R, ns.A0)
        u = from_expr(ns.u, model.domain)
    else:
        if ns.f is None:
            raise UsageError("--case needs --f")
        entry = CASE_MANIFEST[ns.case]
        bad = sorted(set(consts) - set(entry["constants"]))
        if bad:
            raise errors.SpecError(f"case {ns.case} does not take --{' --'.join(bad)}")
        sol = astro.solve_with_case(ns.eta, ns.R, ns.case, ns.f, delta=ns.delta, A0=ns.A0,
                                    constants=consts, branch=ns.branch, C=ns.C,
                                    tol_res=cfg.tol_res, tol_quad=cfg.tol_quad)
        model, u = sol.model, sol.u
    prof = astro.profile(model, u, tol_res=cfg.tol_res, tol_quad=cfg.tol_quad)
    report = astro.physicality_report(prof)
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "profile.csv", "w", newline="\n") as fh:
        fh.write(astro.profile_csv(prof))
    with open(cfg.out / "physicality.txt", "w", newline="\n") as fh:
        fh.write(report.to_text())
        fh.write(f"REQUIRED_A0 {_fmt(report.required_A0)}\n")
        fh.write(f"MASS_ROUNDTRIP {_fmt(prof.mass_roundtrip())}\n")
    with open(cfg.out / "plot.gp", "w", newline="\n") as fh:
        fh.write(_PLOT)
    return EXIT_OK


FUZZ_HEADER = ("case", "index", "digest") + CaseCheck.METRICS + ("pass",)


def cmd_fuzz(cfg: RunConfig, which: str, n: int) -> int:
    if which == "all":
        cases = list(range(1, 11))
    else:
        try:
            cases = [int(which)]
        except ValueError:
            raise UsageError(f"--case must be 1..10 or all, got {which!r}") from None
        if cases[0] not in CASE_MANIFEST:
            raise UsageError(f"--case must be 1..10 or all, got {which!r}")
    if n < 0:
        raise UsageError("--n must be non-negative")
    rows, failed = [], 0
    tol = Tolerances()
    for case in cases:
        rng = case_rng(cfg.seed, case)
        for i in range(n):
            try:
                _, cc = random_spec(case, rng)
            except RuntimeError as exc:
                _emit("FuzzGeneration", str(exc))
                return EXIT_TOLERANCE
            res = check_case(cc, rng)
            passed = res.passed(tol)
            failed += not passed
            if res.error:
                _emit(res.error.split(":")[0], f"case {case} spec {res.digest}: {res.error}")
            rows.append([str(case), str(i), res.digest] + [getattr(res, m) for m in CaseCheck.METRICS]
                        + ["1" if passed else "0"])
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "fuzz.csv", FUZZ_HEADER, rows)
    if failed:
        _emit("ToleranceFailure", f"{failed} of {len(rows)} specs failed; see fuzz.csv")
        return EXIT_TOLERANCE
    return EXIT_OK


# entry point ------------------------------------------------------------------------

def _emit(code: str, detail: str) -> None:
    detail = " ".join(str(detail).split())
    print(f"ERROR {code} {detail}", file=sys.stderr)


def _exit_code(exc: errors.RiccatiLabError) -> int:
    for kinds, code in _EXIT_BY_ERROR:
        if isinstance(exc, kinds):
            return code
    return EXIT_GUARD


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        cfg = _config(ns)
        if ns.subcommand == "construct":
            return cmd_construct(cfg, ns.Cs)
        if ns.subcommand == "verify":
            return cmd_verify(cfg, ns.C, ns.y0, ns.rk_rtol, ns.rk_atol, ns.tol_oracle)
        if ns.subcommand == "star":
            return cmd_star(ns, cfg)
        return cmd_fuzz(cfg, ns.case, ns.n)
    except UsageError as exc:
        _emit("Usage", exc)
        return EXIT_USAGE
    except errors.RiccatiLabError as exc:
        _emit(exc.code, exc)
        return _exit_code(exc)
    except OSError as exc:
        _emit("IOError", exc)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
