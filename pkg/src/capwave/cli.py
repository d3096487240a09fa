"""Command-line front end.

Every command writes a plain-text log of ``key = value`` lines. Rationals
are printed exactly, followed by a float rendering that is informative only.
The exit status is 0 exactly when the command's main check passed.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

from gmpy2 import mpq

from . import certify, galerkin, io
from .acal import PrecisionPolicy, assemble_atilde, invert_and_rationalize, residual_norm
from .errors import CapwaveError
from .fourier import Frequency, NormWeights, format_rational, parse_rational, to_rational
from .parallel import default_jobs

COMMANDS = ("verify", "build-acal", "find", "sweep", "distinct", "oracle")


@dataclass
class RunConfig:
    command: str
    jobs: int = 1
    out: Path | None = None
    log: Path | None = None
    params: dict = field(default_factory=dict)
    inputs: list = field(default_factory=list)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.jobs < 1:
            raise ValueError("worker count must be at least 1")
        for p in self.inputs:
            if not Path(p).exists():
                raise FileNotFoundError(p)


class Log:
    def __init__(self, stream: TextIO):
        self.stream = stream

    def section(self, title: str):
        self.stream.write(f"\n[{title}]\n")

    def kv(self, key: str, value):
        if isinstance(value, type(mpq())):
            self.stream.write(f"{key} = {format_rational(value)}\n")
            self.stream.write(f"{key}_float = {float(value):.16g}\n")
        else:
            self.stream.write(f"{key} = {value}\n")

    def text(self, line: str):
        self.stream.write(line.rstrip("\n") + "\n")


def _rational_arg(text: str) -> mpq:
    try:
        return parse_rational(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _log_report(log: Log, report, outcome=None):
    log.section("bounds")
    log.kv("norm_u0", report.norm_u0)
    log.kv("bound_A", report.bound_A)
    log.kv("bound_A_argmax", report.A_arg)
    log.kv("bound_H0", report.bound_H0)
    log.kv("norm_N0", report.norm_N0)
    log.kv("bound_Linv", report.bound_Linv)
    h = report.h0
    log.section("H0 components")
    log.kv("mu", report.trunc.mu if report.trunc else None)
    log.kv("mtilde", h.Mtilde)
    log.kv("ntilde", h.Ntilde)
    log.kv("C", h.C)
    log.kv("inner_max", h.inner_max)
    log.kv("inner_argmax", h.inner_arg)
    log.kv("outer_max", h.outer_max)
    log.kv("outer_argmax", h.outer_arg)
    log.kv("tail_tau", h.tail_tau)
    log.kv("tail_x", h.tail_x)
    log.kv("outer_columns", h.outer_columns)
    log.kv("outer_columns_exact", h.exact_columns)
    if outcome is not None:
        log.section("inequalities")
        log.kv("K0", outcome.K0)
        log.kv("delta", outcome.delta)
        log.kv("lhs_contraction", outcome.lhs_contraction)
        log.kv("contraction_holds", outcome.lhs_contraction < outcome.K0 < 1)
        log.kv("n0_bound", (1 - outcome.K0) * outcome.delta)
        log.kv("n0_holds", report.norm_N0 < (1 - outcome.K0) * outcome.delta)
        log.kv("epsilon", outcome.epsilon)
        log.kv("epsilon_decimal", outcome.epsilon_text + "  (non-normative)")
        log.kv("accepted", outcome.accepted)
        if outcome.failure_reason:
            log.kv("failure_reason", outcome.failure_reason)


def cmd_verify(cfg: RunConfig, log: Log) -> int:
    cert = certify.load_certificate(cfg.params["manifest"])
    log.kv("label", cert.label)
    log.kv("omega", cert.freq.omega)
    log.kv("M", cert.trunc.M)
    log.kv("N", cert.trunc.N)
    log.kv("rho_tau", cert.weights.rho_tau)
    log.kv("rho_x", cert.weights.rho_x)
    log.kv("jobs", cfg.jobs)
    t0 = time.perf_counter()
    outcome = certify.verify(cert, jobs=cfg.jobs)
    _log_report(log, outcome.report, outcome)
    if not outcome.accepted:
        sugg = certify.suggest_constants(outcome.report)
        log.section("suggested constants")
        if sugg.feasible:
            log.kv("suggested_K0", sugg.K0)
            log.kv("suggested_delta", sugg.delta)
        else:
            log.kv("infeasible", sugg.constraint)
            log.kv("detail", sugg.detail)
    log.kv("seconds", f"{time.perf_counter() - t0:.1f}")
    return 0 if outcome.accepted else 1


def cmd_build_acal(cfg: RunConfig, log: Log) -> int:
    p = cfg.params
    u0 = io.read_grid(p["u0"])
    freq = Frequency.from_omega(p["omega"])
    policy = PrecisionPolicy(p["digits"], p["max_denom"])
    w = NormWeights.default()
    atilde = assemble_atilde(u0, freq, p["mu"])
    acal = invert_and_rationalize(atilde, policy)
    io.write_matrix(acal, cfg.out)
    log.kv("omega", freq.omega)
    log.kv("mu", p["mu"])
    log.kv("digits", policy.digits)
    log.kv("max_denominator", policy.max_denominator)
    log.kv("residual_norm", residual_norm(acal, atilde, w))
    log.kv("out", cfg.out)
    return 0


def cmd_find(cfg: RunConfig, log: Log) -> int:
    p = cfg.params
    M = p["trunc"]
    omega = p["omega"]
    if p.get("seed"):
        seed = galerkin.FloatGrid.from_coeffs(io.read_grid(p["seed"])).resized(M, M)
    else:
        seed = galerkin.trunk_seed(M, M, omega)
    bp = galerkin.newton_solve(seed, omega, tol=p["tol"], max_iter=p["max_iter"])
    grid = galerkin.rationalize_candidate(bp, p["max_denom"])
    io.write_grid(grid, cfg.out)
    log.kv("omega", to_rational(omega))
    log.kv("trunc", M)
    log.kv("newton_residual", f"{bp.newton_residual:.3e}")
    log.kv("norm_float", f"{bp.norm:.12g}")
    log.kv("out", cfg.out)
    return 0


def cmd_sweep(cfg: RunConfig, log: Log) -> int:
    p = cfg.params
    res = galerkin.sweep(p["omega_lo"], p["omega_hi"], p["steps"], p["trunc"],
                         tol=p["tol"], jobs=cfg.jobs)
    table = galerkin.format_sweep_table(res.points)
    if cfg.out:
        Path(cfg.out).write_text(table, encoding="utf-8")
    else:
        log.text(table)
    log.kv("points", len(res.points))
    log.kv("gaps", len(res.gaps))
    return 0 if res.points else 1


def cmd_distinct(cfg: RunConfig, log: Log) -> int:
    certs = [certify.load_certificate(m) for m in cfg.params["manifests"]]
    w = certs[0].weights
    if cfg.params.get("epsilons"):
        eps = [to_rational(e) for e in cfg.params["epsilons"]]
    else:
        eps = []
        for c in certs:
            out = certify.verify(c, jobs=cfg.jobs)
            log.kv(f"{c.label}.accepted", out.accepted)
            if not out.accepted:
                log.kv("failure_reason", f"{c.label}: {out.failure_reason}")
                return 1
            eps.append(out.epsilon)
    rep = certify.pairwise_distinct([c.u0 for c in certs], eps, w)
    for pc in rep.pairs:
        a, b = certs[pc.i].label, certs[pc.j].label
        log.kv(f"{a}|{b}.norm_sum", pc.norm_sum)
        log.kv(f"{a}|{b}.norm_diff", pc.norm_diff)
        log.kv(f"{a}|{b}.eps_sum", pc.eps_sum)
        log.kv(f"{a}|{b}.margin", pc.margin)
        log.kv(f"{a}|{b}.distinct", pc.distinct)
    log.kv("all_distinct", rep.all_distinct)
    return 0 if rep.all_distinct else 1


def cmd_oracle(cfg: RunConfig, log: Log) -> int:
    from . import oracle

    suite = cfg.params["suite"]
    if suite == "convolution":
        failures = oracle.convolution_suite(cfg.params["count"], seed=cfg.params["seed"])
    elif suite == "h0":
        failures = oracle.h0_suite(cfg.params["count"], seed=cfg.params["seed"])
    else:
        log.kv("error", f"unknown suite {suite!r}")
        return 2
    log.kv("suite", suite)
    log.kv("cases", cfg.params["count"])
    log.kv("failures", len(failures))
    for f in failures:
        log.text(f"failure: {f}")
    return 0 if not failures else 1


HANDLERS = {
    "verify": cmd_verify,
    "build-acal": cmd_build_acal,
    "find": cmd_find,
    "sweep": cmd_sweep,
    "distinct": cmd_distinct,
    "oracle": cmd_oracle,
}


def run(cfg: RunConfig, stream: TextIO | None = None) -> int:
    stream = stream or sys.stdout
    log = Log(stream)
    log.kv("command", cfg.command)
    try:
        return HANDLERS[cfg.command](cfg, log)
    except CapwaveError as exc:
        log.kv("error", f"{type(exc).__name__}: {exc}")
        return 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="capwave", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def jobs(p):
        p.add_argument("--jobs", type=int, default=default_jobs(), help="worker processes")

    p = sub.add_parser("verify", help="check a certificate manifest")
    p.add_argument("--manifest", type=Path, required=True)
    jobs(p)

    p = sub.add_parser("build-acal", help="construct the approximate inverse block")
    p.add_argument("--u0", type=Path, required=True)
    p.add_argument("--omega", type=_rational_arg, required=True)
    p.add_argument("--mu", type=int, required=True)
    p.add_argument("--digits", type=int, default=64)
    p.add_argument("--max-denom", type=int, default=10**12)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("find", help="Newton solve and rationalize a candidate")
    p.add_argument("--omega", type=_rational_arg, required=True)
    p.add_argument("--trunc", type=int, required=True)
    p.add_argument("--seed", type=Path)
    p.add_argument("--tol", type=float, default=1e-25)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--max-denom", type=int, default=10**12)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("sweep", help="continue solution families in omega")
    p.add_argument("--omega-lo", type=_rational_arg, required=True)
    p.add_argument("--omega-hi", type=_rational_arg, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--trunc", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", type=Path)
    jobs(p)

    p = sub.add_parser("distinct", help="pairwise separation of certified solutions")
    p.add_argument("--manifests", type=Path, nargs="+", required=True)
    p.add_argument("--epsilons", type=_rational_arg, nargs="+",
                   help="use these radii instead of re-verifying")
    jobs(p)

    p = sub.add_parser("oracle", help="run a brute-force cross-check suite")
    p.add_argument("--suite", choices=("convolution", "h0"), default="convolution")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed", type=int, default=2024)
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "jobs", "out", "verbose")}
    inputs = [v for k, v in params.items() if k in ("manifest", "u0", "seed") and isinstance(v, Path)]
    inputs += list(params.get("manifests") or [])
    return RunConfig(args.command, getattr(args, "jobs", 1), getattr(args, "out", None),
                     params=params, inputs=inputs)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error = {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
