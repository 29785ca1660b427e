"""Command-line front end.

Subcommands:
  estimate    run one estimator on a constraint or builtin subject
  pave        emit the inner/outer interval paving of a constraint as JSON
  bench       run a subjects x methods x budgets x repetitions grid to CSV
  make-truth  regenerate cached brute-force ground-truth fixtures

Configuration: an INI file (--config) supplies [subject], [distribution],
[estimate], [pimais], [pave] and [bench] sections; command-line flags
override file values. Exit codes: 2 configuration/parse error, 3 seeding
failure, 4 method not applicable to the subject.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
import time
from pathlib import Path

import numpy as np

from paisc import bench as benchmod
from paisc.bench import Subject, builtin_names, builtin_subject, run_method
from paisc.constraints import ConstraintAst, ParseError, parse_constraint
from paisc.distributions import (
    ChainFactor,
    FactorizedChain,
    Gaussian,
    IndependentProduct,
    IntractableCdfError,
    MultivariateGaussian,
    StudentT,
    TruncatedGaussian,
    Uniform,
)
from paisc.intervals import PAVING_ACCURACY, PAVING_MAX_BOXES, pave
from paisc.pimais import SeedingError
from paisc.rng import RngStream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SEEDING = 3
EXIT_NOT_APPLICABLE = 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Distribution / subject resolution


def _parse_univariate(parts: list[str]):
    family = parts[0].lower()
    args = parts[1:]

    def floats(n):
        if len(args) != n:
            raise ConfigError(f"{family} takes {n} parameters, got {len(args)}")
        return [float(a) for a in args]

    if family == "gaussian":
        loc, scale = floats(2)
        return Gaussian(loc, scale)
    if family == "studentt":
        dof, loc, scale = floats(3)
        return StudentT(dof, loc, scale)
    if family == "uniform":
        lo, hi = floats(2)
        return Uniform(lo, hi)
    if family in ("truncgauss", "truncatedgaussian"):
        loc, scale, lo, hi = floats(4)
        return TruncatedGaussian(loc, scale, lo, hi)
    raise ConfigError(f"unknown distribution family {family!r}")


def _parse_distribution(section: configparser.SectionProxy, var_names: tuple[str, ...]):
    if "mean" in section or "cov" in section:
        mean = [float(v) for v in section.get("mean", "").split()]
        rows = [r.strip() for r in section.get("cov", "").split(";") if r.strip()]
        cov = [[float(v) for v in row.split()] for row in rows]
        if len(mean) != len(var_names):
            raise ConfigError("mvn mean length must match the variable count")
        return MultivariateGaussian(tuple(mean), tuple(tuple(r) for r in cov))

    lines = {}
    for name in var_names:
        if name not in section:
            raise ConfigError(f"no distribution given for variable {name!r}")
        lines[name] = section[name].split()

    has_refs = any(a.startswith("@") for parts in lines.values() for a in parts)
    if not has_refs:
        return IndependentProduct(tuple(_parse_univariate(lines[n]) for n in var_names))

    factors = []
    index = {n: i for i, n in enumerate(var_names)}
    for i, name in enumerate(var_names):
        parts = lines[name]
        refs = [j for j, a in enumerate(parts) if a.startswith("@")]
        if not refs:
            factors.append(ChainFactor(_parse_univariate(parts)))
            continue
        if len(refs) > 1 or refs[0] != 1:
            raise ConfigError("only the location parameter may reference a variable")
        ref_name = parts[1][1:]
        if ref_name not in index or index[ref_name] >= i:
            raise ConfigError(
                f"factor {name!r} may only reference an earlier variable, got @{ref_name}"
            )
        resolved = parts[:1] + ["0"] + parts[2:]
        factors.append(ChainFactor(_parse_univariate(resolved), loc_ref=index[ref_name]))
    return FactorizedChain(tuple(factors))


def _resolve_subject(cfg: configparser.ConfigParser, args, need_distribution: bool = True) -> Subject:
    builtin = getattr(args, "subject", None)
    if builtin is None and cfg.has_section("subject"):
        builtin = cfg.get("subject", "builtin", fallback=None)
    if builtin:
        try:
            return builtin_subject(builtin)
        except KeyError:
            raise ConfigError(
                f"unknown builtin subject {builtin!r}; available: "
                + ", ".join(builtin_names())
            ) from None

    text = getattr(args, "constraint", None)
    if text is None and cfg.has_section("subject"):
        text = cfg.get("subject", "constraint", fallback=None)
    if not text:
        raise ConfigError("no subject: give --subject, or a constraint and domain")

    domain = getattr(args, "domain", None)
    if domain is None and cfg.has_section("subject"):
        domain = cfg.get("subject", "domain", fallback=None)
        domain_file = cfg.get("subject", "domain_file", fallback=None)
        if domain is None and domain_file:
            domain = Path(domain_file).read_text()
    elif domain is not None and Path(domain).exists():
        domain = Path(domain).read_text()
    if not domain:
        raise ConfigError("no domain declarations (--domain file or [subject] domain)")

    constraint = parse_constraint(text, domain)
    if not need_distribution:
        return Subject("custom", constraint, None, None, "unknown")
    if not cfg.has_section("distribution"):
        raise ConfigError("a [distribution] section is required for custom constraints")
    dist = _parse_distribution(cfg["distribution"], constraint.vars)
    return Subject("custom", constraint, dist, None, "unknown")


def _pimais_overrides(cfg: configparser.ConfigParser) -> dict:
    if not cfg.has_section("pimais"):
        return {}
    sec = cfg["pimais"]
    out: dict = {}
    for key in ("n_chains", "samples_per_proposal", "iterations", "warmup",
                "hmc_steps", "budget"):
        if key in sec:
            out[key] = sec.getint(key)
    for key in ("rwmh_scale", "proposal_cov_factor", "hmc_step_size"):
        if key in sec:
            out[key] = sec.getfloat(key)
    for key in ("kernel", "seed_strategy"):
        if key in sec:
            out[key] = sec.get(key)
    return out


def _load_config(path: str | None) -> configparser.ConfigParser:
    # ';' stays available as a value separator (domain/cov rows), so only '#'
    # introduces inline comments
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if path:
        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        cfg.read(path)
    return cfg


# ---------------------------------------------------------------------------
# Subcommands


def cmd_estimate(args) -> int:
    cfg = _load_config(args.config)
    subject = _resolve_subject(cfg, args)

    method = args.method or (
        cfg.get("estimate", "method", fallback="dmc") if cfg.has_section("estimate") else "dmc"
    )
    budget = args.budget or (
        cfg.getint("estimate", "budget", fallback=1_000_000)
        if cfg.has_section("estimate") else 1_000_000
    )
    seed = args.seed if args.seed is not None else (
        cfg.getint("estimate", "seed", fallback=0) if cfg.has_section("estimate") else 0
    )

    rng = RngStream(seed)
    start = time.perf_counter()
    report = run_method(subject, method, budget, rng,
                        pimais_overrides=_pimais_overrides(cfg))
    elapsed = time.perf_counter() - start

    payload = {
        "subject": subject.name,
        "method": method,
        "seed": seed,
        "budget": budget,
        "mean": report.mean,
        "variance": report.variance,
        "samples_used": report.n_samples,
        "runtime_s": elapsed,
    }
    if subject.ground_truth is not None:
        payload["ground_truth"] = subject.ground_truth
        payload["rae"] = abs(report.mean - subject.ground_truth) / subject.ground_truth
    if args.json:
        payload["trace"] = [[int(n), float(m)] for n, m in report.trace]
        text = json.dumps(payload, indent=1)
    else:
        lines = [f"subject     : {subject.name}",
                 f"method      : {method}",
                 f"mean        : {report.mean!r}",
                 f"variance    : {report.variance!r}",
                 f"samples     : {report.n_samples}",
                 f"runtime_s   : {elapsed:.3f}"]
        if "rae" in payload:
            lines.append(f"rae         : {payload['rae']!r}")
        text = "\n".join(lines)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_pave(args) -> int:
    cfg = _load_config(args.config)
    subject = _resolve_subject(cfg, args, need_distribution=False)
    accuracy = args.accuracy or (
        cfg.getfloat("pave", "accuracy", fallback=PAVING_ACCURACY)
        if cfg.has_section("pave") else PAVING_ACCURACY
    )
    max_boxes = args.max_boxes or (
        cfg.getint("pave", "max_boxes", fallback=PAVING_MAX_BOXES)
        if cfg.has_section("pave") else PAVING_MAX_BOXES
    )
    paving = pave(subject.constraint, accuracy, max_boxes)
    doc = paving.to_json_dict()
    doc["subject"] = subject.name
    doc["vars"] = list(subject.constraint.vars)
    text = json.dumps(doc, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load_config(args.config)
    sec = cfg["bench"] if cfg.has_section("bench") else {}

    subject_names = args.subjects or str(sec.get("subjects", "")).split() or None
    if not subject_names:
        raise ConfigError("bench needs --subjects (or [bench] subjects)")
    methods = args.methods or str(sec.get("methods", "")).split() or ["dmc", "sympais"]
    budgets = args.budgets or [int(v) for v in str(sec.get("budgets", "")).split()] or [100_000]
    reps = args.repetitions or int(sec.get("repetitions", 0)) or 1
    seed = args.seed if args.seed is not None else int(sec.get("seed", 0))

    subjects = []
    for name in subject_names:
        try:
            subjects.append(builtin_subject(name))
        except KeyError:
            raise ConfigError(
                f"unknown builtin subject {name!r}; available: " + ", ".join(builtin_names())
            ) from None

    rows = benchmod.run_grid(
        subjects, methods, budgets, reps, seed,
        threads=args.threads, timing=args.timing,
        pimais_overrides=_pimais_overrides(cfg),
    )
    out = args.out or "bench.csv"
    benchmod.write_csv(rows, out)

    print(f"wrote {len(rows)} rows to {out}")
    print(f"{'subject':<28} {'method':<12} median RAE")
    for subject, method, med in benchmod.summarize(rows):
        med_s = "not applicable" if med is None else repr(med)
        print(f"{subject:<28} {method:<12} {med_s}")
    return EXIT_OK


def cmd_make_truth(args) -> int:
    targets = args.targets or ["torus-independent", "torus-correlated", "relu"]
    out_dir = Path(args.out) if args.out else None
    written = benchmod.make_truth(
        targets, samples=args.samples, seed=args.seed if args.seed is not None else 20210901,
        out_dir=out_dir,
    )
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paisc",
        description="Estimate the probability that random inputs satisfy a "
                    "numeric path condition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file; flags override its values")
        p.add_argument("--seed", type=int, default=None, help="base RNG seed")
        p.add_argument("--out", help="output file (default: stdout/bench.csv)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker pool size (results are identical at any count)")

    p_est = sub.add_parser("estimate", help="estimate one constraint's probability")
    common(p_est)
    p_est.add_argument("--subject", help="builtin subject name")
    p_est.add_argument("--constraint", help="constraint text, e.g. 'x^2 + y^2 <= 1'")
    p_est.add_argument("--domain", help="domain file: one 'name lo hi' per line")
    p_est.add_argument("--method", choices=list(benchmod.METHODS), default=None)
    p_est.add_argument("--budget", type=int, default=None)
    p_est.add_argument("--json", action="store_true", help="emit a JSON report")

    p_pave = sub.add_parser("pave", help="pave a constraint into inner/outer boxes")
    common(p_pave)
    p_pave.add_argument("--subject", help="builtin subject name")
    p_pave.add_argument("--constraint")
    p_pave.add_argument("--domain")
    p_pave.add_argument("--accuracy", type=float, default=None)
    p_pave.add_argument("--max-boxes", type=int, default=None)

    p_bench = sub.add_parser("bench", help="run an experiment grid to CSV")
    common(p_bench)
    p_bench.add_argument("--subjects", nargs="+", default=None)
    p_bench.add_argument("--methods", nargs="+", choices=list(benchmod.METHODS), default=None)
    p_bench.add_argument("--budgets", nargs="+", type=int, default=None)
    p_bench.add_argument("--repetitions", type=int, default=None)
    p_bench.add_argument("--timing", action="store_true",
                         help="fill the wall_ms column (breaks byte-for-byte determinism)")

    p_truth = sub.add_parser("make-truth", help="regenerate ground-truth fixtures")
    common(p_truth)
    p_truth.add_argument("--targets", nargs="+", default=None,
                         help="subject names, or 'relu' for all patterns")
    p_truth.add_argument("--samples", type=int, default=10 ** 8)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "estimate":
            return cmd_estimate(args)
        if args.command == "pave":
            return cmd_pave(args)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "make-truth":
            return cmd_make_truth(args)
        parser.error(f"unknown command {args.command!r}")
    except IntractableCdfError as exc:
        print(f"error: method not applicable: {exc}", file=sys.stderr)
        return EXIT_NOT_APPLICABLE
    except SeedingError as exc:
        print(f"error: seeding failed: {exc}", file=sys.stderr)
        return EXIT_SEEDING
    except (ConfigError, ParseError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
