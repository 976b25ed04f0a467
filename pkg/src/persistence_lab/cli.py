"""Batch command-line front end.

Subcommands: sample, theta, constants, verify, report.  Every command is a
pure function of its flags, config file and seed; outputs are UTF-8 with LF
line endings and never record the thread count.

Exit statuses: 0 ok, 2 usage, 3 resolution check failed, 4 inconclusive,
5 check failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import DomainError, InsufficientDataError, NumericError
from .functionals import FunctionalParams
from .identities import (
    FGB_BLOCKS,
    FGB_EPS_FACTOR,
    check_bingham_supremum,
    check_fgb,
    check_kp_inequality,
    check_positivity_a1,
    check_symmetry_lemma,
    check_tauberian_tail,
    check_xi_split_symmetry,
    fgb_config,
)
from .montecarlo import MonteCarloConfig, estimate_survival, fit_exponent, run_passages, theoretical_theta
from .parallel import default_threads
from .specfun import ConstantReport, constant_reports, goldman_constant, oscillating_integral_closed, oscillating_integral_numeric
from .stable import RngStream, StableParams, sample_stable

SCHEMA_VERSION = 1
SEED_ENV = "PERSISTENCE_LAB_SEED"

EXIT_OK, EXIT_USAGE, EXIT_RESOLUTION, EXIT_INCONCLUSIVE, EXIT_FAILURE = 0, 2, 3, 4, 5

# Agreement band between a fitted and a known exponent.
THETA_TOL = 0.04

LATTICE_ALPHA = (1.2, 1.5, 1.8, 2.0)
LATTICE_CHI = (-1.0, -0.5, 0.0, 0.5, 1.0)
LATTICE_KAPPA = (0.5, 1.0, 2.0)
LATTICE_DELTA = (0.25, 0.5, 2.0 / 3.0, 1.0, 1.5, 1.75)

SUITES = ("symmetry", "fgb", "bingham", "kp", "tauberian", "positivity", "split")

# Per-check defaults for `verify`; flags and config files override them.
VERIFY_DEFAULTS = {
    "symmetry": RunConfig(alpha=1.5, kappa=1.0, chi=1.0, beta=1.0, paths=8000, steps=4096, horizon=64.0, max_blocks=16),
    "split": RunConfig(alpha=1.5, kappa=1.0, chi=1.0, beta=1.0, paths=8000, steps=4096, horizon=64.0, max_blocks=16),
    "fgb": RunConfig(alpha=2.0, beta=-1.0, paths=4000, steps=16384),
    "bingham": RunConfig(alpha=2.0, kappa=0.5, chi=0.0, paths=100_000, n=1_000_000),
    "kp": RunConfig(alpha=1.5, kappa=1.0, chi=1.0, beta=1.0, paths=16000, steps=4096, horizon=400.0),
    "tauberian": RunConfig(alpha=2.0, kappa=0.5, chi=0.0, beta=1.0, paths=20000, steps=4096, horizon=400.0),
    "positivity": RunConfig(alpha=1.5, kappa=1.0, chi=1.0, beta=1.0, paths=100_000, steps=256, horizon=1.0),
}


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ output


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _stem(out: str | None) -> str | None:
    if out is None:
        return None
    return out[:-5] if out.endswith(".json") else out


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in row])
    return buf.getvalue()


def survival_csv(est) -> str:
    rows = zip(est.t_grid, est.survivors, [est.n_paths] * len(est.t_grid), est.survival, est.stderr)
    return _csv(["t", "survivors", "n_paths", "p_hat", "stderr"], ((float(t), int(s), n, float(p), float(e)) for t, s, n, p, e in rows))


# ------------------------------------------------------------------ config


def _run_config(args) -> RunConfig:
    base = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    flags = RunConfig(**{k: getattr(args, k, None) for k in RunConfig.__dataclass_fields__})
    cfg = base.merged(flags)
    if cfg.seed is None and os.environ.get(SEED_ENV):
        try:
            cfg = cfg.merged(RunConfig(seed=int(os.environ[SEED_ENV])))
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {os.environ[SEED_ENV]!r}") from None
    return cfg


def _params(cfg: RunConfig) -> StableParams:
    if cfg.alpha is None:
        raise UsageError("--alpha is required")
    return StableParams(cfg.alpha, cfg.get("kappa", 1.0), cfg.get("chi", 0.0))


def _fparams(cfg: RunConfig) -> FunctionalParams | None:
    if cfg.beta is None:
        return None
    return FunctionalParams(cfg.beta, cfg.pv_epsilon)


def _threads(cfg: RunConfig) -> int:
    return cfg.get("threads", default_threads())


def _mc_config(cfg: RunConfig, **defaults) -> MonteCarloConfig:
    cfg = RunConfig(**defaults).merged(cfg) if defaults else cfg
    return MonteCarloConfig(
        params=_params(cfg),
        fparams=_fparams(cfg),
        level=cfg.get("level", 1.0),
        n_paths=cfg.get("paths", 10_000),
        n_steps=cfg.get("steps", 4096),
        horizon=cfg.get("horizon", 400.0),
        seed=cfg.get("seed", 0),
        bandwidth=cfg.bandwidth,
        threads=_threads(cfg),
    )


# ---------------------------------------------------------------- commands


def cmd_sample(cfg: RunConfig) -> int:
    params = _params(cfg)
    n = cfg.get("n", 1000)
    if n < 1:
        raise UsageError("--n must be >= 1")
    draws = sample_stable(params, n, RngStream(cfg.get("seed", 0), 0))
    _write(cfg.out, "".join(f"{x!r}\n" for x in draws.tolist()))
    return EXIT_OK


def theta_document(config: MonteCarloConfig, est) -> dict:
    kind = "process" if config.fparams is None else "functional"
    theory = theoretical_theta(config.params, config.fparams, kind)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "theta",
        "config": config.echo(),
        "kind": kind,
        "fit": est.fit_summary(),
        "theoretical_theta": theory,
        "exploratory": theory is None,
    }
    if theory is None:
        # Reported next to the fit for reference only; not a verification.
        doc["rho_over_2"] = config.params.rho / 2.0
        doc["agreement"] = None
    else:
        doc["agreement"] = bool(abs(est.theta_hat - theory) <= THETA_TOL)
        doc["agreement_tolerance"] = THETA_TOL
    return doc


def cmd_theta(cfg: RunConfig) -> int:
    config = _mc_config(cfg)
    sample = run_passages(config)
    raw = estimate_survival(config, sample)
    stem = _stem(cfg.out)
    try:
        est = fit_exponent(raw)
    except InsufficientDataError as exc:
        doc = theta_document(config, raw)
        doc["error"] = str(exc)
        _write(None if stem is None else stem + ".json", dumps(doc))
        return EXIT_INCONCLUSIVE
    doc = theta_document(config, est)
    doc["n_failed"] = sample.n_failed
    if stem is not None:
        _write(stem + ".csv", survival_csv(est))
        _write(stem + ".coarse.csv", survival_csv(raw.coarse))
    _write(None if stem is None else stem + ".json", dumps(doc))
    return EXIT_RESOLUTION if est.resolution_check == "failed" else EXIT_OK


def _constant_rows(cfg: RunConfig) -> list[dict]:
    rows = []

    def add(fn):
        try:
            for r in fn():
                rows.append({**r.to_dict(), "ok": r.passes()})
        except NumericError as exc:
            rows.append({"name": "error", "validity": "failed", "error": str(exc), "inputs": exc.diagnostics, "ok": False})

    fparams = _fparams(cfg)
    if cfg.alpha is not None:
        params = _params(cfg)
        add(lambda: constant_reports(params, fparams))
    else:
        for a in LATTICE_ALPHA:
            for chi in LATTICE_CHI:
                for k in LATTICE_KAPPA:
                    add(lambda: constant_reports(StableParams(a, k, chi))[:1])
        for d in LATTICE_DELTA:
            add(
                lambda: [
                    ConstantReport("oscillating_integral", oscillating_integral_closed(d), inputs={"delta": d}).with_quadrature(
                        oscillating_integral_numeric(d)
                    )
                ]
            )
    rows.append({**ConstantReport("goldman_K1", goldman_constant()).to_dict(), "ok": True})
    return rows


def cmd_constants(cfg: RunConfig) -> int:
    rows = _constant_rows(cfg)
    doc = {"schema_version": SCHEMA_VERSION, "command": "constants", "config": {k: getattr(cfg, k) for k in ("alpha", "kappa", "chi", "beta", "pv_epsilon")}, "constants": rows}
    stem = _stem(cfg.out)
    if stem is not None:
        table = _csv(
            ["name", "inputs", "closed_form", "quadrature", "rel_error", "validity"],
            (
                (r["name"], json.dumps(_clean(r.get("inputs", {})), sort_keys=True), r.get("closed_form"), r.get("quadrature"), r.get("rel_error"), r["validity"])
                for r in rows
            ),
        )
        _write(stem + ".csv", table)
    _write(None if stem is None else stem + ".json", dumps(doc))
    return EXIT_OK if all(r["ok"] for r in rows) else EXIT_FAILURE


def _check_config(name: str, cfg: RunConfig) -> tuple[RunConfig, MonteCarloConfig | None]:
    merged = VERIFY_DEFAULTS[name].merged(cfg)
    if name == "bingham":
        return merged, None
    if name == "fgb" and (merged.horizon is None or merged.pv_epsilon is None):
        # Fill horizon and PV radius from the FGB defaults unless given.
        ref = fgb_config(_params(merged), 100, merged.steps, horizon=merged.horizon)
        merged = RunConfig(horizon=ref.horizon, pv_epsilon=ref.fparams.pv_epsilon).merged(merged)
    if merged.beta is not None and merged.beta <= -1.0 and merged.pv_epsilon is None:
        # Principal-value runs: the local-time statistics need a PV radius
        # well inside one grid scale.
        dt = merged.get("horizon", 400.0) / merged.get("steps", 4096)
        scale = (dt * merged.get("kappa", 1.0)) ** (1.0 / merged.alpha)
        merged = merged.merged(RunConfig(pv_epsilon=FGB_EPS_FACTOR * scale))
    return merged, _mc_config(merged)


def run_check(name: str, cfg: RunConfig):
    merged, config = _check_config(name, cfg)
    blocks = merged.max_blocks
    if name == "bingham":
        return check_bingham_supremum(
            _params(merged), n_increments=merged.get("n", 1_000_000), n_paths=merged.paths,
            n_steps=merged.steps, seed=merged.get("seed", 0), threads=_threads(merged),
        )
    if name == "symmetry":
        return check_symmetry_lemma(config, max_blocks=blocks or 1)
    if name == "split":
        return check_xi_split_symmetry(config, max_blocks=blocks or 1)
    if name == "fgb":
        return check_fgb(config, max_blocks=blocks or FGB_BLOCKS)
    if name == "kp":
        return check_kp_inequality(config)
    if name == "tauberian":
        return check_tauberian_tail(config)
    return check_positivity_a1(config)


def cmd_verify(cfg: RunConfig) -> int:
    suite = cfg.get("suite", "all")
    names = SUITES if suite == "all" else (suite,)
    if any(n not in SUITES for n in names):
        raise UsageError(f"unknown suite {suite!r}; choose all or one of {', '.join(SUITES)}")
    reports, skipped = [], []
    for name in names:
        try:
            reports.append(run_check(name, cfg).to_dict())
        except DomainError as exc:
            if suite != "all":
                raise
            skipped.append({"check": name, "reason": str(exc)})
    doc = {"schema_version": SCHEMA_VERSION, "command": "verify", "suite": suite, "reports": reports, "skipped": skipped}
    _write(None if cfg.out is None else _stem(cfg.out) + ".json", dumps(doc))
    counted = [r for r in reports if not r["exploratory"]]
    if any(r["verdict"] == "fail" for r in counted):
        return EXIT_FAILURE
    if any(r["verdict"] == "inconclusive" for r in reports):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


KNOWN_COMMANDS = ("theta", "constants", "verify", "report")


def _load_document(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"input file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION or doc.get("command") not in KNOWN_COMMANDS:
        raise UsageError(f"{path}: schema mismatch (need schema_version {SCHEMA_VERSION} and a known command)")
    return doc


def merge_documents(docs: list[dict]) -> dict:
    """Flatten nested reports and drop duplicates, keeping first appearances."""
    flat, seen = [], set()
    for doc in docs:
        for item in doc["documents"] if doc["command"] == "report" else [doc]:
            key = json.dumps(item, sort_keys=True)
            if key not in seen:
                seen.add(key)
                flat.append(item)
    return {"schema_version": SCHEMA_VERSION, "command": "report", "documents": flat}


def cmd_report(cfg: RunConfig, inputs: list[str]) -> int:
    if not inputs:
        raise UsageError("report needs at least one input file")
    doc = merge_documents([_load_document(p) for p in inputs])
    _write(None if cfg.out is None else _stem(cfg.out) + ".json", dumps(doc))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    spec = {
        "alpha": (float, "stability index in (1, 2]"),
        "kappa": (float, "scale kappa > 0 (default 1)"),
        "chi": (float, "skewness in [-1, 1] (default 0)"),
        "beta": (float, "homogeneity of the functional; omit for the process itself"),
        "pv-epsilon": (float, "principal-value truncation radius"),
        "level": (float, "passage level (default 1)"),
        "paths": (int, "number of paths"),
        "steps": (int, "grid steps per horizon"),
        "horizon": (float, "simulated time"),
        "seed": (int, f"master seed (default ${SEED_ENV} or 0)"),
        "threads": (int, "worker threads (default: all cores; results do not depend on it)"),
        "bandwidth": (float, "local-time kernel half-width"),
        "max-blocks": (int, "extend local-time runs up to this many horizons"),
        "n": (int, "number of draws"),
        "out": (str, "output path (stem for multi-file outputs); stdout if omitted"),
    }
    for name in names:
        kind, text = spec[name]
        p.add_argument(f"--{name}", type=kind, default=None, help=text)
    p.add_argument("--config", default=None, help="key = value configuration file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="persistence-lab", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw i.i.d. copies of Z_1, one per line")
    _add_common(p, "alpha", "kappa", "chi", "n", "seed", "out")

    run_flags = ("alpha", "kappa", "chi", "beta", "pv-epsilon", "level", "paths", "steps", "horizon", "seed", "threads", "bandwidth", "out")
    p = sub.add_parser("theta", help="survival curve and fitted persistence exponent")
    _add_common(p, *run_flags)

    p = sub.add_parser("constants", help="closed-form constants with quadrature cross-checks")
    _add_common(p, "alpha", "kappa", "chi", "beta", "pv-epsilon", "out")

    p = sub.add_parser("verify", help="statistical identity checks")
    _add_common(p, *run_flags, "max-blocks", "n")
    p.add_argument("--suite", default=None, help=f"all or one of: {', '.join(SUITES)}")

    p = sub.add_parser("report", help="merge earlier JSON outputs into one document")
    _add_common(p, "out")
    p.add_argument("inputs", nargs="*", help="JSON files written by theta, constants, verify or report")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _run_config(args)
        if args.command == "sample":
            return cmd_sample(cfg)
        if args.command == "theta":
            return cmd_theta(cfg)
        if args.command == "constants":
            return cmd_constants(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_report(cfg, args.inputs)
    except (UsageError, DomainError) as exc:
        print(f"persistence-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"persistence-lab {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
