import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pydantic

from mssk.cli.models import RunConfig
from mssk.cli.selftest import closed_form_pressure, run_selftest
from mssk.core.errors import CheckFailed, ConfigError, MsskError, ValidationError
from mssk.core.estimates import agree_within
from mssk.optimize.bounds import bound_report, trial_bound_rows
from mssk.optimize.minimizer import minimize_parisi
from mssk.optimize.parameterization import random_trials
from mssk.parisi.functional import parisi_recursion, parisi_rpc
from mssk.parisi.trial import build_trial, sum_rule_terms
from mssk.rpc.cascade import sample_cascade
from mssk.rpc.field import coupling_profile, sample_tree_field
from mssk.simulate.cavity import cavity_telescoping, default_slack_constant
from mssk.simulate.ghirlanda_guerra import gg_delta, gg_trend
from mssk.simulate.gibbs import gibbs_overlap_distribution
from mssk.simulate.pressure import pressure_direct, pressure_recursive
from mssk.utils.artifacts import write_artifacts
from mssk.utils.config import Config
from mssk.utils.logger import setup_logging, teardown_logging
from mssk.utils.run_logger import run_logger

# (summary, csv rows or None, passed)
Outcome = Tuple[Dict[str, Any], Optional[List[Dict[str, Any]]], bool]

COMMANDS = ("pressure", "parisi-eval", "optimize", "verify-bound", "rpc-sample",
            "overlap-dist", "cavity", "gg-check", "selftest")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so run() owns the exit code."""

    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="mssk", description="Multi-scale SK model: pressures, Parisi bounds, cascades.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON run-config document (default: config.json)")
    parser.add_argument("--seed", type=int, help="64-bit seed")
    parser.add_argument("--replicas", type=int, help="disorder replicas per estimate")
    parser.add_argument("--out", type=Path, help="artifact directory")
    parser.add_argument("--threads", type=int, help="worker threads (default: available parallelism)")
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    Config.load(args.config, force=True)
    document = dict(Config.data)
    for key in ("seed", "replicas", "threads"):
        value = getattr(args, key)
        if value is not None:
            document[key] = value
    if args.out is not None:
        document["out"] = str(args.out)
    return RunConfig.model_validate(document)


def _pressure(cfg: RunConfig) -> Outcome:
    params = cfg.model.to_params()
    cascade = cfg.cascade.to_config()
    rows = []
    passed = True
    for n in cfg.pressure.n_list:
        direct = pressure_direct(params, n, cascade, cfg.replicas, cfg.seed, cfg.threads)
        recursive = pressure_recursive(params, n, cfg.pressure.samples_per_level,
                                       cfg.pressure.recursive_replicas, cfg.seed, cfg.threads)
        agree = agree_within(direct, recursive)
        passed = passed and agree
        for estimate in (direct, recursive):
            rows.append({"n": n, "method": estimate.notes["method"], "estimate": estimate.mean,
                         "stderr": estimate.stderr, "replicas": estimate.replicas, "seed": estimate.seed})
        print(f"[pressure] N={n}: direct {direct.mean:.6f} +- {direct.stderr:.6f}, "
              f"recursive {recursive.mean:.6f} +- {recursive.stderr:.6f}, agree={agree}")
        if n == 1 and params.r == 1:
            target = closed_form_pressure(params.zeta[0], params.gamma[0])
            closed = direct.agrees_with(target)
            passed = passed and closed
            print(f"[pressure] closed form {target:.6f}: within 3 stderr={closed}")
    return {"model": params.to_dict(), "rows": rows}, rows, passed


def _trial(cfg: RunConfig):
    params = cfg.model.to_params()
    k = params.r + len(cfg.parisi.xi_free)
    q = cfg.parisi.q if cfg.parisi.q is not None else list(np.linspace(0.0, 1.0, k + 1))
    return build_trial(params, cfg.parisi.xi_free, q)


def _parisi_eval(cfg: RunConfig) -> Outcome:
    trial = _trial(cfg)
    recursion = parisi_recursion(trial, method=cfg.parisi.method, seed=cfg.seed)
    summary = {"trial": trial.to_dict(), "recursion": recursion.to_dict(), "sum_rule": sum_rule_terms(trial)}
    rows = [{"method": recursion.method, **recursion.to_dict()}]
    passed = True
    print(f"[parisi-eval] recursion {recursion.value:.10f} "
          f"(log Z_0 {recursion.log_z0:.10f}, correction {recursion.correction:.10f})")
    if cfg.parisi.rpc:
        rpc = parisi_rpc(trial, cfg.cascade.to_config(), cfg.replicas, cfg.seed, cfg.threads)
        passed = abs(rpc.value - recursion.value) <= 3.0 * math.hypot(rpc.stderr, recursion.stderr)
        summary["rpc"] = rpc.to_dict()
        rows.append(rpc.to_dict())
        print(f"[parisi-eval] rpc {rpc.value:.6f} +- {rpc.stderr:.6f}, agree={passed}")
    return summary, rows, passed


def _optimize(cfg: RunConfig) -> Outcome:
    result = minimize_parisi(cfg.model.to_params(), cfg.optimization_config())
    if result.budget_exhausted:
        print("[optimize] evaluation budget exhausted; reporting best so far")
    print(f"[optimize] best {result.best_value:.10f} at k={result.best_trial.k}")
    return result.to_dict(), result.trace_rows(), True


def _verify_bound(cfg: RunConfig) -> Outcome:
    params = cfg.model.to_params()
    result = minimize_parisi(params, cfg.optimization_config())
    estimates = {n: pressure_direct(params, n, cfg.cascade.to_config(), cfg.replicas, cfg.seed, cfg.threads)
                 for n in cfg.pressure.n_list}
    table = bound_report(params, cfg.pressure.n_list, result, estimates)
    print(f"{'N':>4} {'p_N':>12} {'stderr':>10} {'best P':>12} {'gap':>10}")
    for row in table.rows:
        print(f"{row.n:>4} {row.pressure:>12.6f} {row.stderr:>10.6f} {row.best_value:>12.6f} {row.gap:>10.6f}")
    trials = random_trials(params, cfg.optimizer.random_trials, cfg.seed)
    trial_rows = trial_bound_rows(trials, estimates)
    trials_hold = all(row.bound_holds for row in trial_rows)
    print(f"[verify-bound] bound holds={table.bound_holds}, gap shrinks={table.gap_shrinks}, "
          f"holds at {len(trials)} random trials={trials_hold}")
    summary = {"optimization": result.to_dict(), **table.to_dict(),
               "random_trials": [t.to_dict() for t in trials],
               "trial_bounds": [row.to_dict() for row in trial_rows]}
    return summary, [r.to_dict() for r in table.rows], table.bound_holds and trials_hold


def _rpc_sample(cfg: RunConfig) -> Outcome:
    params = cfg.model.to_params()
    cascade = sample_cascade(params.zeta, params.r, cfg.cascade.width, cfg.seed, 0, cfg.cascade.max_leaves)
    field = sample_tree_field(coupling_profile(params.gamma_levels()), cfg.cascade.width, cfg.seed, 0,
                              max_leaves=cfg.cascade.max_leaves)
    rows = [{"leaf": path, "value": value, "weight": float(w)}
            for (path, value), w in zip(field.to_csv_rows(), cascade.leaf_weights)]
    print(f"[rpc-sample] {cascade.n_leaves} leaves, leftover mass bound {cascade.leftover_mass_bound:.4g}")
    return cascade.to_document(), rows, True


def _overlap_dist(cfg: RunConfig) -> Outcome:
    params = cfg.model.to_params()
    sample = gibbs_overlap_distribution(params, cfg.gibbs.n, cfg.cascade.to_config(), cfg.replicas,
                                        cfg.gibbs.pair_draws, cfg.seed, cfg.threads)
    freqs, stderr = sample.level_frequencies()
    expected = [params.zeta_at(l) - params.zeta_at(l - 1) for l in range(params.r + 1)]
    passed = bool(np.all(np.abs(freqs - expected) <= 3.0 * stderr + 1e-12))
    print(f"[overlap-dist] level law {np.round(freqs, 4).tolist()} vs {expected}, within 3 stderr={passed}")
    summary = {"level_frequencies": freqs, "level_stderr": stderr, "expected": expected,
               "overlap_histogram": sample.overlap_histogram()}
    return summary, sample.histogram_rows(), passed


def _cavity(cfg: RunConfig) -> Outcome:
    params = cfg.model.to_params()
    slack_c = cfg.cavity.slack_constant
    if slack_c is None:
        slack_c = default_slack_constant(params)
    table = cavity_telescoping(params, cfg.cavity.n_list, cfg.cascade.to_config(), cfg.replicas, cfg.seed,
                               cfg.threads, slack_c)
    for row in table:
        print(f"[cavity] N={row.n}: A_N {row.cavity:.5f} +- {row.cavity_stderr:.5f}, "
              f"increment {row.increment:.5f}, ok={row.within}")
    rows = [row.to_dict() for row in table]
    return {"rows": rows, "slack_constant": slack_c}, rows, all(row.within for row in table)


def _gg_check(cfg: RunConfig) -> Outcome:
    params = cfg.model.to_params()
    gg = cfg.ghirlanda_guerra
    cascade = cfg.cascade.to_config()
    rows = gg_trend(params, gg.n_list, gg.w, gg.n, gg.p, gg.f, cascade, cfg.replicas, gg.samples,
                    cfg.seed, cfg.threads)
    constant = gg_delta(params, min(gg.n_list), gg.w, gg.n, gg.p, "one", cascade,
                        min(cfg.replicas, 8), gg.samples, cfg.seed, cfg.threads)
    for row in rows:
        print(f"[gg-check] N={row['n_spins']}: Delta {row['delta']:.6f} +- {row['stderr']:.6f}")
    print(f"[gg-check] f=1 gives Delta={constant!r}")
    return {"rows": rows, "constant_delta": constant, "f": gg.f}, rows, constant == 0.0


def _selftest(cfg: RunConfig) -> Outcome:
    rows = run_selftest(cfg.seed, cfg.threads)
    passed = all(row["passed"] for row in rows)
    return {"passed": passed, "checks": len(rows)}, rows, passed


HANDLERS: Dict[str, Callable[[RunConfig], Outcome]] = {
    "pressure": _pressure,
    "parisi-eval": _parisi_eval,
    "optimize": _optimize,
    "verify-bound": _verify_bound,
    "rpc-sample": _rpc_sample,
    "overlap-dist": _overlap_dist,
    "cavity": _cavity,
    "gg-check": _gg_check,
    "selftest": _selftest,
}


def run(argv: Optional[List[str]] = None) -> int:
    """Exit code: 0 success, 1 failed check, 2 usage or config error."""
    try:
        args = build_parser().parse_args(argv)
        cfg = load_run_config(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 2
    except (ConfigError, ValidationError, pydantic.ValidationError) as e:
        print(f"[mssk] config error: {e}", file=sys.stderr)
        return 2

    run_logger.configure(log_dir=Path(cfg.logging.log_dir), verbose=cfg.logging.verbose)
    setup_logging(Path(cfg.logging.log_dir))
    config_hash = cfg.content_hash()
    try:
        run_logger.log_event("run_start", {"command": args.command, "config_hash": config_hash,
                                           "config": json.loads(cfg.model_dump_json())}, level="INFO")
        summary, rows, passed = HANDLERS[args.command](cfg)
        summary = {"config": cfg.model_dump(mode="json", exclude={"threads", "logging", "out"}),
                   "passed": passed, **summary}
        for path in write_artifacts(Path(cfg.out), args.command, config_hash, summary, rows):
            print(f"[mssk] wrote {path}")
        run_logger.log_event("run_done", {"command": args.command, "passed": passed}, level="INFO")
        if not passed:
            raise CheckFailed(f"{args.command}: acceptance check failed")
        return 0
    except CheckFailed as e:
        print(f"[mssk] {e}", file=sys.stderr)
        return 1
    except (ConfigError, ValidationError) as e:
        print(f"[mssk] config error: {e}", file=sys.stderr)
        return 2
    except MsskError as e:
        print(f"[mssk] {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    finally:
        teardown_logging()
