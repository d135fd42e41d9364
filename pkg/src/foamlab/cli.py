"""Command line front end.

Subcommands build bodies, run the Monte Carlo estimators and the energy
experiment, and drive the cycle game.  Every run is reproducible from its
command line, config file, and seed: outputs embed the resolved config and
never include timestamps.  Exit codes: 0 success, 2 usage, 3 sampling
budget exhausted, 4 an exact computation would exceed its resource guard.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from .bodies import CubeTiling, FoamTiling, body_from_descriptor
from .energy import EnergyParams, run_lb_experiment
from .errors import (CalibrationError, DomainError, SamplingBudgetError,
                     StateSpaceError)
from .game import (BodyLatticeRounding, GameInstance, TilingStrategy,
                   amplification_step_count, brute_force_value,
                   enumerate_symmetric_strategies, equivalence_counterexamples,
                   estimate_decency, estimate_step_escape, evaluate_strategy)
from .needles import (BernoulliSteps, GaussianSteps, estimate_escape,
                      estimate_noise_sensitivity, estimate_surface_area)

_EXIT_OK = 0
_EXIT_USAGE = 2
_EXIT_BUDGET = 3
_EXIT_RESOURCE = 4


def _fmt(value):
    """Floats with 17 significant digits: round-trippable and stable."""
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def _resolve_seed(args, config):
    """Precedence: --seed flag, then config file, then FOAMLAB_SEED, then 0."""
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    if "seed" in config:
        return int(config["seed"])
    env = os.environ.get("FOAMLAB_SEED")
    if env is not None:
        return int(env)
    return 0


def _load_config(args):
    if getattr(args, "config", None) is None:
        return {}
    with open(args.config) as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise DomainError("config file must hold a JSON object")
    return config


def _merged(args, config, key, default=None):
    """Flag value if given, else config entry, else default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _parse_scales(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v != ""]


def _make_body(args, config, spec, n_dim, seed):
    """Body from a name, an inline JSON descriptor, or a descriptor file."""
    if spec is None or spec == "foam":
        if n_dim is None:
            raise DomainError("--n is required to build a foam body")
        m = _merged(args, config, "m")
        width_inv = _merged(args, config, "width_inv")
        max_rounds = _merged(args, config, "max_rounds")
        return FoamTiling(
            n_dim=int(n_dim),
            n_intervals=None if m is None else int(m),
            seed=seed,
            width_inv=None if width_inv is None else float(width_inv),
            max_rounds=None if max_rounds is None else int(max_rounds),
        )
    if spec == "cube":
        if n_dim is None:
            raise DomainError("--n is required to build a cube body")
        return CubeTiling(int(n_dim))
    if spec.lstrip().startswith("{"):
        return body_from_descriptor(json.loads(spec))
    with open(spec) as fh:
        return body_from_descriptor(json.load(fh))


def _emit(header, rows, config, fmt, out):
    """CSV: config comment line, header, rows.  JSON: one object."""
    if fmt == "json":
        payload = {"config": config,
                   "rows": [dict(zip(header, row)) for row in rows]}
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    else:
        lines = ["# config " + json.dumps(config, sort_keys=True)]
        lines.append(",".join(header))
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _print(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def cmd_build_body(args):
    config = _load_config(args)
    seed = _resolve_seed(args, config)
    n = _merged(args, config, "n")
    if n is None:
        raise DomainError("--n is required")
    n = int(n)
    if n < 8:
        raise DomainError(f"build-body requires n >= 8, got {n}")
    body = FoamTiling(
        n_dim=n,
        n_intervals=_merged(args, config, "m"),
        seed=seed,
        width_inv=_merged(args, config, "width_inv"),
        max_rounds=_merged(args, config, "max_rounds"),
    )
    payload = {"descriptor": body.descriptor(),
               "fingerprint": body.fingerprint()}
    _print(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    return _EXIT_OK


def cmd_estimate_ns(args):
    config = _load_config(args)
    seed = _resolve_seed(args, config)
    n = _merged(args, config, "n")
    body = _make_body(args, config, _merged(args, config, "body"), n, seed)
    n_samples = int(_merged(args, config, "n_samples", 10000))
    workers = int(_merged(args, config, "workers", 1))
    sigmas = _merged(args, config, "sigma_list")
    epses = _merged(args, config, "eps_list")
    if sigmas is None and epses is None:
        raise DomainError("estimate ns needs --sigma-list or --eps-list")
    rows = []
    for sigma in _parse_scales(sigmas) if sigmas is not None else []:
        family = GaussianSteps(body.n_dim, sigma)
        est = estimate_noise_sensitivity(body, family, n_samples,
                                         seed=seed, workers=workers)
        rows.append([body.descriptor()["kind"], body.n_dim, "gaussian",
                     sigma, est.value, est.stderr, est.n_samples,
                     est.budget_errors, seed])
    for eps in _parse_scales(epses) if epses is not None else []:
        family = BernoulliSteps(body.n_dim, eps)
        est = estimate_noise_sensitivity(body, family, n_samples,
                                         seed=seed, workers=workers)
        rows.append([body.descriptor()["kind"], body.n_dim, "bernoulli",
                     eps, est.value, est.stderr, est.n_samples,
                     est.budget_errors, seed])
    header = ["body", "n", "family", "scale", "value", "stderr",
              "n_samples", "budget_errors", "seed"]
    _emit(header, rows, _run_config(args, config, seed, n_samples=n_samples,
                                    workers=workers), args.format, args.out)
    return _EXIT_BUDGET if any(row[7] for row in rows) else _EXIT_OK


def cmd_estimate_escape(args):
    config = _load_config(args)
    seed = _resolve_seed(args, config)
    n = _merged(args, config, "n")
    body = _make_body(args, config, _merged(args, config, "body"), n, seed)
    n_samples = int(_merged(args, config, "n_samples", 10000))
    workers = int(_merged(args, config, "workers", 1))
    k_subdiv = int(_merged(args, config, "k_subdiv", 64))
    sigmas = _merged(args, config, "sigma_list")
    if sigmas is None:
        raise DomainError("estimate escape needs --sigma-list")
    rows = []
    for sigma in _parse_scales(sigmas):
        est = estimate_escape(body, sigma, n_samples, k_subdiv=k_subdiv,
                              seed=seed, workers=workers)
        rows.append([body.descriptor()["kind"], body.n_dim, sigma, k_subdiv,
                     est.value, est.stderr, est.n_samples,
                     est.budget_errors, seed])
    header = ["body", "n", "sigma", "k_subdiv", "value", "stderr",
              "n_samples", "budget_errors", "seed"]
    _emit(header, rows, _run_config(args, config, seed, n_samples=n_samples,
                                    workers=workers, k_subdiv=k_subdiv),
          args.format, args.out)
    return _EXIT_BUDGET if any(row[7] for row in rows) else _EXIT_OK


def cmd_estimate_area(args):
    config = _load_config(args)
    seed = _resolve_seed(args, config)
    n = _merged(args, config, "n")
    body = _make_body(args, config, _merged(args, config, "body"), n, seed)
    n_samples = int(_merged(args, config, "n_samples", 10000))
    workers = int(_merged(args, config, "workers", 1))
    k_subdiv = int(_merged(args, config, "k_subdiv", 64))
    deltas = _merged(args, config, "delta_list")
    if deltas is None:
        raise DomainError("estimate area needs --delta-list")
    rows = []
    for delta in _parse_scales(deltas):
        rep = estimate_surface_area(body, delta, n_samples,
                                    k_subdiv=k_subdiv, seed=seed,
                                    workers=workers)
        rows.append([body.descriptor()["kind"], body.n_dim, delta, k_subdiv,
                     rep.area.value, rep.area.stderr,
                     rep.calibration_constant, rep.raw_crossings.value,
                     rep.raw_crossings.stderr, rep.area.n_samples,
                     rep.area.budget_errors, seed])
    header = ["body", "n", "delta", "k_subdiv", "area", "stderr",
              "calibration_constant", "crossings", "crossings_stderr",
              "n_samples", "budget_errors", "seed"]
    _emit(header, rows, _run_config(args, config, seed, n_samples=n_samples,
                                    workers=workers, k_subdiv=k_subdiv),
          args.format, args.out)
    return _EXIT_BUDGET if any(row[10] for row in rows) else _EXIT_OK


def cmd_estimate_lb(args):
    config = _load_config(args)
    seed = _resolve_seed(args, config)
    n = _merged(args, config, "n")
    body = _make_body(args, config, _merged(args, config, "body"), n, seed)
    n_samples = int(_merged(args, config, "n_samples", 1000))
    workers = int(_merged(args, config, "workers", 1))
    k_subdiv = int(_merged(args, config, "k_subdiv", 16))
    scale = float(_merged(args, config, "sigma_scale", 1.0))
    params = EnergyParams.defaults(body.n_dim, sigma_scale=scale)
    rep = run_lb_experiment(body, params=params, n_samples=n_samples,
                            seed=seed, k_subdiv=k_subdiv, workers=workers)
    header = ["body", "n", "Z", "sigma", "k_subdiv", "n_samples"]
    row = [body.descriptor()["kind"], body.n_dim, params.Z, params.sigma,
           k_subdiv, rep.escape_rate.n_samples]
    for name in ("e1", "e2", "e3", "e4", "e5", "escape_rate",
                 "pr_energy_forward_gt_backward", "goodness_rate"):
        est = getattr(rep, name)
        header.extend([name, name + "_stderr"])
        row.extend([est.value, est.stderr])
    _emit(header, [row], _run_config(args, config, seed, n_samples=n_samples,
                                     workers=workers, k_subdiv=k_subdiv,
                                     sigma_scale=scale),
          args.format, args.out)
    return _EXIT_BUDGET if rep.escape_rate.budget_errors else _EXIT_OK


def cmd_game_brute(args):
    config = _load_config(args)
    n = int(_merged(args, config, "game_n"))
    t = int(_merged(args, config, "t", 1))
    value = brute_force_value(n, t)
    if args.format == "json":
        payload = {"n": n, "t": t, "value": f"{value.numerator}/{value.denominator}",
                   "numerator": value.numerator, "denominator": value.denominator}
        _print(json.dumps(payload, sort_keys=True) + "\n", args.out)
    else:
        _print(f"{value.numerator}/{value.denominator}\n", args.out)
    return _EXIT_OK


def cmd_game_equiv(args):
    config = _load_config(args)
    n = int(_merged(args, config, "game_n"))
    t = int(_merged(args, config, "t", 1))
    instance = GameInstance(n=n, t=t)
    bad = 0
    for strategy in enumerate_symmetric_strategies(instance):
        bad += equivalence_counterexamples(instance, strategy)
    _print(f"{bad} counterexamples\n", args.out)
    return _EXIT_OK if bad == 0 else 1


def _game_body(args, config, instance, seed):
    spec = _merged(args, config, "body")
    if spec is None:
        spec = "cube" if instance.t == 1 else "foam"
    return _make_body(args, config, spec, instance.t, seed)


def cmd_game_eval(args):
    config = _load_config(args)
    seed = _resolve_seed(args, config)
    n = int(_merged(args, config, "game_n"))
    t = int(_merged(args, config, "t", 1))
    n_samples = int(_merged(args, config, "n_samples", 10000))
    n_per_box = int(_merged(args, config, "n_per_box", 400))
    workers = int(_merged(args, config, "workers", 1))
    instance = GameInstance(n=n, t=t)
    body = _game_body(args, config, instance, seed)
    strategy = TilingStrategy(instance, body, n_per_box=n_per_box, seed=seed)
    rep = evaluate_strategy(instance, strategy, n_samples, seed=seed,
                            workers=workers)
    header = ["body", "n", "t", "success", "success_stderr", "abort_rate",
              "abort_stderr", "n_samples", "seed"]
    rows = [[body.descriptor()["kind"], n, t, rep.success.value,
             rep.success.stderr, rep.abort_rate.value, rep.abort_rate.stderr,
             rep.success.n_samples, seed]]
    _emit(header, rows, _run_config(args, config, seed, n_samples=n_samples,
                                    workers=workers, n_per_box=n_per_box),
          args.format, args.out)
    return _EXIT_OK


def cmd_game_decency(args):
    config = _load_config(args)
    seed = _resolve_seed(args, config)
    n = int(_merged(args, config, "game_n"))
    t = int(_merged(args, config, "t", 1))
    n_samples = int(_merged(args, config, "n_samples", 10000))
    n_pairs = int(_merged(args, config, "n_pairs", 200))
    workers = int(_merged(args, config, "workers", 1))
    k = _merged(args, config, "k")
    k = amplification_step_count(n, t) if k is None else int(k)
    instance = GameInstance(n=n, t=t)
    body = _game_body(args, config, instance, seed)
    rounding = BodyLatticeRounding(body, n)
    eta = estimate_step_escape(rounding, n_samples, steps=1, seed=seed,
                               workers=workers)
    delta = estimate_step_escape(rounding, n_samples, steps=k, seed=seed,
                                 workers=workers)
    report = estimate_decency(rounding, k, n_pairs=n_pairs, seed=seed)
    header = ["body", "n", "t", "k", "eta", "eta_stderr", "delta",
              "delta_stderr", "mean_probe", "probe_stderr", "decent_rate",
              "rate_stderr", "n_samples", "seed"]
    rows = [[body.descriptor()["kind"], n, t, k, eta.value, eta.stderr,
             delta.value, delta.stderr, report.mean_probe.value,
             report.mean_probe.stderr, report.decent_rate.value,
             report.decent_rate.stderr, n_samples, seed]]
    _emit(header, rows, _run_config(args, config, seed, n_samples=n_samples,
                                    workers=workers, k=k, n_pairs=n_pairs),
          args.format, args.out)
    return _EXIT_OK


def _run_config(args, config, seed, **resolved):
    """The resolved parameters a run actually used, for the output header.

    Worker count is deliberately not echoed: it never changes results, and
    outputs must be byte-identical across worker counts.
    """
    out = {"command": args.command, "seed": seed}
    if getattr(args, "subcommand", None):
        out["subcommand"] = args.subcommand
    for key in ("n", "game_n", "t", "body", "sigma_list", "eps_list",
                "delta_list", "m", "width_inv", "max_rounds"):
        value = _merged(args, config, key)
        if value is not None:
            out[key] = value
    resolved.pop("workers", None)
    out.update(resolved)
    return out


def _add_common(parser, body=True, ambient_n=True):
    parser.add_argument("--seed", type=int, default=None,
                        help="PRNG seed (default: config, then FOAMLAB_SEED, then 0)")
    parser.add_argument("--config", default=None,
                        help="JSON file with defaults mirroring the flags")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes; never changes results")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    if body:
        parser.add_argument("--body", default=None,
                            help="cube, foam, inline descriptor JSON, or a descriptor file")
        if ambient_n:
            parser.add_argument("--n", type=int, default=None,
                                help="ambient dimension")
        parser.add_argument("--m", type=int, default=None,
                            help="intervals per axis (foam bodies)")
        parser.add_argument("--width-inv", dest="width_inv", type=float,
                            default=None, help="inverse ramp width (foam bodies)")
        parser.add_argument("--max-rounds", dest="max_rounds", type=int,
                            default=None, help="sampling budget (foam bodies)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="foamlab",
        description="Lattice tilings, their Monte Carlo diagnostics, and the cycle game.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-body", help="construct a foam body and print its descriptor")
    p.add_argument("--n", type=int, default=None, required=False)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--width-inv", dest="width_inv", type=float, default=None)
    p.add_argument("--max-rounds", dest="max_rounds", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_build_body)

    est = sub.add_parser("estimate", help="run a Monte Carlo estimator")
    est_sub = est.add_subparsers(dest="subcommand", required=True)

    p = est_sub.add_parser("ns", help="noise sensitivity")
    _add_common(p)
    p.add_argument("--sigma-list", dest="sigma_list", default=None,
                   help="comma separated Gaussian step scales")
    p.add_argument("--eps-list", dest="eps_list", default=None,
                   help="comma separated Bernoulli step rates")
    p.add_argument("-N", "--n-samples", dest="n_samples", type=int, default=None)
    p.set_defaults(func=cmd_estimate_ns)

    p = est_sub.add_parser("escape", help="segment escape probability")
    _add_common(p)
    p.add_argument("--sigma-list", dest="sigma_list", default=None)
    p.add_argument("--k-subdiv", dest="k_subdiv", type=int, default=None)
    p.add_argument("-N", "--n-samples", dest="n_samples", type=int, default=None)
    p.set_defaults(func=cmd_estimate_escape)

    p = est_sub.add_parser("area", help="surface area via needle crossings")
    _add_common(p)
    p.add_argument("--delta-list", dest="delta_list", default=None)
    p.add_argument("--k-subdiv", dest="k_subdiv", type=int, default=None)
    p.add_argument("-N", "--n-samples", dest="n_samples", type=int, default=None)
    p.set_defaults(func=cmd_estimate_area)

    p = est_sub.add_parser("lb", help="energy lower-bound experiment")
    _add_common(p)
    p.add_argument("--sigma-scale", dest="sigma_scale", type=float, default=None)
    p.add_argument("--k-subdiv", dest="k_subdiv", type=int, default=None)
    p.add_argument("-N", "--n-samples", dest="n_samples", type=int, default=None)
    p.set_defaults(func=cmd_estimate_lb)

    game = sub.add_parser("game", help="odd cycle game commands")
    game_sub = game.add_subparsers(dest="subcommand", required=True)

    p = game_sub.add_parser("brute", help="exact value over all symmetric strategies")
    p.add_argument("--n", dest="game_n", type=int, required=True, help="odd cycle length")
    p.add_argument("--t", type=int, default=None, help="repetition count")
    p.add_argument("--config", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_game_brute)

    p = game_sub.add_parser("equiv", help="exhaustive strategy/rounding agreement check")
    p.add_argument("--n", dest="game_n", type=int, required=True)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_game_equiv)

    p = game_sub.add_parser("eval", help="Monte Carlo value of the tiling strategy")
    _add_common(p, ambient_n=False)
    p.add_argument("--n", dest="game_n", type=int, required=True,
                   help="odd cycle length")
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--n-per-box", dest="n_per_box", type=int, default=None)
    p.add_argument("-N", "--n-samples", dest="n_samples", type=int, default=None)
    p.set_defaults(func=cmd_game_eval)

    p = game_sub.add_parser("decency", help="step escapes and decency probes")
    _add_common(p, ambient_n=False)
    p.add_argument("--n", dest="game_n", type=int, required=True)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--k", type=int, default=None,
                   help="amplification step count (default: prime rule)")
    p.add_argument("--n-pairs", dest="n_pairs", type=int, default=None)
    p.add_argument("-N", "--n-samples", dest="n_samples", type=int, default=None)
    p.set_defaults(func=cmd_game_decency)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SamplingBudgetError as err:
        print(f"foamlab: sampling budget exhausted: {err}", file=sys.stderr)
        return _EXIT_BUDGET
    except StateSpaceError as err:
        print(f"foamlab: state space too large: {err}", file=sys.stderr)
        return _EXIT_RESOURCE
    except DomainError as err:
        print(f"foamlab: {err}", file=sys.stderr)
        return _EXIT_USAGE
    except CalibrationError as err:
        print(f"foamlab: calibration failed: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
