"""Command-line entry point: ``rsflab {gen,features,verify,sweep,report}``.

Exit status is 0 when every emitted row passes, 1 when some row fails and 2
on configuration errors (bad flags, checks outside their hypotheses,
unreadable files).
"""

import argparse
import sys
from pathlib import Path

from ..features import BASELINE_KINDS, baseline_features, optimal_features
from ..io import (features_to_dict, mdp_from_dict, mdp_to_dict, policy_from_dict,
                  policy_to_dict, read_json, write_json)
from ..kernel import build_kernel
from ..mdp import stationary_weights
from ..rewards import RewardModel
from .checks import CHECK_IDS, ConfigurationError, verify
from .envs import GENERATORS, POLICY_KINDS, EnvironmentGenerationError, EnvironmentSpec, \
    generate_environment
from .report import FORMATS, emit_report, load_report, summarize
from .suite import FAMILIES, SuiteConfig, run_suite, sweep_features

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _global_flags(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=default(0), help="master seed")
    parser.add_argument("--out", default=default(None),
                        help="output file (directory for `gen --suite`); stdout if omitted")
    parser.add_argument("--format", choices=FORMATS, default=default("csv"),
                        help="report format")


def _env_flags(parser):
    g = parser.add_argument_group("environment")
    g.add_argument("--env-file", help="environment JSON written by `gen`")
    g.add_argument("--env", choices=GENERATORS, default="gridworld", help="generator kind")
    g.add_argument("--states", type=int, default=6)
    g.add_argument("--actions", type=int, default=2)
    g.add_argument("--width", type=int, default=4)
    g.add_argument("--height", type=int, default=4)
    g.add_argument("--slip", type=float, default=0.0)
    g.add_argument("--policy", choices=POLICY_KINDS, default="uniform")
    g.add_argument("--policy-floor", type=float, default=1e-3)
    g.add_argument("--env-seed", type=int, default=0, help="environment seed")


def _spec_from_args(args, gamma=0.9) -> EnvironmentSpec:
    return EnvironmentSpec(args.env, num_states=args.states, num_actions=args.actions,
                           width=args.width, height=args.height, slip=args.slip,
                           policy=args.policy, policy_floor=args.policy_floor, gamma=gamma,
                           seed=args.env_seed)


def environment_to_dict(spec, mdp, pi0, w) -> dict:
    return {"spec": spec.to_config() if spec else None, "mdp": mdp_to_dict(mdp),
            "policy": policy_to_dict(pi0), "rho": w.rho.tolist()}


def _load_env(args, gamma):
    """``(spec, (mdp, pi0, w))`` from ``--env-file`` or the generator flags."""
    if args.env_file:
        data = read_json(args.env_file)
        mdp = mdp_from_dict(data["mdp"]).with_gamma(gamma)
        pi0 = policy_from_dict(data["policy"])
        w = stationary_weights(mdp, pi0)
        if data.get("spec"):
            spec = EnvironmentSpec.from_config(data["spec"]).with_gamma(gamma)
        else:
            spec = EnvironmentSpec("random_stochastic", num_states=mdp.num_states,
                                   num_actions=mdp.num_actions, gamma=gamma,
                                   name=Path(args.env_file).stem)
        return spec, (mdp, pi0, w)
    spec = _spec_from_args(args, gamma)
    return spec, generate_environment(spec)


def _write_text(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _finish(rows, args) -> int:
    _write_text(emit_report(rows, args.format), args.out)
    print(summarize(rows), file=sys.stderr)
    return EXIT_PASS if all(r.passed for r in rows) else EXIT_FAIL


def cmd_gen(args) -> int:
    if args.suite:
        if not args.out:
            raise ConfigurationError("`gen --suite` needs --out DIRECTORY")
        specs = _suite_config(args.suite).environments
        for spec in specs:
            spec = spec.with_gamma(args.gamma)
            path = write_json(environment_to_dict(spec, *generate_environment(spec)),
                              Path(args.out) / f"{spec.label}-seed{spec.seed}.json")
            print(path, file=sys.stderr)
        return EXIT_PASS
    spec = _spec_from_args(args, args.gamma)
    data = environment_to_dict(spec, *generate_environment(spec))
    if args.out:
        write_json(data, args.out)
    else:
        import json
        sys.stdout.write(json.dumps(data, indent=2) + "\n")
    return EXIT_PASS


def cmd_features(args) -> int:
    import json
    import numpy as np
    _, (mdp, pi0, w) = _load_env(args, args.gamma)
    if args.kind == "optimal":
        phi = optimal_features(build_kernel(mdp, pi0, w, args.gamma), w, args.d)
    else:
        rng = np.random.default_rng(args.seed)
        phi = baseline_features(args.kind, mdp, pi0, w, args.d, rng=rng)
    data = features_to_dict(phi)
    if args.out:
        write_json(data, args.out)
    else:
        sys.stdout.write(json.dumps(data, indent=2) + "\n")
    return EXIT_PASS


def _suite_config(suite) -> SuiteConfig:
    if suite == "default":
        return SuiteConfig()
    return SuiteConfig.from_config(read_json(suite))


def _check_list(values):
    out = []
    for v in values or ():
        out.extend(x.strip().upper() for x in v.split(",") if x.strip())
    for c in out:
        if c not in CHECK_IDS:
            raise ConfigurationError(f"unknown check {c!r}; expected one of {CHECK_IDS}")
    return tuple(out)


def cmd_verify(args) -> int:
    checks = _check_list(args.checks)
    if args.env_file or args.env_given:
        # a single environment: every requested check must apply to it
        rows = []
        for check_id in checks or CHECK_IDS:
            for gamma in args.gamma or (0.9,):
                spec, env = _load_env(args, gamma)
                rows.extend(verify(check_id, spec, _suite_config(args.suite).params,
                                   args.seed, env=env))
        return _finish(sorted(rows, key=lambda r: r.sort_key()), args)
    config = _suite_config(args.suite)
    if checks:
        config = SuiteConfig(config.environments, config.gammas, checks, config.params)
    if args.gamma:
        config = SuiteConfig(config.environments, tuple(args.gamma), config.checks, config.params)
    rows = run_suite(config, seed=args.seed, jobs=args.jobs)
    if not rows:
        raise ConfigurationError("no applicable (check, environment, gamma) cells")
    return _finish(rows, args)


def cmd_sweep(args) -> int:
    spec, env = _load_env(args, args.gamma)
    model = RewardModel(args.model, kappa=args.kappa, mu=args.mu, sigma2=args.sigma2)
    rows = sweep_features(spec, args.gamma, args.T, args.d, model, n_mc=args.mc,
                          seed=args.seed, families=tuple(args.families), env=env)
    return _finish(rows, args)


def cmd_report(args) -> int:
    rows = load_report(args.input)
    return _finish(rows, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsflab", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="write environment files")
    _env_flags(p)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--suite", help="`default` or a config file: write every suite environment")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("features", parents=[common], help="extract a feature family to JSON")
    _env_flags(p)
    p.add_argument("--kind", choices=("optimal",) + BASELINE_KINDS, default="optimal")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--gamma", type=float, default=0.9)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("verify", parents=[common], help="run verification checks")
    _env_flags(p)
    p.add_argument("--checks", nargs="+", help="subset of V1..V9 (space or comma separated)")
    p.add_argument("--suite", default="default", help="`default` or a JSON config file")
    p.add_argument("--gamma", type=float, nargs="+", help="override the discount grid")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", parents=[common], help="compare feature families")
    _env_flags(p)
    p.add_argument("--model", default="gaussian", help="gaussian | goal | scattered")
    p.add_argument("--kappa", type=float, default=3.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--d", type=int, nargs="+", default=[0, 1, 2, 4, 8])
    p.add_argument("--T", type=float, default=1024.0)
    p.add_argument("--mc", type=int, default=10_000)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--families", nargs="+", choices=FAMILIES, default=list(FAMILIES))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=[common], help="re-render a stored report")
    p.add_argument("input", help="report file (.json or .csv)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.env_given = any(a == "--env" or a.startswith("--env=") for a in argv)
    try:
        return args.func(args)
    except (ConfigurationError, EnvironmentGenerationError, FileNotFoundError, KeyError,
            ValueError) as exc:
        print(f"rsflab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
