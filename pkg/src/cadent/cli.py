"""Command-line front end.

Subcommands cover the full workflow: train and distill a teacher, train a
single student (any variant), run a full experiment grid, and inspect
environments. The CADENT_OUT environment variable overrides the default
output directory for `experiment`.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import kernels
from .baselines import canonical_variant, preset_names, resolve_preset
from .envs import (ALIASES, DEFAULT_EPISODES, ENV_NAMES, EnvSpec,
                   canonical_name, make_env)
from .harness import (ExperimentConfig, records_from_result, run_experiment,
                      write_run_csv)
from .student import StudentConfig, train_student
from .tabular import LearningParams, save_qtable
from .teacher import (AGGREGATION_MODES, build_knowledge, load_knowledge,
                      save_knowledge, train_teacher)


def _add_env_args(p, variant_default):
    p.add_argument("--env", required=True,
                   help=f"environment: {', '.join(ENV_NAMES)} "
                        f"(aliases: {', '.join(sorted(ALIASES))})")
    p.add_argument("--env-variant", default=variant_default,
                   choices=("source", "target"),
                   help="which side of the transfer pair")
    p.add_argument("--layout-seed", type=int, default=12)
    p.add_argument("--max-steps", type=int, default=0,
                   help="per-episode step budget (0 = environment default)")


def _add_hyper_args(p):
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--alpha", type=float, default=0.1)
    g.add_argument("--gamma", type=float, default=0.99)
    g.add_argument("--epsilon-start", type=float, default=1.0)
    g.add_argument("--epsilon-end", type=float, default=0.05)
    g.add_argument("--epsilon-decay", type=float, default=0.995)
    g.add_argument("--tau", type=float, default=2.0)
    g.add_argument("--eta", type=float, default=0.1)
    g.add_argument("--gate-k", type=float, default=10.0)
    g.add_argument("--theta", type=float, default=0.5)
    g.add_argument("--v-init", type=float, default=0.0)
    g.add_argument("--lambda-ad", type=float, default=1.0)
    g.add_argument("--lambda-pd", type=float, default=0.5)


def _learning_params(args):
    return LearningParams(
        alpha=args.alpha, gamma=args.gamma,
        epsilon_start=args.epsilon_start, epsilon_end=args.epsilon_end,
        epsilon_decay=args.epsilon_decay, tau=args.tau)


def _student_config(args):
    from .student import GuidanceParams, TrustParams
    return StudentConfig(
        learn=_learning_params(args),
        trust=TrustParams(eta=args.eta, k=args.gate_k, theta=args.theta,
                          v_init=args.v_init),
        guide=GuidanceParams(lambda_ad=args.lambda_ad,
                             lambda_pd=args.lambda_pd))


def _env_from_args(args):
    spec = EnvSpec(name=canonical_name(args.env), variant=args.env_variant,
                   layout_seed=args.layout_seed, max_steps=args.max_steps)
    return make_env(spec)


def cmd_train_teacher(args):
    env = _env_from_args(args)
    result = train_teacher(env, params=_learning_params(args),
                           episodes=args.episodes, seed=args.seed)
    knowledge = build_knowledge(result, env.dfa, tau=args.tau,
                                aggregation=args.aggregation)
    save_knowledge(knowledge, args.out)
    if args.qtable_out:
        save_qtable(result.qtable, args.qtable_out)
    print(f"teacher on {env.name}/{env.spec.variant}: "
          f"{result.n_successes}/{args.episodes} successful episodes, "
          f"final-100 mean reward "
          f"{result.ep_reward[-100:].mean():.3f}")
    print(f"knowledge written to {args.out}")
    return 0


def cmd_train_student(args):
    env = _env_from_args(args)
    variant = canonical_variant(args.variant)
    config = resolve_preset(
        variant, _student_config(args),
        omega0=(args.omega0 if variant in ("fixed_trust",) else None))
    knowledge = None
    if variant != "no_transfer":
        if not args.knowledge:
            print(f"error: variant {variant!r} needs --knowledge",
                  file=sys.stderr)
            return 2
        knowledge = load_knowledge(args.knowledge)
    elif args.knowledge:
        print("error: no_transfer does not take --knowledge",
              file=sys.stderr)
        return 2
    episodes = args.episodes or DEFAULT_EPISODES[env.name]
    result = train_student(env, knowledge, config, episodes=episodes,
                           seed=args.seed)
    records = records_from_result(env.name, variant, args.seed, result)
    if args.out:
        write_run_csv(args.out, records)
        print(f"episode log written to {args.out}")
    if args.qtable_out:
        save_qtable(result.qtable, args.qtable_out)
    d = result.diagnostics
    print(f"{variant} on {env.name}/{env.spec.variant}: "
          f"final-100 mean reward "
          f"{float(result.ep_reward[-100:].mean()):.3f}, "
          f"accept rate {float(result.ep_accept[-100:].mean()):.2f}")
    print(f"diagnostics: novel_transitions={d.novel_transitions} "
          f"max|update|={d.max_abs_update:.3f} (bound {result.bound:.3f}) "
          f"soft_violations={d.soft_violations}")
    return 0


def _parse_only(text):
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise ValueError(f"bad --only clause {part!r}; use key=value")
        key, value = part.split("=", 1)
        key = key.strip()
        if key not in ("env", "variant"):
            raise ValueError(f"--only keys are env/variant, not {key!r}")
        norm = (canonical_name(value.strip()) if key == "env"
                else canonical_variant(value.strip()))
        out.setdefault(key, set()).add(norm)
    return out


def cmd_experiment(args):
    if args.write_default_config:
        ExperimentConfig().save(args.write_default_config)
        print(f"default config written to {args.write_default_config}")
        return 0
    if args.config:
        config = ExperimentConfig.load(args.config)
    else:
        config = ExperimentConfig()
    overrides = {}
    if args.envs:
        overrides["environments"] = tuple(
            canonical_name(e) for e in args.envs.split(","))
    if args.variants:
        overrides["variants"] = tuple(
            canonical_variant(v) for v in args.variants.split(","))
    if args.seeds:
        overrides["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    if args.episodes:
        eps = {}
        for clause in args.episodes.split(","):
            name, _, n = clause.partition("=")
            eps[canonical_name(name)] = int(n)
        overrides["episodes"] = eps
    if overrides:
        config = config.with_(**overrides)
    out_dir = args.out or os.environ.get("CADENT_OUT", "results")
    only = _parse_only(args.only) if args.only else None
    summary = run_experiment(config, out_dir, only=only,
                             parallel=args.parallel,
                             progress=(print if args.verbose else None))
    print(f"experiment written to {out_dir}")
    for env_name, variants in sorted(summary["results"].items()):
        thr = summary["thresholds"][env_name]
        print(f"{env_name} (threshold {thr:.3f}):")
        for v, row in sorted(variants.items()):
            print(f"  {v:14s} steps_to_threshold="
                  f"{row['steps_to_threshold_mean']:10.1f} "
                  f"final={row['final_reward_mean']:7.3f}"
                  f"+-{row['final_reward_stderr']:.3f}"
                  + (f" censored={row['censored_runs']}"
                     if row["censored_runs"] else ""))
    return 0


def cmd_layout(args):
    env = _env_from_args(args)
    print(f"{env.name} ({env.spec.variant}, layout_seed="
          f"{env.spec.layout_seed})")
    print(env.layout_text())
    return 0


def cmd_info(args):
    info = kernels.backend_info()
    print(json.dumps({
        "backend": info,
        "environments": list(ENV_NAMES),
        "env_aliases": dict(ALIASES),
        "variants": list(preset_names()),
        "default_episodes": dict(DEFAULT_EPISODES),
    }, indent=2, sort_keys=True))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cadent",
        description="Trust-gated hybrid distillation transfer for tabular "
                    "reinforcement learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-teacher",
                       help="train on a source task and distill knowledge")
    _add_env_args(p, "source")
    _add_hyper_args(p)
    p.add_argument("--episodes", type=int, default=5000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--aggregation", default="visitation_weighted",
                   choices=AGGREGATION_MODES)
    p.add_argument("--out", required=True, help="knowledge file to write")
    p.add_argument("--qtable-out", help="also save the raw teacher table")
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("train-student",
                       help="train one student variant on a target task")
    _add_env_args(p, "target")
    _add_hyper_args(p)
    p.add_argument("--variant", default="cadent",
                   help=f"one of {', '.join(preset_names())} "
                        f"(aliases: none, ad_only, pd_only, fixed-trust)")
    p.add_argument("--knowledge", help="distilled knowledge file")
    p.add_argument("--omega0", type=float, default=0.5,
                   help="fixed gate weight for the fixed_trust variant")
    p.add_argument("--episodes", type=int, default=0,
                   help="0 = per-environment default")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="per-episode CSV to write")
    p.add_argument("--qtable-out", help="save the learned table")
    p.set_defaults(func=cmd_train_student)

    p = sub.add_parser("experiment", help="run a full evaluation grid")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--out", help="output directory (default: $CADENT_OUT "
                                 "or ./results)")
    p.add_argument("--envs", help="comma-separated environment subset")
    p.add_argument("--variants", help="comma-separated variant subset")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--episodes",
                   help="per-env episode overrides, e.g. dungeon=500")
    p.add_argument("--only", help="filter cells, e.g. "
                                  "env=dungeon_quest,variant=cadent")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--write-default-config",
                   help="write the default config JSON and exit")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("layout", help="print an environment's layout")
    _add_env_args(p, "target")
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("info", help="backend and registry information")
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
