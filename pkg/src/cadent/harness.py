"""Experiment harness: grids of (environment, variant, seed) runs.

One experiment trains a teacher per environment on its source variant,
distills knowledge once, then trains every requested student variant across
seeds on the target variant. Outputs are plain files: per-run episode CSVs,
aggregate curves (mean and standard error), distilled knowledge, and a
summary with the sample-efficiency and final-performance tables. Everything
written is a pure function of the config, so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import canonical_variant, preset_names, resolve_preset
from .envs import (DEFAULT_EPISODES, ENV_NAMES, EnvSpec, canonical_name,
                   make_env)
from .student import StudentConfig, train_student
from .teacher import (AGGREGATION_MODES, build_knowledge, load_knowledge,
                      save_knowledge, train_teacher)

CURVE_POINTS = 200
RUN_CSV_HEADER = "variant,env,seed,episode,reward,steps,cumulative_steps,reached_accept"
CURVE_CSV_HEADER = "x,mean,stderr,n"

DEFAULT_SEEDS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class ExperimentConfig:
    environments: tuple = ENV_NAMES
    variants: tuple = ("cadent", "ad", "pd", "no_transfer", "no_trust_gate")
    seeds: tuple = DEFAULT_SEEDS
    episodes: dict = field(default_factory=dict)   # env -> override
    layout_seed: int = 12
    teacher_episodes: int = 5000
    teacher_seed: int = 7
    base: StudentConfig = field(default_factory=StudentConfig)
    aggregation: str = "visitation_weighted"
    # "auto": 0.8 x the no_transfer final-100 mean, per environment;
    # otherwise a {env: float} mapping
    threshold: object = "auto"
    threshold_window: int = 20
    omega0: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "environments",
                           tuple(canonical_name(e) for e in self.environments))
        object.__setattr__(self, "variants",
                           tuple(canonical_variant(v) for v in self.variants))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.environments:
            raise ValueError("need at least one environment")
        if not self.variants:
            raise ValueError("need at least one variant")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.aggregation not in AGGREGATION_MODES:
            raise ValueError(f"aggregation must be one of {AGGREGATION_MODES}")
        if self.threshold != "auto":
            if not isinstance(self.threshold, dict):
                raise ValueError("threshold must be 'auto' or an {env: float} "
                                 "mapping")
            object.__setattr__(
                self, "threshold",
                {canonical_name(k): float(v)
                 for k, v in self.threshold.items()})
        if self.threshold == "auto" and "no_transfer" not in self.variants:
            raise ValueError("auto thresholds need the no_transfer variant "
                             "in the grid")
        if self.threshold_window < 1:
            raise ValueError("threshold_window must be positive")
        unknown = set(self.episodes) - set(self.environments)
        if unknown:
            raise ValueError(f"episode overrides for unknown environments "
                             f"{sorted(unknown)}")

    def episodes_for(self, env_name):
        return int(self.episodes.get(env_name, DEFAULT_EPISODES[env_name]))

    def with_(self, **kw):
        return replace(self, **kw)

    def to_json(self):
        return {
            "environments": list(self.environments),
            "variants": list(self.variants),
            "seeds": list(self.seeds),
            "episodes": dict(self.episodes),
            "layout_seed": self.layout_seed,
            "teacher_episodes": self.teacher_episodes,
            "teacher_seed": self.teacher_seed,
            "base": self.base.to_json(),
            "aggregation": self.aggregation,
            "threshold": (self.threshold if self.threshold == "auto"
                          else dict(self.threshold)),
            "threshold_window": self.threshold_window,
            "omega0": self.omega0,
        }

    @classmethod
    def from_json(cls, payload):
        payload = dict(payload)
        if "base" in payload:
            payload["base"] = StudentConfig.from_json(payload["base"])
        for key in ("environments", "variants", "seeds"):
            if key in payload:
                payload[key] = tuple(payload[key])
        return cls(**payload)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def config_hash(self):
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class EpisodeRecord:
    variant: str
    env: str
    seed: int
    episode: int
    reward: float
    steps: int
    cumulative_steps: int
    reached_accept: bool

    def csv_row(self):
        return (f"{self.variant},{self.env},{self.seed},{self.episode},"
                f"{self.reward!r},{self.steps},{self.cumulative_steps},"
                f"{int(self.reached_accept)}")


def records_from_result(env_name, variant, seed, result):
    """Flatten one training result into per-episode records."""
    records = []
    cumulative = 0
    for ep in range(len(result.ep_reward)):
        cumulative += int(result.ep_steps[ep])
        records.append(EpisodeRecord(
            variant=variant, env=env_name, seed=seed, episode=ep,
            reward=float(result.ep_reward[ep]),
            steps=int(result.ep_steps[ep]),
            cumulative_steps=cumulative,
            reached_accept=bool(result.ep_accept[ep])))
    return records


def write_run_csv(path, records):
    lines = [RUN_CSV_HEADER]
    lines.extend(r.csv_row() for r in records)
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_run_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != RUN_CSV_HEADER:
        raise ValueError(f"{path}: missing or wrong header")
    records = []
    for line in lines[1:]:
        v, e, seed, ep, rew, steps, cum, acc = line.split(",")
        records.append(EpisodeRecord(
            variant=v, env=e, seed=int(seed), episode=int(ep),
            reward=float(rew), steps=int(steps), cumulative_steps=int(cum),
            reached_accept=bool(int(acc))))
    return records


def _mean_stderr(values):
    """Sample mean and standard error; a single sample has stderr 0.0."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if len(arr) < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(len(arr)))


def aggregate_per_episode(runs, metric):
    """Per-episode mean/stderr across runs of equal length.

    `metric` picks the record field ("reward" or "steps"). Returns a list of
    (episode, mean, stderr, n) rows.
    """
    lengths = {len(r) for r in runs}
    if len(lengths) != 1:
        raise ValueError(f"runs have unequal lengths {sorted(lengths)}")
    rows = []
    for ep in range(lengths.pop()):
        vals = [float(getattr(run[ep], metric)) for run in runs]
        mean, err = _mean_stderr(vals)
        rows.append((ep, mean, err, len(vals)))
    return rows


def aggregate_vs_cumulative_steps(runs, points=CURVE_POINTS):
    """Reward against environment steps consumed, on a common grid.

    Each run is a step function of cumulative steps (last value carried
    forward; the first episode's value backfills the region before it
    completes). The grid spans up to the smallest run total so every grid
    point averages over all runs.
    """
    total = min(run[-1].cumulative_steps for run in runs)
    grid = [max(1, round(total * (i + 1) / points)) for i in range(points)]
    grid = sorted(set(grid))
    rows = []
    cursors = [0] * len(runs)
    for x in grid:
        vals = []
        for i, run in enumerate(runs):
            c = cursors[i]
            while (c + 1 < len(run)
                   and run[c].cumulative_steps <= x):
                c += 1
            # run[c] is the first episode not yet finished at x (or the
            # last); the value at x is the previous one, backfilled at the
            # start
            if run[c].cumulative_steps <= x:
                val = run[c].reward
            elif c == 0:
                val = run[0].reward
            else:
                val = run[c - 1].reward
            cursors[i] = c
            vals.append(float(val))
        mean, err = _mean_stderr(vals)
        rows.append((x, mean, err, len(vals)))
    return rows


def write_curve_csv(path, rows):
    lines = [CURVE_CSV_HEADER]
    for x, mean, err, n in rows:
        lines.append(f"{x},{mean!r},{err!r},{n}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def steps_to_threshold(records, threshold, window):
    """Cumulative steps when the trailing-window mean reward first clears
    `threshold`. Only full windows count; None when never reached."""
    if window < 1:
        raise ValueError("window must be positive")
    if len(records) < window:
        return None
    acc = 0.0
    for i, rec in enumerate(records):
        acc += rec.reward
        if i >= window:
            acc -= records[i - window].reward
        if i >= window - 1 and acc / window >= threshold:
            return records[i].cumulative_steps
    return None


def final_window_mean(records, window=100):
    tail = records[-window:]
    return sum(r.reward for r in tail) / len(tail)


def _sorted_grid(config):
    return [(e, v, s) for e in config.environments
            for v in config.variants for s in config.seeds]


def _run_stream(env_name, variant):
    """Stable stream id per (env, variant), independent of config order."""
    return ENV_NAMES.index(env_name) * 16 + preset_names().index(variant)


def _train_cell(args):
    """One (env, variant, seed) student run; used by worker processes too."""
    (config_json, env_name, variant, seed, knowledge_path) = args
    config = ExperimentConfig.from_json(config_json)
    spec = EnvSpec(name=env_name, variant="target",
                   layout_seed=config.layout_seed)
    env = make_env(spec)
    student_cfg = resolve_preset(variant, config.base,
                                 omega0=(config.omega0 if variant ==
                                         "fixed_trust" else None))
    knowledge = (load_knowledge(knowledge_path)
                 if variant != "no_transfer" else None)
    result = train_student(env, knowledge, student_cfg,
                           episodes=config.episodes_for(env_name),
                           seed=seed, stream=_run_stream(env_name, variant))
    records = records_from_result(env_name, variant, seed, result)
    diag = {
        "novel_transitions": result.diagnostics.novel_transitions,
        "max_abs_update": result.diagnostics.max_abs_update,
        "soft_violations": result.diagnostics.soft_violations,
        "bound": result.bound,
    }
    return (env_name, variant, seed), records, diag


def run_experiment(config, out_dir, only=None, parallel=1, progress=None):
    """Execute the full grid and write all artifacts under `out_dir`.

    `only` optionally restricts to (env, variant) pairs, e.g.
    {"env": {"dungeon_quest"}, "variant": {"cadent"}}; filtered runs produce
    byte-identical results to the same cells of the full grid. Returns the
    summary dict.
    """
    out_dir = os.path.abspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    for sub in ("knowledge", "runs", "curves"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    config.save(os.path.join(out_dir, "config.json"))
    grid = _sorted_grid(config)
    if only:
        envs = only.get("env")
        variants = only.get("variant")
        grid = [(e, v, s) for (e, v, s) in grid
                if (not envs or e in envs) and (not variants or v in variants)]
        if not grid:
            raise ValueError("the only-filter removed every run")
    say = progress or (lambda msg: None)

    # stage 1: teachers and distilled knowledge, one per environment
    knowledge_paths = {}
    for env_name in sorted({e for (e, _v, _s) in grid}):
        needs_teacher = any(v != "no_transfer" for (e, v, _s) in grid
                            if e == env_name)
        path = os.path.join(out_dir, "knowledge", f"{env_name}.json")
        knowledge_paths[env_name] = path
        if not needs_teacher:
            continue
        say(f"teacher: {env_name}")
        spec = EnvSpec(name=env_name, variant="source",
                       layout_seed=config.layout_seed)
        env = make_env(spec)
        result = train_teacher(env, params=config.base.learn,
                               episodes=config.teacher_episodes,
                               seed=config.teacher_seed,
                               stream=ENV_NAMES.index(env_name))
        knowledge = build_knowledge(result, env.dfa, tau=config.base.learn.tau,
                                    aggregation=config.aggregation)
        save_knowledge(knowledge, path)

    # stage 2: the student grid
    config_json = config.to_json()
    tasks = [(config_json, e, v, s, knowledge_paths[e]) for (e, v, s) in grid]
    results = {}
    diags = {}
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            for key, records, diag in pool.map(_train_cell, tasks):
                say(f"run: {key}")
                results[key] = records
                diags[key] = diag
    else:
        for task in tasks:
            key, records, diag = _train_cell(task)
            say(f"run: {key}")
            results[key] = records
            diags[key] = diag
    for (e, v, s), records in sorted(results.items()):
        path = os.path.join(out_dir, "runs", f"{e}__{v}__seed{s}.csv")
        write_run_csv(path, records)

    # stage 3: aggregation and summary
    cells = sorted({(e, v) for (e, v, _s) in results})
    for (e, v) in cells:
        runs = [results[(e, v, s)] for s in config.seeds
                if (e, v, s) in results]
        base = os.path.join(out_dir, "curves", f"{e}__{v}__")
        write_curve_csv(base + "reward_per_episode.csv",
                        aggregate_per_episode(runs, "reward"))
        write_curve_csv(base + "steps_per_episode.csv",
                        aggregate_per_episode(runs, "steps"))
        write_curve_csv(base + "reward_vs_cumulative_steps.csv",
                        aggregate_vs_cumulative_steps(runs))
    summary = build_summary(config, results, diags)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _thresholds(config, results):
    """Per-env reward threshold: explicit, or 0.8 x no_transfer final mean."""
    out = {}
    for env_name in sorted({e for (e, _v, _s) in results}):
        if config.threshold != "auto":
            if env_name not in config.threshold:
                raise ValueError(f"no threshold configured for {env_name}")
            out[env_name] = float(config.threshold[env_name])
            continue
        finals = [final_window_mean(records)
                  for (e, v, _s), records in sorted(results.items())
                  if e == env_name and v == "no_transfer"]
        if not finals:
            raise ValueError(f"auto threshold for {env_name} needs "
                             f"no_transfer runs")
        out[env_name] = 0.8 * (sum(finals) / len(finals))
    return out


def build_summary(config, results, diags):
    """Sample-efficiency and final-performance tables plus provenance."""
    thresholds = _thresholds(config, results)
    cells = sorted({(e, v) for (e, v, _s) in results})
    table = {}
    for (e, v) in cells:
        seeds = [s for s in config.seeds if (e, v, s) in results]
        runs = [results[(e, v, s)] for s in seeds]
        stt, censored = [], 0
        for records in runs:
            val = steps_to_threshold(records, thresholds[e],
                                     config.threshold_window)
            if val is None:
                censored += 1
                val = records[-1].cumulative_steps
            stt.append(val)
        finals = [final_window_mean(records) for records in runs]
        f_mean, f_err = _mean_stderr(finals)
        s_mean, s_err = _mean_stderr([float(x) for x in stt])
        accepts = [sum(r.reached_accept for r in records[-100:]) /
                   min(100, len(records)) for records in runs]
        table.setdefault(e, {})[v] = {
            "seeds": seeds,
            "steps_to_threshold": stt,
            "steps_to_threshold_mean": s_mean,
            "steps_to_threshold_stderr": s_err,
            "censored_runs": censored,
            "final_reward": finals,
            "final_reward_mean": f_mean,
            "final_reward_stderr": f_err,
            "final_accept_rate_mean": float(np.mean(accepts)),
            "novel_transitions": [diags[(e, v, s)]["novel_transitions"]
                                  for s in seeds],
            "soft_bound_violations": [diags[(e, v, s)]["soft_violations"]
                                      for s in seeds],
            "max_abs_update": max(diags[(e, v, s)]["max_abs_update"]
                                  for s in seeds),
            "update_bound": max(diags[(e, v, s)]["bound"] for s in seeds),
        }
    norm = {}
    for env_name in table:
        spec = EnvSpec(name=env_name, variant="target",
                       layout_seed=config.layout_seed)
        env = make_env(spec)
        n_progress = sum(1 for (q, _s), t in env.dfa.transitions.items()
                         if t != q)
        norm[env_name] = {
            "reward_min": env.max_steps * -0.01,
            "reward_max": n_progress * 1.0 + 10.0,
        }
    return {
        "config": config.to_json(),
        "config_hash": config.config_hash(),
        "thresholds": thresholds,
        "threshold_window": config.threshold_window,
        "normalization": norm,
        "results": table,
    }
