"""Command-line interface.

Every command reads an optional JSON config (``--config``) whose keys match
the command's long options; options given on the command line override it.
The merged configuration is written next to the outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .agent import (
    CheckpointError,
    PolicyCheckpoint,
    TrainerConfig,
    load_checkpoint,
    policy_stop,
    save_checkpoint,
    train,
)
from .agent.checkpoint import read_header
from .baselines import (
    DEFAULT_KNEE_MIN_PREFIX,
    DEFAULT_KNEE_RHO,
    DEFAULT_TM_K,
    knee_stop,
    oracle_stop,
    target_method_stop,
)
from .classifier import BatchEstimator
from .corpus import aurc, generate_synthetic, load_run_and_qrels, make_batches, write_run_and_qrels
from .environment import EnvConfig, make_envs
from .evaluation import aggregate, score_topic, write_recall_curve_csv, write_results_csv, write_summary_csv

log = logging.getLogger("grlstop")

METHODS = ("grlstop", "oracle", "knee", "tm")


class ConfigError(ValueError):
    pass


def _floats(s):
    return [float(x) for x in str(s).split(",") if x.strip()] if not isinstance(s, list) else [float(x) for x in s]


def _strs(s):
    return [x.strip() for x in str(s).split(",") if x.strip()] if not isinstance(s, list) else [str(x) for x in s]


# key -> (default, converter, help)
SYNTH_KEYS = {
    "out": (None, str, "output directory"),
    "topics": (10, int, "number of topics"),
    "n_docs": (2000, int, "documents per topic"),
    "prevalence": (0.02, float, "fraction of relevant documents"),
    "quality": ("high", str, "ranking quality: low, mid, high or a decay rate >= 0 (inf = perfect)"),
    "seed": (None, int, "random seed (required)"),
    "doc_length": (40, int, "tokens per document"),
    "signal_fraction": (0.25, float, "share of signal tokens in relevant documents"),
    "noise_fraction": (0.0, float, "share of signal tokens in non-relevant documents"),
    "prefix": ("syn", str, "topic id prefix"),
    "overwrite": (False, bool, "replace existing output files"),
}

_TRAINER_KEYS = {
    f: (None, type(v), f"trainer: {f}")
    for f, v in TrainerConfig().to_dict().items()
    if f != "seed"
}

TRAIN_KEYS = {
    "run": (None, str, "TREC run file"),
    "qrels": (None, str, "TREC qrels file"),
    "docs": (None, str, "doc text sidecar (doc_id<TAB>tokens); required with the classifier"),
    "checkpoint": (None, str, "checkpoint output path"),
    "log": (None, str, "per-rollout JSON-lines log path (default: <checkpoint>.log.jsonl)"),
    "resume": (None, str, "checkpoint to continue training from"),
    "batches": (100, int, "number of batches B"),
    "targets": ([0.7, 0.8, 0.9, 1.0], _floats, "target recalls sampled per episode"),
    "m": (1.0, float, "reward exponent before the target batch"),
    "n": (1.0, float, "reward exponent after the target batch"),
    "classifier": (True, bool, "observe classifier estimates for unexamined batches"),
    "seed": (None, int, "random seed (required)"),
    **_TRAINER_KEYS,
}

EVAL_KEYS = {
    "checkpoint": (None, str, "trained checkpoint (needed for the grlstop method)"),
    "run": (None, str, "TREC run file"),
    "qrels": (None, str, "TREC qrels file"),
    "docs": (None, str, "doc text sidecar"),
    "out": (None, str, "output directory"),
    "targets": ([0.7, 0.8, 0.9, 1.0], _floats, "target recalls"),
    "methods": (["grlstop"], _strs, f"comma-separated subset of {','.join(METHODS)}"),
    "batches": (None, int, "batch count; must match the checkpoint"),
    "knee_rho": (DEFAULT_KNEE_RHO, float, "knee slope-ratio threshold"),
    "knee_min_prefix": (DEFAULT_KNEE_MIN_PREFIX, int, "shortest prefix the knee rule may stop at"),
    "tm_k": (DEFAULT_TM_K, int, "relevant documents the target method samples for"),
    "seed": (0, int, "seed for sampling baselines"),
    "curves": (False, bool, "also write rank,recall curves per topic"),
}

COMPARE_KEYS = {**EVAL_KEYS, "methods": (list(METHODS), _strs, EVAL_KEYS["methods"][2])}


def _add_keys(p, keys):
    p.add_argument("--config", help="JSON config file; command-line options override it")
    for key, (default, conv, help_) in keys.items():
        flag = "--" + key.replace("_", "-")
        if conv is bool:
            p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None, help=help_)
        else:
            p.add_argument(flag, dest=key, default=None, help=f"{help_} (default: {default})")


def _convert(key, value, keys):
    conv = keys[key][1]
    if value is None:
        return None
    try:
        if conv is bool:
            if isinstance(value, bool):
                return value
            raise ValueError
        return conv(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key!r}: {value!r}") from None


def resolve_config(args, keys) -> dict:
    cfg = {k: v[0] for k, v in keys.items()}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(keys))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for k, v in loaded.items():
            cfg[k] = _convert(k, v, keys)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = _convert(k, v, keys)
    return cfg


def _require(cfg, *names):
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")


def _require_files(cfg, *names):
    for n in names:
        if cfg.get(n) is not None and not Path(cfg[n]).is_file():
            raise ConfigError(f"{n}: no such file {cfg[n]!r}")


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------

def cmd_synth(cfg: dict) -> int:
    _require(cfg, "out", "seed")
    out = Path(cfg["out"])
    files = [out / "run.txt", out / "qrels.txt", out / "docs.tsv"]
    if any(f.exists() for f in files) and not cfg["overwrite"]:
        raise ConfigError(f"{out} already holds a corpus; pass --overwrite to replace it")
    topics = generate_synthetic(
        cfg["topics"], cfg["n_docs"], cfg["prevalence"], cfg["quality"], cfg["seed"],
        doc_length=cfg["doc_length"], signal_fraction=cfg["signal_fraction"],
        noise_fraction=cfg["noise_fraction"], prefix=cfg["prefix"],
    )  # fmt: skip
    out.mkdir(parents=True, exist_ok=True)
    write_run_and_qrels(topics, *files)
    _write_json(out / "synth_config.json", cfg)
    scores = [aurc(t) for t in topics]
    for t, a in zip(topics, scores):
        print(f"{t.topic_id}\trelevant={t.num_relevant}\taurc={a:.4f}")
    print(f"mean aurc={np.mean(scores):.4f}")
    return 0


def _load_topics(cfg):
    _require(cfg, "run", "qrels")
    _require_files(cfg, "run", "qrels", "docs")
    return load_run_and_qrels(cfg["run"], cfg["qrels"], cfg.get("docs"))


def cmd_train(cfg: dict) -> int:
    _require(cfg, "run", "qrels", "checkpoint", "seed")
    _require_files(cfg, "resume")
    if not cfg["targets"]:
        raise ConfigError("targets must not be empty")
    use_clf = cfg["classifier"]
    if use_clf and cfg.get("docs") is None:
        raise ConfigError("the classifier needs document text: pass --docs or --no-classifier")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        topics = _load_topics(cfg)
    kept = []
    for t in topics:
        if t.num_relevant == 0:
            log.warning("excluding topic %s: no relevant documents", t.topic_id)
        else:
            kept.append(t)
    if not kept:
        raise ConfigError("no trainable topics (all have zero relevant documents)")

    env_cfg = EnvConfig(B=cfg["batches"], m=cfg["m"], n=cfg["n"], use_classifier=use_clf, targets=tuple(cfg["targets"]))
    overrides = {k: cfg[k] for k in _TRAINER_KEYS if cfg.get(k) is not None}
    trainer_cfg = TrainerConfig.defaults_for(use_clf, seed=cfg["seed"], **overrides)

    rankings = [make_batches(t, env_cfg.B) for t in kept]
    for br in rankings:
        if br.n_batches != env_cfg.B:
            raise ConfigError(
                f"topic {br.topic.topic_id} ({br.topic.n_docs} docs) yields {br.n_batches} batches, not {env_cfg.B}"
            )
    policy, start_rollout, start_steps = None, 0, 0
    if cfg.get("resume"):
        prev = load_checkpoint(cfg["resume"])
        prev.check_env(env_cfg)
        policy = prev.policy
        start_rollout = int(prev.meta.get("rollouts", 0))
        start_steps = int(prev.meta.get("steps", 0))

    envs = make_envs(env_cfg, rankings, seed=cfg["seed"])
    ckpt_path = Path(cfg["checkpoint"])
    log_path = Path(cfg["log"]) if cfg.get("log") else ckpt_path.with_name(ckpt_path.name + ".log.jsonl")
    ckpt_path.parent.mkdir(parents=True, exist_ok=True)
    with open(log_path, "w", encoding="utf-8") as log_fh:

        def on_rollout(entry):
            log_fh.write(json.dumps(entry, sort_keys=True) + "\n")

        result = train(envs, trainer_cfg, policy, start_rollout=start_rollout, start_steps=start_steps, on_rollout=on_rollout)

    meta = {
        "rollouts": result.rollouts,
        "steps": result.steps,
        "best_mean_return": result.best_mean_return,
        "stopped_early": result.stopped_early,
        "topics": [t.topic_id for t in kept],
        "resumed_from_rollout": start_rollout,
    }
    save_checkpoint(ckpt_path, PolicyCheckpoint(result.policy, trainer_cfg, env_cfg, meta))
    _write_json(ckpt_path.with_name(ckpt_path.name + ".config.json"), cfg)
    print(
        f"trained {result.steps - start_steps} steps over {len(kept)} topics "
        f"(rollouts {start_rollout + 1}..{result.rollouts}, best mean return {result.best_mean_return:.4f}); "
        f"wrote {ckpt_path}"
    )
    return 0


def cmd_eval(cfg: dict) -> int:
    _require(cfg, "run", "qrels", "out")
    methods = cfg["methods"]
    bad = sorted(set(methods) - set(METHODS))
    if bad:
        raise ConfigError(f"unknown methods: {', '.join(bad)}")
    if not cfg["targets"]:
        raise ConfigError("targets must not be empty")
    ckpt = None
    if "grlstop" in methods:
        _require(cfg, "checkpoint")
        _require_files(cfg, "checkpoint")
        ckpt = load_checkpoint(cfg["checkpoint"])
        if cfg.get("batches") is not None and cfg["batches"] != ckpt.env_config.B:
            raise ConfigError(f"requested B={cfg['batches']} but checkpoint was trained with B={ckpt.env_config.B}")
        if ckpt.env_config.use_classifier and cfg.get("docs") is None:
            raise ConfigError("checkpoint uses the classifier: pass --docs")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        topics = _load_topics(cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    if cfg["curves"]:
        (out / "curves").mkdir(exist_ok=True)

    tm_seeds = np.random.SeedSequence(cfg["seed"]).spawn(len(topics))
    results = []
    for idx, topic in enumerate(topics):
        if topic.num_relevant == 0:
            log.warning("skipping topic %s: no relevant documents", topic.topic_id)
            continue
        if cfg["curves"]:
            write_recall_curve_csv(out / "curves" / f"{topic.topic_id}.csv", topic)
        br = estimator = None
        if ckpt is not None:
            br = make_batches(topic, ckpt.env_config.B)
            if br.n_batches != ckpt.env_config.B:
                raise ConfigError(
                    f"topic {topic.topic_id} yields {br.n_batches} batches; checkpoint needs {ckpt.env_config.B}"
                )
            if ckpt.env_config.use_classifier:
                estimator = BatchEstimator(br)
        knee = knee_stop(topic, cfg["knee_min_prefix"], cfg["knee_rho"]) if "knee" in methods else None
        tm = None
        if "tm" in methods:
            tm = target_method_stop(topic, cfg["tm_k"], np.random.default_rng(tm_seeds[idx]))
        for target in cfg["targets"]:
            for method in methods:
                if method == "grlstop":
                    decision = policy_stop(ckpt.policy, ckpt.env_config, br, target, estimator=estimator)
                elif method == "oracle":
                    decision = oracle_stop(topic, target)
                elif method == "knee":
                    decision = knee
                else:
                    decision = tm
                results.append(score_topic(topic, target, decision, method))
    if not results:
        raise ConfigError("no scorable topics")
    write_results_csv(out / "results.csv", results)
    summary = aggregate(results)
    write_summary_csv(out / "summary.csv", summary)
    _write_json(out / "eval_config.json", cfg)
    print("method\ttarget\ttopics\trecall\treliability\tcost\tcost_diff")
    for r in summary:
        print("\t".join(str(x) for x in r.row()))
    return 0


def cmd_inspect(path) -> int:
    header = read_header(path)
    print(json.dumps(header, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grlstop", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    _add_keys(sub.add_parser("synth", help="generate a synthetic ranked corpus"), SYNTH_KEYS)
    _add_keys(sub.add_parser("train", help="train one stopping policy over all topics"), TRAIN_KEYS)
    _add_keys(sub.add_parser("eval", help="evaluate a checkpoint (and optional baselines)"), EVAL_KEYS)
    _add_keys(sub.add_parser("compare", help="policy and all baselines in one table"), COMPARE_KEYS)
    ins = sub.add_parser("inspect-checkpoint", help="print a checkpoint header")
    ins.add_argument("path")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "synth":
            return cmd_synth(resolve_config(args, SYNTH_KEYS))
        if args.command == "train":
            return cmd_train(resolve_config(args, TRAIN_KEYS))
        if args.command == "eval":
            return cmd_eval(resolve_config(args, EVAL_KEYS))
        if args.command == "compare":
            return cmd_eval(resolve_config(args, COMPARE_KEYS))
        return cmd_inspect(args.path)
    except (ConfigError, CheckpointError, ValueError, OSError) as exc:
        print(f"grlstop: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
