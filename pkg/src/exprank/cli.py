"""Command-line entry point.

Subcommands mirror the experiment pipelines; flags override values read
from ``--config``.  Exit status is 0 on success and 1 with a one-line
diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .data import load_id_maps, load_triples, save_id_maps, save_triples, split
from .embeddings import dump_embedding_text, validate_embedding_file
from .evaluate import evaluate_explanation_ranking, evaluate_joint, report_rows, write_csv
from .harness import (
    ParamScorer, fit_named_model, run_alpha_sweep, run_comparison,
    run_mu_sweep, run_report, run_sparsity, run_synth, scorer_kind,
)
from .params import load_checkpoint, save_checkpoint
from .synthetic import SyntheticSpec


_CONFIG_FLAGS = {
    "dataset": str, "triples": str, "embeddings": str, "out_dir": str,
    "models": str, "d": int, "gamma": float, "reg": float, "epochs": int,
    "mu": float, "alpha": float, "seed": int, "train_fraction": float,
    "validation_fraction": float, "repetitions": int, "mu_sweep": str,
    "alpha_sweep": str, "sparsity_ratios": str, "top_n": int, "top_m": int,
    "n_neighbors": int, "init_scale": float, "log_every": int,
}


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file")
    for name, typ in _CONFIG_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        if name == "reg":
            p.add_argument("--lambda", dest="reg", type=float, default=None)
            continue
        p.add_argument(flag, dest=name, type=typ, default=None)


def _build_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    for name in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is None:
            continue
        if name == "models":
            updates[name] = tuple(v.strip() for v in value.split(","))
        elif name in ("mu_sweep", "alpha_sweep", "sparsity_ratios"):
            updates[name] = tuple(float(v) for v in value.split(","))
        else:
            updates[name] = value
    return dataclasses.replace(config, **updates)


def _cmd_split(args) -> int:
    from .harness import load_dataset

    config = _build_config(args)
    store = load_dataset(config)
    spec = config.split_spec()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_id_maps(store, out / "ids")
    reps = [args.repetition] if args.repetition is not None else range(spec.repetitions)
    for rep in reps:
        train, valid, test = split(store, spec, rep)
        save_triples(train, out / f"rep{rep}.train.tsv")
        save_triples(valid, out / f"rep{rep}.valid.tsv")
        save_triples(test, out / f"rep{rep}.test.tsv")
    print(f"wrote splits to {out}")
    return 0


def _load_with_maps(path, maps_prefix):
    maps = load_id_maps(maps_prefix) if maps_prefix else None
    return load_triples(path, id_mode="raw", id_maps=maps)


def _cmd_train(args) -> int:
    config = _build_config(args)
    store = _load_with_maps(config.triples, args.id_maps)
    hp = config.hyperparams()
    model_name = config.models[0]
    model = fit_named_model(model_name, config, store, hp)
    if model_name in ("rand", "rucf", "ricf"):
        print("nothing to checkpoint for a non-factor model", file=sys.stderr)
        return 1
    meta = {"mu": hp.mu, "alpha": hp.alpha}
    report = model.report_
    if report.projection is not None:
        meta["W"] = report.projection[0]
        meta["c"] = report.projection[1]
    save_checkpoint(args.checkpoint, model.params_, scorer_kind(model_name), meta)
    print(f"trained {model_name}; checkpoint at {args.checkpoint}")
    return 0


def _cmd_eval(args) -> int:
    config = _build_config(args)
    params, kind, meta = load_checkpoint(args.checkpoint)
    if args.mu is not None:
        mu = args.mu
    elif "mu" in meta:
        mu = float(meta["mu"])
    else:
        mu = config.mu
    gate = None
    if kind == "bper+":
        from .embeddings import read_embedding_file

        raw, _ = read_embedding_file(config.embeddings)
        gate = raw.astype(float) @ meta["W"].T + meta["c"]
    scorer = ParamScorer(kind, params, mu=mu, gate=gate)
    test = _load_with_maps(args.test, args.id_maps)
    rows = []
    if args.joint:
        train = _load_with_maps(args.train, args.id_maps)
        rec_rep, exp_rep = evaluate_joint(scorer, train, test, config.top_m, config.top_n)
        rows += report_rows(rec_rep, dataset=config.dataset, model=kind,
                            repetition=0, hp=config.hyperparams(mu=mu),
                            task="recommendation")
        rows += report_rows(exp_rep, dataset=config.dataset, model=kind,
                            repetition=0, hp=config.hyperparams(mu=mu),
                            task="explanation")
    else:
        report = evaluate_explanation_ranking(scorer, test, config.top_n)
        rows += report_rows(report, dataset=config.dataset, model=kind,
                            repetition=0, hp=config.hyperparams(mu=mu),
                            task="explanation")
    out = Path(config.out_dir) / "eval.csv"
    write_csv(out, rows)
    for row in rows:
        print(f"{row['task']} {row['metric']} = {row['value']}")
    return 0


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n_users=args.n_users, n_items=args.n_items,
        n_explanations=args.n_explanations, d_true=args.d_true,
        records_per_user=args.records_per_user,
        expls_per_record=args.expls_per_record,
        noise=args.noise, mu_true=args.mu_true, seed=args.seed,
    )
    paths = run_synth(spec, args.out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _cmd_pipeline(runner):
    def cmd(args) -> int:
        config = _build_config(args)
        out = runner(config)
        print(f"wrote {out}")
        return 0

    return cmd


def _cmd_report(args) -> int:
    produced = run_report(args.csv_dir)
    for path in produced:
        print(f"wrote {path}")
    return 0


def _cmd_validate_embeddings(args) -> int:
    info = validate_embedding_file(args.path, args.count or None)
    print(f"ok: count={info['count']} dim={info['dim']} tag={info['tag']!r}")
    if args.dump:
        dump_embedding_text(args.path, args.dump)
        print(f"wrote {args.dump}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exprank",
        description="Train and evaluate explanation-ranking models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="write train/valid/test splits")
    _add_config_flags(p)
    p.add_argument("--repetition", type=int, default=None)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="train one model and write a checkpoint")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--id-maps", help="prefix of id map files", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a test file")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--train", help="training triples (for --joint exclusion)")
    p.add_argument("--id-maps", default=None)
    p.add_argument("--joint", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare", help="multi-model comparison")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_pipeline(run_comparison))

    p = sub.add_parser("sweep-mu", help="blend-weight sweep")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_pipeline(run_mu_sweep))

    p = sub.add_parser("sweep-alpha", help="joint-ranking weight sweep")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_pipeline(run_alpha_sweep))

    p = sub.add_parser("sparsity", help="training-ratio ablation")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_pipeline(run_sparsity))

    p = sub.add_parser("synth", help="generate a planted dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-users", type=int, default=500)
    p.add_argument("--n-items", type=int, default=300)
    p.add_argument("--n-explanations", type=int, default=400)
    p.add_argument("--d-true", type=int, default=10)
    p.add_argument("--records-per-user", type=int, default=8)
    p.add_argument("--expls-per-record", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--mu-true", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("report", help="emit plot-data files from result CSVs")
    p.add_argument("csv_dir")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("validate-embeddings", help="check an embedding file")
    p.add_argument("path")
    p.add_argument("--count", type=int, default=0)
    p.add_argument("--dump", default=None)
    p.set_defaults(func=_cmd_validate_embeddings)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # single-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
