"""Experiment pipelines: comparison, sweeps, sparsity ablation, reports.

Every pipeline is deterministic from its config: repetition splits,
trainer seeds and CSV row order are all derived from the config seed,
so re-running a command reproduces its outputs byte for byte.
"""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np

from . import evaluate
from .config import ExperimentConfig
from .data import (
    InteractionStore, load_id_maps, load_triples, save_id_maps, save_triples,
    split, subsample_training,
)
from .embeddings import load_embedding_table, write_embedding_file
from .estimators import JOINT_MODELS, make_model
from .evaluate import (
    evaluate_explanation_ranking, evaluate_joint, format_float, report_rows,
    write_csv,
)
from .params import EmbeddingTable, Hyperparams, save_checkpoint
from .synthetic import SyntheticSpec, generate_synthetic, synthetic_embeddings

NONJOINT_OF = {"bper-j": "bper", "cd-j": "cd", "pitf-j": "pitf"}


class ParamScorer:
    """Evaluation scorer over fixed parameters loaded from a checkpoint."""

    def __init__(self, kind: str, params, mu: float = 0.5, gate=None):
        self.kind = kind
        self.params = params
        self.mu = mu
        self.gate = gate
        if kind in ("bper+",) and gate is None:
            raise ValueError("bper+ scorer needs the projected-embedding gate")

    def explanation_scores(self, u: int, i: int) -> np.ndarray:
        p, kind = self.params, self.kind
        if kind == "cd":
            return (p.P[u] * p.Q[i]) @ p.O.T
        if kind == "pitf":
            return p.P[u] @ p.OU.T + p.Q[i] @ p.OI.T
        ou = p.OU if self.gate is None else p.OU * self.gate
        oi = p.OI if self.gate is None else p.OI * self.gate
        user_side = p.P[u] @ ou.T + p.bU
        item_side = p.Q[i] @ oi.T + p.bI
        return self.mu * user_side + (1.0 - self.mu) * item_side

    def item_scores(self, u: int) -> np.ndarray:
        p = self.params
        if self.kind == "cd":
            return p.P[u] @ p.Q.T
        if self.kind == "pitf":
            return p.P[u] @ p.Q.T
        return p.P[u] @ p.Q.T + p.b_item


def scorer_kind(model_name: str) -> str:
    """Checkpoint/scorer family of a model name."""
    if model_name in ("cd", "cd-j"):
        return "cd"
    if model_name in ("pitf", "pitf-j"):
        return "pitf"
    if model_name == "bper+":
        return "bper+"
    return "bper"


def merge_stores(a: InteractionStore, b: InteractionStore) -> InteractionStore:
    """Union of two disjoint splits of the same parent store."""
    records = sorted(a.records + b.records, key=lambda r: (r.user, r.item))
    return a.subset(records)


def load_dataset(config: ExperimentConfig) -> InteractionStore:
    """Load the configured triples; sibling ``ids.*.map`` files (written by
    the synth and split commands) fix the entity universe when present."""
    if not config.triples:
        raise ValueError("config.triples is required")
    prefix = Path(config.triples).parent / "ids"
    if all(
        Path(f"{prefix}.{s}.map").exists()
        for s in ("users", "items", "explanations")
    ):
        return load_triples(config.triples, id_maps=load_id_maps(prefix))
    return load_triples(config.triples, id_mode="raw")


def _load_embeddings(config, store, hp) -> EmbeddingTable:
    if not config.embeddings:
        raise ValueError("bper+ requires config.embeddings")
    return load_embedding_table(
        config.embeddings, store.n_explanations, hp, config.init_scale
    )


def fit_named_model(name, config, train_store, hp: Hyperparams):
    """Instantiate and fit one model on a training store."""
    model = make_model(
        name, hp, n_neighbors=config.n_neighbors,
        init_scale=config.init_scale, log_every=config.log_every,
    )
    if name == "bper+":
        emb = _load_embeddings(config, train_store, hp)
        model.fit(train_store, embeddings=emb)
    else:
        model.fit(train_store)
    return model


def hyperparam_grid(config: ExperimentConfig) -> list[Hyperparams]:
    ds = config.grid_d or (config.d,)
    gammas = config.grid_gamma or (config.gamma,)
    regs = config.grid_lambda or (config.reg,)
    epochss = config.grid_epochs or (config.epochs,)
    return [
        config.hyperparams(d=d, gamma=g, reg=r, epochs=t)
        for d, g, r, t in itertools.product(ds, gammas, regs, epochss)
    ]


def select_hyperparams(
    config, name, train: InteractionStore, valid: InteractionStore,
) -> Hyperparams:
    """Grid selection by validation F1 at the configured cutoff; ties keep
    the earlier grid point."""
    grid = hyperparam_grid(config)
    if len(grid) == 1 or valid.record_count == 0 or name in ("rand", "rucf", "ricf"):
        return grid[0]
    best_hp, best_f1 = grid[0], -1.0
    for hp in grid:
        model = fit_named_model(name, config, train, hp)
        rep = evaluate_explanation_ranking(model, valid, config.top_n)
        if rep.f1 > best_f1:
            best_hp, best_f1 = hp, rep.f1
    return best_hp


def _mean_rows(per_rep: dict, config, task="explanation", cutoff=10):
    """Aggregate {key: [MetricsReport, ...]} into repetition='mean' rows."""
    rows = []
    for key, reports in per_rep.items():
        model, hp, extra = key
        sums = {"ndcg": 0.0, "precision": 0.0, "recall": 0.0, "f1": 0.0}
        for rep in reports:
            for metric, value in rep.as_dict().items():
                sums[metric] += value
        mean = evaluate.MetricsReport(
            sums["ndcg"] / len(reports), sums["precision"] / len(reports),
            sums["recall"] / len(reports), sums["f1"] / len(reports),
            sum(r.unit_count for r in reports), cutoff,
        )
        rows.extend(report_rows(
            mean, dataset=config.dataset, model=model, repetition="mean",
            hp=hp, task=task, extra=extra,
        ))
    return rows


def run_comparison(config: ExperimentConfig) -> Path:
    """Train every configured model on each repetition's training split and
    score the explanation ranking on the held-out pairs."""
    store = load_dataset(config)
    spec = config.split_spec()
    rows = []
    per_model: dict[tuple, list] = {}
    for rep in range(config.repetitions):
        train, valid, test = split(store, spec, rep)
        full_train = merge_stores(train, valid)
        for name in config.models:
            hp = (
                select_hyperparams(config, name, train, valid)
                if config.tune else config.hyperparams()
            )
            model = fit_named_model(name, config, full_train, hp)
            report = evaluate_explanation_ranking(model, test, config.top_n)
            rows.extend(report_rows(
                report, dataset=config.dataset, model=name, repetition=rep,
                hp=hp, task="explanation",
            ))
            per_model.setdefault((name, hp, ""), []).append(report)
    rows.extend(_mean_rows(per_model, config, cutoff=config.top_n))
    out = Path(config.out_dir) / "compare.csv"
    write_csv(out, rows)
    return out


def run_mu_sweep(config: ExperimentConfig) -> Path:
    """Train the blended model once per repetition, then evaluate the same
    checkpoint at every blend weight (the weight only matters at
    inference)."""
    store = load_dataset(config)
    spec = config.split_spec()
    rows = []
    per_point: dict[tuple, list] = {}
    for rep in range(config.repetitions):
        train, valid, test = split(store, spec, rep)
        full_train = merge_stores(train, valid)
        hp = config.hyperparams()
        model = fit_named_model("bper", config, full_train, hp)
        for mu in config.mu_sweep:
            model.set_params(mu=mu)
            hp_mu = config.hyperparams(mu=mu)
            report = evaluate_explanation_ranking(model, test, config.top_n)
            rows.extend(report_rows(
                report, dataset=config.dataset, model="bper", repetition=rep,
                hp=hp_mu, task="explanation", extra=f"mu={format_float(mu)}",
            ))
            per_point.setdefault(
                ("bper", hp_mu, f"mu={format_float(mu)}"), []
            ).append(report)
    rows.extend(_mean_rows(per_point, config, cutoff=config.top_n))
    out = Path(config.out_dir) / "mu_sweep.csv"
    write_csv(out, rows)
    return out


def run_alpha_sweep(config: ExperimentConfig) -> Path:
    """Joint-ranking sweep over the explanation-task weight.

    For each joint model the sweep emits a two-stage report per alpha
    (recommendation over users, explanation over correctly recommended
    pairs) plus a non-joint reference row: the plain counterpart model
    trained separately and evaluated over all test pairs.  The alpha=0
    point doubles as the recommendation-only reference.
    """
    joint_models = [m for m in config.models if m in JOINT_MODELS]
    if not joint_models:
        raise ValueError("alpha sweep needs a joint model (cd-j, pitf-j, bper-j)")
    store = load_dataset(config)
    spec = config.split_spec()
    rows = []
    per_point: dict[tuple, list] = {}
    for rep in range(config.repetitions):
        train, valid, test = split(store, spec, rep)
        full_train = merge_stores(train, valid)
        for name in joint_models:
            plain = NONJOINT_OF[name]
            hp = config.hyperparams()
            ref_model = fit_named_model(plain, config, full_train, hp)
            ref_report = evaluate_explanation_ranking(ref_model, test, config.top_n)
            rows.extend(report_rows(
                ref_report, dataset=config.dataset, model=plain, repetition=rep,
                hp=hp, task="explanation", extra="nonjoint-ref",
            ))
            per_point.setdefault((plain, hp, "nonjoint-ref"), []).append(ref_report)
            for alpha in config.alpha_sweep:
                hp_a = config.hyperparams(alpha=alpha)
                model = fit_named_model(name, config, full_train, hp_a)
                rec_rep, exp_rep = evaluate_joint(
                    model, full_train, test, config.top_m, config.top_n
                )
                extra = "alpha0-ref" if alpha == 0.0 else ""
                for task, rep_obj, cutoff in (
                    ("recommendation", rec_rep, config.top_m),
                    ("explanation", exp_rep, config.top_n),
                ):
                    rows.extend(report_rows(
                        rep_obj, dataset=config.dataset, model=name,
                        repetition=rep, hp=hp_a, task=task, extra=extra,
                    ))
                    per_point.setdefault((name, hp_a, f"{task}|{extra}"), []).append(rep_obj)
    mean_rows = []
    for key, reports in per_point.items():
        model, hp, tag = key
        task, _, extra = tag.partition("|") if "|" in tag else ("explanation", "", tag)
        cutoff = config.top_m if task == "recommendation" else config.top_n
        agg = {m: sum(r.as_dict()[m] for r in reports) / len(reports)
               for m in ("ndcg", "precision", "recall", "f1")}
        mean = evaluate.MetricsReport(
            agg["ndcg"], agg["precision"], agg["recall"], agg["f1"],
            sum(r.unit_count for r in reports), cutoff,
        )
        mean_rows.extend(report_rows(
            mean, dataset=config.dataset, model=model, repetition="mean",
            hp=hp, task=task, extra=extra,
        ))
    rows.extend(mean_rows)
    out = Path(config.out_dir) / "alpha_sweep.csv"
    write_csv(out, rows)
    return out


def run_sparsity(config: ExperimentConfig) -> Path:
    """Subsample training triples to each target ratio of the whole
    dataset and re-train; the test split stays untouched."""
    store = load_dataset(config)
    spec = config.split_spec()
    whole = store.triple_count
    rows = []
    per_point: dict[tuple, list] = {}
    for rep in range(config.repetitions):
        train, valid, test = split(store, spec, rep)
        full_train = merge_stores(train, valid)
        for idx, ratio in enumerate(config.sparsity_ratios):
            target = int(round(ratio * whole))
            if target >= full_train.triple_count:
                sub = full_train
            else:
                sub = subsample_training(
                    full_train, ratio, whole, seed=[config.seed, rep, idx]
                )
            for name in config.models:
                hp = config.hyperparams()
                model = fit_named_model(name, config, sub, hp)
                report = evaluate_explanation_ranking(model, test, config.top_n)
                tag = f"ratio={format_float(ratio)}"
                rows.extend(report_rows(
                    report, dataset=config.dataset, model=name, repetition=rep,
                    hp=hp, task="explanation", extra=tag,
                ))
                per_point.setdefault((name, hp, tag), []).append(report)
    rows.extend(_mean_rows(per_point, config, cutoff=config.top_n))
    out = Path(config.out_dir) / "sparsity.csv"
    write_csv(out, rows)
    return out


def run_synth(spec: SyntheticSpec, out_dir) -> dict[str, Path]:
    """Generate a planted dataset and write all companion files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store, true = generate_synthetic(spec)
    paths = {
        "triples": out_dir / "triples.tsv",
        "truth": out_dir / "truth.npz",
        "embeddings": out_dir / "embeddings.bin",
    }
    save_triples(store, paths["triples"])
    save_id_maps(store, out_dir / "ids")
    save_checkpoint(
        paths["truth"], true, kind="bper",
        meta={"mu": spec.mu_true, "planted": 1},
    )
    raw = synthetic_embeddings(true, seed=spec.seed)
    write_embedding_file(paths["embeddings"], raw, tag="planted-factors-v1")
    return paths


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def _read_csv_rows(path: Path) -> list[dict[str, str]]:
    import csv

    with path.open("r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _curve_file(out_path: Path, sweep_labels: list[str], metric_rows: dict[str, list[str]]):
    with out_path.open("w", encoding="utf-8") as fh:
        fh.write("# metric " + " ".join(sweep_labels) + "\n")
        for metric in sorted(metric_rows):
            fh.write(metric + " " + " ".join(metric_rows[metric]) + "\n")


def _emit_curves(rows, sweep_key, out_dir, stem):
    """Pivot mean rows into one columnar file per (model, task)."""
    produced = []
    groups: dict[tuple[str, str], dict] = {}
    for row in rows:
        if row["repetition"] != "mean" or not row["extra"].startswith(sweep_key):
            continue
        key = (row["model"], row["task"])
        g = groups.setdefault(key, {"labels": [], "metrics": {}})
        label = row["extra"].split("=", 1)[1]
        if label not in g["labels"]:
            g["labels"].append(label)
        g["metrics"].setdefault(row["metric"], {})[label] = row["value"]
    for (model, task), g in sorted(groups.items()):
        out = out_dir / f"{stem}_{model.replace('+', 'plus')}_{task}.dat"
        metric_rows = {
            metric: [values.get(lbl, "nan") for lbl in g["labels"]]
            for metric, values in g["metrics"].items()
        }
        _curve_file(out, g["labels"], metric_rows)
        produced.append(out)
    return produced


def _emit_alpha_curves(rows, out_dir):
    produced = []
    groups: dict[tuple[str, str], dict] = {}
    for row in rows:
        if row["repetition"] != "mean" or row["extra"] == "nonjoint-ref":
            continue
        key = (row["model"], row["task"])
        g = groups.setdefault(key, {"labels": [], "metrics": {}})
        label = row["alpha"]
        if label not in g["labels"]:
            g["labels"].append(label)
        g["metrics"].setdefault(row["metric"], {})[label] = row["value"]
    for (model, task), g in sorted(groups.items()):
        out = out_dir / f"alpha_curves_{model.replace('+', 'plus')}_{task}.dat"
        metric_rows = {
            metric: [values.get(lbl, "nan") for lbl in g["labels"]]
            for metric, values in g["metrics"].items()
        }
        _curve_file(out, g["labels"], metric_rows)
        produced.append(out)
    return produced


def _emit_summary(rows, out_dir):
    out = out_dir / "summary.txt"
    models = []
    table: dict[str, dict[str, str]] = {}
    for row in rows:
        if row["repetition"] != "mean":
            continue
        if row["model"] not in models:
            models.append(row["model"])
        table.setdefault(row["model"], {})[row["metric"]] = row["value"]
    metrics = sorted({m for vals in table.values() for m in vals})
    with out.open("w", encoding="utf-8") as fh:
        fh.write("model " + " ".join(metrics) + "\n")
        for model in models:
            vals = [table[model].get(m, "nan") for m in metrics]
            fh.write(model + " " + " ".join(vals) + "\n")
    return [out]


def run_report(csv_dir) -> list[Path]:
    """Build plot-ready columnar files from the CSVs in a directory."""
    csv_dir = Path(csv_dir)
    produced: list[Path] = []
    sources = {
        "compare.csv": lambda rows: _emit_summary(rows, csv_dir),
        "mu_sweep.csv": lambda rows: _emit_curves(rows, "mu=", csv_dir, "mu_curves"),
        "alpha_sweep.csv": lambda rows: _emit_alpha_curves(rows, csv_dir),
        "sparsity.csv": lambda rows: _emit_curves(rows, "ratio=", csv_dir, "sparsity_curves"),
    }
    for name, emit in sources.items():
        path = csv_dir / name
        if path.exists():
            produced.extend(emit(_read_csv_rows(path)))
    if not produced:
        raise FileNotFoundError(f"no result CSVs found in {csv_dir}")
    return produced
