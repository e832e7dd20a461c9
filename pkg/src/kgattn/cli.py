"""Command-line pipeline: synth -> embed -> cluster -> train -> eval / sweep.

All artifacts are plain text so runs can be diffed; every command honors
``--seed`` and is byte-reproducible apart from the manifest timestamp.
Exit codes: 2 for missing/malformed inputs or config, 3 for training
failures.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import clustering as cl
from . import kg as kgmod
from . import model as md
from . import synth as sy
from . import text as tx
from . import transe as te
from .config import RunConfig, load_config_file, merge_config
from .errors import ConfigError, ParseError, TrainingError


def _write_manifest(path: Path, entries: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"timestamp={time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
        for key, value in entries.items():
            fh.write(f"{key}={value}\n")


def _config_from(args) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {name: getattr(args, name, None) for name in (
        "seed", "mode", "fraction", "clusters", "kg_dim", "epochs",
        "pretrain_epochs", "batch_size", "learning_rate", "max_len",
        "word_dim", "hidden_dim", "margin", "norm",
        "transe_epochs", "transe_learning_rate", "finetune_kg")}
    return merge_config(file_values, overrides)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _train_config(cfg: RunConfig, mode: str | None = None) -> md.TrainConfig:
    return md.TrainConfig(
        mode=mode or cfg.mode, epochs=cfg.epochs, batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate, seed=cfg.seed, fraction=cfg.fraction,
        pretrain_epochs=cfg.pretrain_epochs, max_len=cfg.max_len,
        word_dim=cfg.word_dim, hidden_dim=cfg.hidden_dim, kg_dim=cfg.kg_dim,
        finetune_kg=cfg.finetune_kg)


def _load_kg(args, cfg: RunConfig, mode: str) -> tuple[md.KgInputs | None, dict]:
    if mode == "plain":
        return None, {}
    entities, entity_names = te.read_embeddings(args.entities)
    relations, relation_names = te.read_embeddings(args.relations)
    if getattr(args, "clusters_file", None):
        clusters = cl.read_clusters(args.clusters_file, entities.vectors)
        kg = md.KgInputs(entities=entities, relations=relations,
                         entity_names=entity_names, relation_names=relation_names,
                         clusters=clusters)
        notes = {"entity_clusters": str(clusters.n_clusters)}
        if mode == "conv_kg" and relations.count < clusters.n_clusters:
            notes["relation_clusters"] = (
                f"skipped ({relations.count} relations < {clusters.n_clusters} clusters)")
        elif mode == "conv_kg":
            kg.relation_clusters = cl.balanced_kmeans(
                relations, cl.ClusterConfig(n_clusters=clusters.n_clusters, seed=cfg.seed + 1))
            notes["relation_clusters"] = str(clusters.n_clusters)
        return kg, notes
    return md.prepare_kg(entities, relations, entity_names, relation_names,
                         cfg.clusters, cfg.seed, mode)


def _write_metrics_csv(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "split", "mode", "fraction", "seed", "loss", "accuracy"])
        for row in rows:
            writer.writerow(row)


def _metrics_rows(metrics: md.Metrics, cfg: RunConfig, mode: str):
    frac = repr(cfg.fraction)
    for epoch, (loss, acc) in enumerate(zip(metrics.train_loss, metrics.train_accuracy)):
        yield [epoch, "train", mode, frac, cfg.seed, repr(loss), repr(acc)]
    yield [len(metrics.train_loss) - 1, "test", mode, frac, cfg.seed,
           repr(metrics.test_loss), repr(metrics.test_accuracy)]


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    cfg = _config_from(args)
    out = _out_dir(args)
    synth_cfg = sy.SynthConfig(seed=cfg.seed, docs_per_pair=args.docs_per_pair)
    data = sy.generate(synth_cfg)
    kgmod.write_triples(out / "triples.tsv", data.vocab, data.triples)
    kgmod.write_descriptions(out / "descriptions.tsv", data.vocab)
    tx.write_dataset(out / "train.tsv", data.train)
    tx.write_dataset(out / "test.tsv", data.test)
    _write_manifest(out / "manifest.txt", {
        "command": "synth", "seed": cfg.seed,
        "entities": data.vocab.n_entities, "relations": data.vocab.n_relations,
        "triples": len(data.triples), "train_docs": len(data.train),
        "test_docs": len(data.test), "classes": synth_cfg.n_classes,
    })
    print(f"synth: {len(data.train)} train / {len(data.test)} test docs, "
          f"{len(data.triples)} triples -> {out}")
    return 0


def cmd_embed(args) -> int:
    cfg = _config_from(args)
    out = _out_dir(args)
    vocab, triples, duplicates = kgmod.parse_triples(args.triples)
    word_vectors = None
    if args.descriptions:
        vocab, skipped = kgmod.parse_descriptions(args.descriptions, vocab)
        words = sorted({w for d in vocab.descriptions.values() for w in d})
        word_vectors = {w: v for w, v in zip(
            words, np.random.default_rng(cfg.seed).normal(0.0, 0.1, size=(len(words), cfg.kg_dim)))}
    te_cfg = te.TransEConfig(dim=cfg.kg_dim, margin=cfg.margin, norm=cfg.norm,
                             epochs=cfg.transe_epochs, batch_size=cfg.transe_batch_size,
                             learning_rate=cfg.transe_learning_rate, seed=cfg.seed)
    entities, relations = te.train_transe(vocab, triples, te_cfg, word_vectors=word_vectors)
    te.write_embeddings(out / "entities.txt", entities, vocab.entity_names)
    te.write_embeddings(out / "relations.txt", relations, vocab.relation_names)
    _write_manifest(out / "manifest.txt", {
        "command": "embed", "seed": cfg.seed, "dim": cfg.kg_dim,
        "norm": cfg.norm, "margin": cfg.margin, "epochs": cfg.transe_epochs,
        "entities": vocab.n_entities, "relations": vocab.n_relations,
        "duplicate_lines": duplicates,
    })
    print(f"embed: {vocab.n_entities} entities, {vocab.n_relations} relations -> {out}")
    return 0


def cmd_cluster(args) -> int:
    cfg = _config_from(args)
    out = _out_dir(args)
    table, _names = te.read_embeddings(args.embeddings)
    clusters = cl.balanced_kmeans(table, cl.ClusterConfig(n_clusters=cfg.clusters, seed=cfg.seed))
    cl.write_clusters(out / "clusters.tsv", clusters)
    _write_manifest(out / "manifest.txt", {
        "command": "cluster", "seed": cfg.seed, "clusters": cfg.clusters,
        "points": table.count, "objective": repr(clusters.objective),
    })
    print(f"cluster: {table.count} points into {cfg.clusters} clusters -> {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from(args)
    out = _out_dir(args)
    train_set = tx.load_dataset(args.train_data)
    test_set = tx.load_dataset(args.test_data)
    kg, notes = _load_kg(args, cfg, cfg.mode)
    tc = _train_config(cfg)
    rng = np.random.default_rng(cfg.seed + 1000)
    subset = md.stratified_subsample(train_set, cfg.fraction, rng)
    labels = md.dataset_labels(train_set)
    params, metrics = md.train(subset, test_set, kg, tc, labels=labels)
    _write_metrics_csv(out / "metrics.csv", _metrics_rows(metrics, cfg, cfg.mode))
    md.save_model(out / "model.txt", params, tc, labels)
    manifest = {"command": "train", **{k: v for k, v in cfg.items()}, **notes,
                **metrics.manifest,
                "test_accuracy": repr(metrics.test_accuracy),
                "final_attention_entropy": repr(metrics.attention_entropy[-1])}
    _write_manifest(out / "manifest.txt", manifest)
    print(f"train[{cfg.mode}]: test accuracy {metrics.test_accuracy:.4f} -> {out}")
    return 0


def cmd_pretrain(args) -> int:
    cfg = _config_from(args)
    out = _out_dir(args)
    train_set = tx.load_dataset(args.train_data)
    test_set = tx.load_dataset(args.test_data)
    mode = cfg.mode if cfg.mode != "plain" else "conv_kg"
    kg, notes = _load_kg(args, cfg, mode)
    epochs = cfg.pretrain_epochs or cfg.epochs
    tc = _train_config(cfg, mode=mode)
    tc.pretrain_epochs = epochs
    labels = md.dataset_labels(train_set)
    vocab = tx.build_word_vectors(md.vocabulary_of(train_set + test_set),
                                  cfg.word_dim, seed=cfg.seed)
    cluster_rows = kg.clusters.rows_per_cluster if kg.clusters else None
    rel_rows = kg.relation_clusters.rows_per_cluster if kg.relation_clusters else None
    params = md.init_model(tc, vocab, len(labels), kg.entities.dim, cluster_rows, rel_rows)
    train_acc = md.pretrain_retrieval(train_set, params, kg, tc, labels)
    test_acc = md.evaluate_retrieval_only(params, test_set, kg, tc, labels)
    md.save_model(out / "model.txt", params, tc, labels)
    _write_manifest(out / "manifest.txt", {
        "command": "pretrain", **{k: v for k, v in cfg.items()}, **notes,
        "pretrain_epochs": epochs,
        "retrieval_train_accuracy": repr(train_acc),
        "retrieval_test_accuracy": repr(test_acc),
    })
    print(f"pretrain[{mode}]: retrieval-only test accuracy {test_acc:.4f} -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from(args)
    params, tc, labels = md.load_model(args.model)
    examples = tx.load_dataset(args.data)
    kg, _notes = _load_kg(args, cfg, params.mode)
    loss, accuracy = md.evaluate(params, examples, kg, tc, labels)
    print(f"eval[{params.mode}]: accuracy {accuracy:.4f} loss {loss:.4f}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from(args)
    out = _out_dir(args)
    train_set = tx.load_dataset(args.train_data)
    test_set = tx.load_dataset(args.test_data)
    fractions = [float(f) for f in args.fractions.split(",")]
    kg, notes = _load_kg(args, cfg, "conv_kg")
    tc = _train_config(cfg, mode="conv_kg")
    rows = md.fraction_sweep(train_set, test_set, kg, tc, fractions)
    _write_metrics_csv(out / "sweep.csv", (
        [r["epoch"], r["split"], r["mode"], repr(r["fraction"]), r["seed"],
         repr(r["loss"]), repr(r["accuracy"])] for r in rows))
    _write_manifest(out / "manifest.txt", {
        "command": "sweep", **{k: v for k, v in cfg.items()}, **notes,
        "fractions": args.fractions,
    })
    for r in rows:
        print(f"sweep[{r['mode']}@{r['fraction']}]: accuracy {r['accuracy']:.4f}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgattn",
        description="Knowledge-graph-augmented text classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="key=value config file (flags win)")
        p.add_argument("--seed", type=int, help="RNG seed (default 0)")
        if out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate the synthetic fact-determined benchmark")
    common(p)
    p.add_argument("--docs-per-pair", type=int, default=6,
                   help="documents per (subject, relation) pair")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("embed", help="train and dump KG embeddings")
    common(p)
    p.add_argument("--triples", required=True, help="head<TAB>relation<TAB>tail file")
    p.add_argument("--descriptions", help="entity<TAB>text file for init")
    p.add_argument("--kg-dim", type=int, dest="kg_dim", help="embedding dimension")
    p.add_argument("--epochs", type=int, dest="transe_epochs", help="embedding epochs")
    p.add_argument("--margin", type=float, help="ranking margin")
    p.add_argument("--norm", choices=["l1", "l2"], help="energy norm")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("cluster", help="balanced k-means over an embedding dump")
    common(p)
    p.add_argument("--embeddings", required=True, help="embedding dump to cluster")
    p.add_argument("--clusters", type=int, help="cluster count")
    p.set_defaults(func=cmd_cluster)

    def training_io(p):
        p.add_argument("--train-data", required=True, help="label<TAB>text training file")
        p.add_argument("--test-data", required=True, help="label<TAB>text test file")
        p.add_argument("--entities", help="entity embedding dump")
        p.add_argument("--relations", help="relation embedding dump")
        p.add_argument("--clusters-file", help="precomputed id<TAB>cluster file")
        p.add_argument("--clusters", type=int, help="cluster count when clustering here")
        p.add_argument("--epochs", type=int, help="training epochs")
        p.add_argument("--batch-size", type=int, dest="batch_size")
        p.add_argument("--learning-rate", type=float, dest="learning_rate")
        p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
        p.add_argument("--word-dim", type=int, dest="word_dim")
        p.add_argument("--max-len", type=int, dest="max_len")

    p = sub.add_parser("train", help="train a classifier (optionally with pretraining)")
    common(p)
    training_io(p)
    p.add_argument("--mode", choices=["plain", "vanilla_kg", "conv_kg"])
    p.add_argument("--fraction", type=float, help="stratified training fraction")
    p.add_argument("--pretrain-epochs", type=int, dest="pretrain_epochs")
    p.add_argument("--finetune-kg", action="store_const", const=True, dest="finetune_kg",
                   help="also fine-tune KG embeddings during joint training")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("pretrain", help="train the retrieval branch alone")
    common(p)
    training_io(p)
    p.add_argument("--mode", choices=["vanilla_kg", "conv_kg"])
    p.add_argument("--pretrain-epochs", type=int, dest="pretrain_epochs")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("eval", help="test accuracy of a saved model")
    common(p, out=False)
    p.add_argument("--model", required=True, help="saved model file")
    p.add_argument("--data", required=True, help="label<TAB>text file")
    p.add_argument("--entities", help="entity embedding dump")
    p.add_argument("--relations", help="relation embedding dump")
    p.add_argument("--clusters-file", help="id<TAB>cluster file")
    p.add_argument("--clusters", type=int, help="cluster count")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train plain and conv_kg over dataset fractions")
    common(p)
    training_io(p)
    p.add_argument("--fractions", default="0.5,0.7,1.0",
                   help="comma-separated fractions of the training set")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ParseError, ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
