"""Classification heads, retrieval pretraining, joint training, evaluation.

Three modes share one text pipeline:

* ``plain``      - context vector straight into a softmax head; no KG.
* ``vanilla_kg`` - attention over every entity/relation vector.
* ``conv_kg``    - attention over conv-encoded cluster summaries (relations
                   fall back to direct attention when there are fewer
                   relations than clusters).

The retrieval branch can be pretrained alone: the fact features minus the
classification context feed a throwaway head, and the tuned trunk weights
carry over into joint training.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import retrieval as rt
from . import text as tx
from .clustering import ClusterSet
from .errors import ConfigError, TrainingError
from .optim import Adam
from .transe import EmbeddingTable

log = logging.getLogger(__name__)

MODES = ("plain", "vanilla_kg", "conv_kg")


@dataclass
class TrainConfig:
    mode: str = "conv_kg"
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 0.01
    seed: int = 0
    fraction: float = 1.0
    pretrain_epochs: int = 0
    pretrain_learning_rate: float | None = None
    max_len: int = 12
    word_dim: int = 16
    hidden_dim: int = 24
    kg_dim: int = 16  # used by plain mode; KG-backed modes read it off the table
    finetune_kg: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.fraction <= 1.0:
            raise ConfigError(f"fraction must lie in (0, 1], got {self.fraction}")


@dataclass
class KgInputs:
    """Frozen KG artifacts the classifier retrieves from."""

    entities: EmbeddingTable
    relations: EmbeddingTable
    entity_names: list[str]
    relation_names: list[str]
    clusters: ClusterSet | None = None           # required for conv_kg
    relation_clusters: ClusterSet | None = None  # None: attend relations directly


@dataclass
class Metrics:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    attention_entropy: list[float] = field(default_factory=list)
    test_accuracy: float | None = None
    test_loss: float | None = None
    manifest: dict[str, str] = field(default_factory=dict)


@dataclass
class ModelParams:
    mode: str
    n_classes: int
    kg_dim: int
    word_vectors: tx.WordVectors
    embeddings: ad.Tensor                      # shared word-vector table
    cls_branch: tx.BranchParams
    head_plain: ad.Tensor | None = None        # (m, K)
    entity_branch: tx.BranchParams | None = None
    relation_branch: tx.BranchParams | None = None
    fact_proj: ad.Tensor | None = None         # V: (3m, u)
    mix: ad.Tensor | None = None               # U: (2u, u)
    head_out: ad.Tensor | None = None          # (u, K)
    head_pretrain: ad.Tensor | None = None     # (u, K)
    conv: rt.ConvEncoderParams | None = None
    conv_rel: rt.ConvEncoderParams | None = None
    kg_entities: ad.Tensor | None = None       # set only when fine-tuning the KG
    kg_relations: ad.Tensor | None = None

    def tensors(self) -> dict[str, ad.Tensor]:
        out = {"word_emb": self.embeddings}
        out.update(self.cls_branch.tensors("cls"))
        if self.head_plain is not None:
            out["head_plain"] = self.head_plain
        if self.entity_branch is not None:
            out.update(self.entity_branch.tensors("entity"))
            out.update(self.relation_branch.tensors("relation"))
            out["fact_proj"] = self.fact_proj
            out["mix"] = self.mix
            out["head_out"] = self.head_out
            out["head_pretrain"] = self.head_pretrain
        if self.conv is not None:
            out.update(self.conv.tensors())
        if self.conv_rel is not None:
            out.update(self.conv_rel.tensors("conv_rel"))
        if self.kg_entities is not None:
            out["kg_entities"] = self.kg_entities
            out["kg_relations"] = self.kg_relations
        return out

    def retrieval_tensors(self) -> dict[str, ad.Tensor]:
        """Parameters touched by the pretraining stage."""
        out = {"word_emb": self.embeddings}
        out.update(self.entity_branch.tensors("entity"))
        out.update(self.relation_branch.tensors("relation"))
        out["fact_proj"] = self.fact_proj
        out["head_pretrain"] = self.head_pretrain
        if self.conv is not None:
            out.update(self.conv.tensors())
        if self.conv_rel is not None:
            out.update(self.conv_rel.tensors("conv_rel"))
        return out


def init_model(config: TrainConfig, word_vectors: tx.WordVectors, n_classes: int,
               kg_dim: int, cluster_rows: int | None = None,
               rel_cluster_rows: int | None = None) -> ModelParams:
    """Seeded parameter init; only the tensors the mode needs are created."""
    if n_classes < 2:
        raise ConfigError(f"need at least 2 classes, got {n_classes}")
    rng = np.random.default_rng(config.seed)
    m = kg_dim
    u = m  # fact features and context share one width
    emb = ad.Tensor(word_vectors.matrix.copy())
    cls_branch = tx.init_branch(word_vectors.dim, config.hidden_dim, m, rng)
    params = ModelParams(mode=config.mode, n_classes=n_classes, kg_dim=m,
                         word_vectors=word_vectors, embeddings=emb,
                         cls_branch=cls_branch)
    if config.mode == "plain":
        params.head_plain = ad.Tensor(rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, n_classes)))
        return params
    params.entity_branch = tx.init_branch(word_vectors.dim, config.hidden_dim, m, rng)
    params.relation_branch = tx.init_branch(word_vectors.dim, config.hidden_dim, m, rng)
    params.fact_proj = ad.Tensor(rng.normal(0.0, 1.0 / np.sqrt(3 * m), size=(3 * m, u)))
    params.mix = ad.Tensor(rng.normal(0.0, 1.0 / np.sqrt(2 * u), size=(2 * u, u)))
    params.head_out = ad.Tensor(rng.normal(0.0, 1.0 / np.sqrt(u), size=(u, n_classes)))
    params.head_pretrain = ad.Tensor(rng.normal(0.0, 1.0 / np.sqrt(u), size=(u, n_classes)))
    if config.mode == "conv_kg":
        if cluster_rows is None:
            raise ConfigError("conv_kg mode needs the cluster row count")
        # averaging filters: summaries start as smoothed member pools, so the
        # candidate geometry is meaningful before any training
        params.conv = rt.plan_conv_schedule(cluster_rows)
        if rel_cluster_rows is not None:
            params.conv_rel = rt.plan_conv_schedule(rel_cluster_rows)
    return params


# ---------------------------------------------------------------------------
# heads


def classify(fact: ad.Tensor, context: ad.Tensor, params: ModelParams) -> ad.Tensor:
    """Joint head: softmax(([ReLU(fact V) : context] U) W_out)."""
    if params.fact_proj is None:
        raise ConfigError("classify requires a KG-augmented mode")
    features = ad.relu(ad.matmul(fact, params.fact_proj))
    merged = ad.concat(features, context)
    return ad.softmax(ad.matmul(ad.matmul(merged, params.mix), params.head_out))


def classify_plain(context: ad.Tensor, params: ModelParams) -> ad.Tensor:
    if params.head_plain is None:
        raise ConfigError("plain head missing from this parameter set")
    return ad.softmax(ad.matmul(context, params.head_plain))


def classify_retrieval_only(fact: ad.Tensor, params: ModelParams) -> ad.Tensor:
    """Pretraining head: classify from the fact features alone."""
    features = ad.relu(ad.matmul(fact, params.fact_proj))
    return ad.softmax(ad.matmul(features, params.head_pretrain))


# ---------------------------------------------------------------------------
# forward


class _Forward:
    """Shared per-batch forward pass for a fixed mode/KG setup."""

    def __init__(self, params: ModelParams, kg: KgInputs | None, config: TrainConfig):
        self.params = params
        self.kg = kg
        self.config = config
        if params.mode != "plain":
            if kg is None:
                raise ConfigError(f"{params.mode} mode needs KG inputs")
            if params.mode == "conv_kg" and kg.clusters is None:
                raise ConfigError("conv_kg mode needs a ClusterSet")
            if config.finetune_kg and params.kg_entities is None:
                params.kg_entities = ad.Tensor(kg.entities.vectors.copy())
                params.kg_relations = ad.Tensor(kg.relations.vectors.copy())

    def _entity_candidates(self):
        kg = self.kg
        tuned = self.params.kg_entities
        if self.params.mode == "vanilla_kg":
            return tuned if tuned is not None else ad.Tensor(kg.entities.vectors)
        # conv mode: encode stacked member matrices, gathering rows from the
        # trainable table when KG fine-tuning is on
        if tuned is not None:
            q = kg.clusters.rows_per_cluster
            mats = []
            for ids, nv in zip(kg.clusters.members, kg.clusters.n_valid):
                padded = np.array(list(ids) + [0] * (q - len(ids)), dtype=np.int64)
                row_mask = (np.arange(q) < nv).astype(np.float64)[:, None]
                keep = np.repeat(row_mask, kg.entities.dim, axis=1)
                mats.append(ad.mul(ad.take_rows(tuned, padded), ad.Tensor(keep)))
        else:
            mats = kg.clusters.matrices
        reps = rt.encode_clusters(mats, self.params.conv, n_valid=kg.clusters.n_valid)
        return ad.stack_rows(reps)

    def _relation_candidates(self):
        kg = self.kg
        if (self.params.mode == "conv_kg" and kg.relation_clusters is not None
                and self.params.conv_rel is not None):
            reps = rt.encode_clusters(kg.relation_clusters.matrices, self.params.conv_rel,
                                      n_valid=kg.relation_clusters.n_valid)
            return ad.stack_rows(reps)
        if self.params.kg_relations is not None:
            return self.params.kg_relations
        return ad.Tensor(kg.relations.vectors)

    def _retrieve(self, ids: np.ndarray, mask: np.ndarray) -> rt.RetrievedFact:
        p = self.params
        c_e = tx.encode(ids, mask, p.embeddings, p.entity_branch)
        c_r = tx.encode(ids, mask, p.embeddings, p.relation_branch)
        if p.mode == "conv_kg":
            return rt.retrieve_conv(c_e, c_r, self._entity_candidates(),
                                    self._relation_candidates())
        return rt.retrieve_vanilla(c_e, c_r, self._entity_candidates(),
                                   self._relation_candidates())

    def probabilities(self, ids: np.ndarray, mask: np.ndarray,
                      collect=None) -> ad.Tensor:
        p = self.params
        c_cls = tx.encode(ids, mask, p.embeddings, p.cls_branch)
        if p.mode == "plain":
            return classify_plain(c_cls, p)
        fact = self._retrieve(ids, mask)
        if collect is not None:
            collect.append(fact)
        return classify(fact.fact, c_cls, p)

    def retrieval_probabilities(self, ids: np.ndarray, mask: np.ndarray,
                                collect=None) -> ad.Tensor:
        fact = self._retrieve(ids, mask)
        if collect is not None:
            collect.append(fact)
        return classify_retrieval_only(fact.fact, self.params)


def _as_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = np.arange(n)
    rng.shuffle(order)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _prepare(examples, word_vectors: tx.WordVectors, labels: list[str], max_len: int):
    ids = np.zeros((len(examples), max_len), dtype=np.int64)
    mask = np.zeros((len(examples), max_len), dtype=bool)
    y = np.zeros(len(examples), dtype=np.int64)
    label_ids = {lab: i for i, lab in enumerate(labels)}
    for i, ex in enumerate(examples):
        seq = tx.tokenize(ex.text, word_vectors, max_len)
        ids[i] = seq.ids
        mask[i] = seq.mask
        if ex.label not in label_ids:
            raise ConfigError(f"unseen label {ex.label!r}")
        y[i] = label_ids[ex.label]
    return ids, mask, y


def dataset_labels(examples) -> list[str]:
    """Distinct labels in first-appearance order."""
    seen = {}
    for ex in examples:
        seen.setdefault(ex.label, None)
    return list(seen)


def vocabulary_of(examples) -> list[str]:
    seen = {}
    for ex in examples:
        for tok in tx.split_tokens(ex.text):
            seen.setdefault(tok, None)
    return list(seen)


def prepare_kg(entities: EmbeddingTable, relations: EmbeddingTable,
               entity_names: list[str], relation_names: list[str],
               n_clusters: int, seed: int, mode: str) -> tuple[KgInputs, dict[str, str]]:
    """Assemble KG inputs for a mode, clustering for conv_kg.

    Relation clustering is skipped (direct attention instead) when there are
    fewer relations than clusters; the decision lands in the returned notes.
    """
    from .clustering import ClusterConfig, balanced_kmeans

    notes: dict[str, str] = {}
    kg = KgInputs(entities=entities, relations=relations,
                  entity_names=entity_names, relation_names=relation_names)
    if mode != "conv_kg":
        return kg, notes
    kg.clusters = balanced_kmeans(entities, ClusterConfig(n_clusters=n_clusters, seed=seed))
    notes["entity_clusters"] = str(n_clusters)
    if relations.count < n_clusters:
        notes["relation_clusters"] = (
            f"skipped ({relations.count} relations < {n_clusters} clusters); "
            "using direct relation attention")
    else:
        kg.relation_clusters = balanced_kmeans(
            relations, ClusterConfig(n_clusters=n_clusters, seed=seed + 1))
        notes["relation_clusters"] = str(n_clusters)
    return kg, notes


# ---------------------------------------------------------------------------
# training stages


def pretrain_retrieval(train_examples, params: ModelParams, kg: KgInputs,
                       config: TrainConfig, labels: list[str],
                       fwd: "_Forward | None" = None) -> float:
    """Train the retrieval branch alone to classify from the fact vector.

    Returns the final-epoch training accuracy of the retrieval-only head.
    Zero pretrain epochs leave the parameters untouched.
    """
    if config.pretrain_epochs == 0:
        return float("nan")
    if fwd is None:
        fwd = _Forward(params, kg, config)
    rng = np.random.default_rng(config.seed + 1)
    ids, mask, y = _prepare(train_examples, params.word_vectors, labels, config.max_len)
    lr = config.pretrain_learning_rate or config.learning_rate
    opt = Adam(params.retrieval_tensors(), lr=lr)
    accuracy = 0.0
    for epoch in range(config.pretrain_epochs):
        correct = 0
        for batch in _as_batches(len(y), config.batch_size, rng):
            opt.zero_grad()
            probs = fwd.retrieval_probabilities(ids[batch], mask[batch])
            losses = ad.cross_entropy(probs, y[batch])
            loss = ad.scale(ad.sum_all(losses), 1.0 / len(batch))
            _check_finite(loss, epoch, "pretrain")
            loss.backward()
            opt.step()
            correct += int((probs.data.argmax(axis=1) == y[batch]).sum())
        accuracy = correct / len(y)
    return accuracy


def _check_finite(loss: ad.Tensor, epoch: int, stage) -> None:
    if not np.isfinite(loss.data):
        raise TrainingError(f"non-finite loss at epoch {epoch}, batch {stage}")


def train(train_examples, test_examples, kg: KgInputs | None, config: TrainConfig,
          word_vectors: tx.WordVectors | None = None,
          labels: list[str] | None = None) -> tuple[ModelParams, Metrics]:
    """Optional retrieval pretraining, then joint end-to-end training.

    Deterministic given the config seed: identical config and inputs yield
    bitwise-identical parameters and metrics.
    """
    labels = labels or dataset_labels(train_examples)
    if word_vectors is None:
        word_vectors = tx.build_word_vectors(
            vocabulary_of(list(train_examples) + list(test_examples)),
            config.word_dim, seed=config.seed)
    cluster_rows = rel_cluster_rows = None
    if config.mode == "conv_kg":
        if kg is None or kg.clusters is None:
            raise ConfigError("conv_kg mode needs clustered KG inputs")
        cluster_rows = kg.clusters.rows_per_cluster
        if kg.relation_clusters is not None:
            rel_cluster_rows = kg.relation_clusters.rows_per_cluster
    params = init_model(config, word_vectors, len(labels), _kg_dim(kg, config),
                        cluster_rows, rel_cluster_rows)
    metrics = Metrics()
    fwd = _Forward(params, kg, config)

    if config.mode != "plain" and config.pretrain_epochs > 0:
        pre_acc = pretrain_retrieval(train_examples, params, kg, config, labels, fwd=fwd)
        metrics.manifest["pretrain_accuracy"] = f"{pre_acc:.4f}"
    rng = np.random.default_rng(config.seed + 2)
    ids, mask, y = _prepare(train_examples, word_vectors, labels, config.max_len)
    trainable = params.tensors()
    trainable.pop("head_pretrain", None)  # frozen after the pretrain stage
    opt = Adam(trainable, lr=config.learning_rate)

    for epoch in range(config.epochs):
        epoch_loss = 0.0
        correct = 0
        entropies = []
        for bi, batch in enumerate(_as_batches(len(y), config.batch_size, rng)):
            opt.zero_grad()
            facts: list[rt.RetrievedFact] = []
            probs = fwd.probabilities(ids[batch], mask[batch], collect=facts)
            losses = ad.cross_entropy(probs, y[batch])
            loss = ad.scale(ad.sum_all(losses), 1.0 / len(batch))
            if not np.isfinite(loss.data):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
            loss.backward()
            opt.step()
            epoch_loss += loss.item() * len(batch)
            correct += int((probs.data.argmax(axis=1) == y[batch]).sum())
            if facts:
                entropies.append(rt.attention_entropy(facts[0].alpha_entities.data))
        metrics.train_loss.append(epoch_loss / len(y))
        metrics.train_accuracy.append(correct / len(y))
        metrics.attention_entropy.append(float(np.mean(entropies)) if entropies else float("nan"))

    test_loss, test_acc = evaluate(params, test_examples, kg, config, labels)
    metrics.test_loss = test_loss
    metrics.test_accuracy = test_acc
    metrics.manifest.update({
        "mode": config.mode,
        "seed": str(config.seed),
        "fraction": repr(config.fraction),
        "epochs": str(config.epochs),
        "classes": ",".join(labels),
    })
    return params, metrics


def _kg_dim(kg: KgInputs | None, config: TrainConfig) -> int:
    if kg is not None and config.mode != "plain":
        return kg.entities.dim
    return config.kg_dim


def evaluate(params: ModelParams, examples, kg: KgInputs | None,
             config: TrainConfig, labels: list[str],
             batch_size: int = 256) -> tuple[float, float]:
    """Mean cross-entropy and accuracy on a labeled set."""
    fwd = _Forward(params, kg, config)
    ids, mask, y = _prepare(examples, params.word_vectors, labels, config.max_len)
    total_loss = 0.0
    correct = 0
    for start in range(0, len(y), batch_size):
        sl = slice(start, start + batch_size)
        probs = fwd.probabilities(ids[sl], mask[sl])
        losses = ad.cross_entropy(probs, y[sl])
        total_loss += float(losses.data.sum())
        correct += int((probs.data.argmax(axis=1) == y[sl]).sum())
    return total_loss / len(y), correct / len(y)


def predict(params: ModelParams, examples, kg: KgInputs | None,
            config: TrainConfig, labels: list[str]) -> np.ndarray:
    fwd = _Forward(params, kg, config)
    ids, mask, _ = _prepare(examples, params.word_vectors, labels, config.max_len)
    out = []
    for start in range(0, len(ids), 256):
        probs = fwd.probabilities(ids[start : start + 256], mask[start : start + 256])
        out.append(probs.data.argmax(axis=1))
    return np.concatenate(out)


def evaluate_retrieval_only(params: ModelParams, examples, kg: KgInputs,
                            config: TrainConfig, labels: list[str]) -> float:
    """Accuracy of the fact-only pretraining head, no classification context."""
    fwd = _Forward(params, kg, config)
    ids, mask, y = _prepare(examples, params.word_vectors, labels, config.max_len)
    correct = 0
    for start in range(0, len(y), 256):
        sl = slice(start, start + 256)
        probs = fwd.retrieval_probabilities(ids[sl], mask[sl])
        correct += int((probs.data.argmax(axis=1) == y[sl]).sum())
    return correct / len(y)


# ---------------------------------------------------------------------------
# model persistence (plain text, diffable)


def save_model(path, params: ModelParams, config: TrainConfig, labels: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# kgattn-model\n")
        fh.write(f"mode {params.mode}\n")
        fh.write(f"classes {','.join(labels)}\n")
        fh.write(f"kg_dim {params.kg_dim}\n")
        fh.write(f"hidden_dim {config.hidden_dim}\n")
        fh.write(f"word_dim {config.word_dim}\n")
        fh.write(f"max_len {config.max_len}\n")
        if params.conv is not None:
            k1, s1, n1, k2, s2, n2 = params.conv.schedule()
            relu_flag = int(params.conv.relu_after_pool)
            fh.write(f"conv {k1} {s1} {n1} {k2} {s2} {n2} {relu_flag}\n")
        if params.conv_rel is not None:
            k1, s1, n1, k2, s2, n2 = params.conv_rel.schedule()
            relu_flag = int(params.conv_rel.relu_after_pool)
            fh.write(f"conv_rel {k1} {s1} {n1} {k2} {s2} {n2} {relu_flag}\n")
        fh.write("words " + " ".join(params.word_vectors.words) + "\n")
        for name, tensor in sorted(params.tensors().items()):
            flat = tensor.data.ravel()
            shape = ",".join(str(s) for s in tensor.data.shape)
            fh.write(f"tensor {name} {shape} " + " ".join(repr(float(v)) for v in flat) + "\n")


def load_model(path) -> tuple[ModelParams, TrainConfig, list[str]]:
    header: dict[str, str] = {}
    tensors: dict[str, np.ndarray] = {}
    words: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            if key == "words":
                words = rest.split()
            elif key == "tensor":
                name, shape_s, values = rest.split(" ", 2)
                shape = tuple(int(s) for s in shape_s.split(",") if s)
                arr = np.array([float(v) for v in values.split()])
                tensors[name] = arr.reshape(shape)
            else:
                header[key] = rest
    labels = header["classes"].split(",")
    config = TrainConfig(mode=header["mode"],
                         hidden_dim=int(header["hidden_dim"]),
                         word_dim=int(header["word_dim"]),
                         max_len=int(header["max_len"]),
                         kg_dim=int(header["kg_dim"]))
    word_vectors = tx.WordVectors(words, tensors["word_emb"])
    params = ModelParams(mode=config.mode, n_classes=len(labels),
                         kg_dim=int(header["kg_dim"]), word_vectors=word_vectors,
                         embeddings=ad.Tensor(tensors["word_emb"]),
                         cls_branch=_branch_from(tensors, "cls"))
    if config.mode == "plain":
        params.head_plain = ad.Tensor(tensors["head_plain"])
    else:
        params.entity_branch = _branch_from(tensors, "entity")
        params.relation_branch = _branch_from(tensors, "relation")
        params.fact_proj = ad.Tensor(tensors["fact_proj"])
        params.mix = ad.Tensor(tensors["mix"])
        params.head_out = ad.Tensor(tensors["head_out"])
        params.head_pretrain = ad.Tensor(tensors["head_pretrain"])
    if "conv" in header:
        k1, s1, n1, k2, s2, n2, relu_flag = (int(v) for v in header["conv"].split())
        params.conv = rt.ConvEncoderParams(
            ad.Tensor(tensors["conv.filter1"]), s1, n1,
            ad.Tensor(tensors["conv.filter2"]), s2, n2,
            relu_after_pool=bool(relu_flag))
    if "conv_rel" in header:
        k1, s1, n1, k2, s2, n2, relu_flag = (int(v) for v in header["conv_rel"].split())
        params.conv_rel = rt.ConvEncoderParams(
            ad.Tensor(tensors["conv_rel.filter1"]), s1, n1,
            ad.Tensor(tensors["conv_rel.filter2"]), s2, n2,
            relu_after_pool=bool(relu_flag))
    if "kg_entities" in tensors:
        params.kg_entities = ad.Tensor(tensors["kg_entities"])
        params.kg_relations = ad.Tensor(tensors["kg_relations"])
    return params, config, labels


def _branch_from(tensors: dict[str, np.ndarray], prefix: str) -> tx.BranchParams:
    return tx.BranchParams(
        lstm=ad.LstmParams(w_x=ad.Tensor(tensors[f"{prefix}.w_x"]),
                           w_h=ad.Tensor(tensors[f"{prefix}.w_h"]),
                           bias=ad.Tensor(tensors[f"{prefix}.bias"])),
        proj=ad.Tensor(tensors[f"{prefix}.proj"]))


# ---------------------------------------------------------------------------
# reduced-data sweep


def stratified_subsample(examples, fraction: float, rng: np.random.Generator):
    """Per-label subsample preserving class proportions."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    if fraction == 1.0:
        return list(examples)
    by_label: dict[str, list] = {}
    for ex in examples:
        by_label.setdefault(ex.label, []).append(ex)
    kept = []
    for label in by_label:
        group = by_label[label]
        take = int(round(fraction * len(group)))
        if take < 1:
            raise ValueError(f"fraction {fraction} leaves no examples for label {label!r}")
        idx = rng.choice(len(group), size=take, replace=False)
        kept.extend(group[i] for i in sorted(idx))
    return kept


def fraction_sweep(train_examples, test_examples, kg: KgInputs, config: TrainConfig,
                   fractions, modes=("plain", "conv_kg")) -> list[dict]:
    """Accuracy per (mode, fraction); one row per run, CSV-ready."""
    rows = []
    base_vocab = tx.build_word_vectors(
        vocabulary_of(list(train_examples) + list(test_examples)),
        config.word_dim, seed=config.seed)
    labels = dataset_labels(train_examples)
    for mode in modes:
        for fraction in fractions:
            rng = np.random.default_rng(config.seed + 1000)
            subset = stratified_subsample(train_examples, fraction, rng)
            run_config = TrainConfig(**{**config.__dict__, "mode": mode, "fraction": fraction})
            _, metrics = train(subset, test_examples, kg if mode != "plain" else None,
                               run_config, word_vectors=base_vocab, labels=labels)
            rows.append({
                "epoch": run_config.epochs,
                "split": "test",
                "mode": mode,
                "fraction": fraction,
                "seed": run_config.seed,
                "loss": metrics.test_loss,
                "accuracy": metrics.test_accuracy,
            })
    return rows
