"""Translation-based KG embeddings: h + r is trained to land on t.

Entities live on the unit sphere (renormalized each epoch); relations are
unconstrained. Entities with text descriptions are parameterized through a
projection of their mean description word vector, trained jointly with the
same margin ranking loss.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DimensionError, ParseError
from .kg import KgVocab, Triple, TripleSet, corrupt
from .optim import Adam

log = logging.getLogger(__name__)


@dataclass
class EmbeddingTable:
    """Dense id -> vector map for one side of the KG."""

    kind: str  # "entity" | "relation"
    vectors: np.ndarray  # (count, dim)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def get(self, idx: int) -> np.ndarray:
        return self.vectors[idx]


@dataclass
class TransEConfig:
    dim: int = 16
    margin: float = 1.0
    norm: str = "l1"  # "l1" | "l2"
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")
        if self.norm not in ("l1", "l2"):
            raise ValueError(f"norm must be 'l1' or 'l2', got {self.norm!r}")


def transe_energy(h: np.ndarray, r: np.ndarray, t: np.ndarray, norm: str = "l1") -> float:
    """Distance of the translated head from the tail under L1 or L2."""
    h, r, t = (np.asarray(v, dtype=np.float64) for v in (h, r, t))
    if not h.shape == r.shape == t.shape:
        raise DimensionError(f"energy operands differ: {h.shape}, {r.shape}, {t.shape}")
    diff = h + r - t
    if norm == "l1":
        return float(np.abs(diff).sum())
    if norm == "l2":
        return float(np.linalg.norm(diff))
    raise ValueError(f"norm must be 'l1' or 'l2', got {norm!r}")


def margin_loss(d_pos: float, d_neg: float, margin: float) -> float:
    if margin <= 0:
        raise ValueError(f"margin must be positive, got {margin}")
    return max(0.0, margin + d_pos - d_neg)


def uniform_init_bound(dim: int) -> float:
    return 6.0 / math.sqrt(dim)


def init_from_descriptions(vocab: KgVocab, word_vectors: dict[str, np.ndarray],
                           dim: int, seed: int = 0) -> tuple[EmbeddingTable, np.ndarray]:
    """Initial entity table: described entities get the unit-normalized
    projection of their mean description word vector; the rest are uniform
    random within +-6/sqrt(dim). Returns the table and the projection matrix
    used (seeded random, trainable downstream)."""
    rng = np.random.default_rng(seed)
    word_dim = len(next(iter(word_vectors.values()))) if word_vectors else dim
    projection = rng.normal(0.0, 1.0 / math.sqrt(word_dim), size=(word_dim, dim))
    bound = uniform_init_bound(dim)
    vectors = rng.uniform(-bound, bound, size=(vocab.n_entities, dim))
    for eid in range(vocab.n_entities):
        tokens = [w for w in vocab.description(eid) if w in word_vectors]
        if not tokens:
            continue
        mean = np.mean([word_vectors[w] for w in tokens], axis=0)
        projected = mean @ projection
        norm = np.linalg.norm(projected)
        if norm > 0:
            vectors[eid] = projected / norm
    return EmbeddingTable("entity", vectors), projection


def _description_means(vocab: KgVocab, word_vectors: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """(mask of described entities, matrix of mean description word vectors)."""
    word_dim = len(next(iter(word_vectors.values())))
    means = np.zeros((vocab.n_entities, word_dim))
    mask = np.zeros(vocab.n_entities, dtype=bool)
    for eid in range(vocab.n_entities):
        tokens = [w for w in vocab.description(eid) if w in word_vectors]
        if tokens:
            means[eid] = np.mean([word_vectors[w] for w in tokens], axis=0)
            mask[eid] = True
    return mask, means


class _EnergyGraph:
    """Per-batch graph pieces shared by training."""

    def __init__(self, entities: ad.Tensor, relations: ad.Tensor, norm: str,
                 desc_mask: np.ndarray | None = None,
                 desc_means: np.ndarray | None = None,
                 projection: ad.Tensor | None = None):
        self.entities = entities
        self.relations = relations
        self.norm = norm
        self.projection = projection
        if projection is not None and desc_mask.any():
            n = entities.data.shape[0]
            d = int(desc_mask.sum())
            scatter = np.zeros((n, d))
            scatter[desc_mask, np.arange(d)] = 1.0
            self._scatter = ad.Tensor(scatter)
            self._means = ad.Tensor(desc_means[desc_mask])
            col = np.repeat(desc_mask.astype(np.float64)[:, None], entities.data.shape[1], axis=1)
            self._desc_cols = ad.Tensor(col)
            self._free_cols = ad.Tensor(1.0 - col)
        else:
            self._scatter = None

    def entity_matrix(self) -> ad.Tensor:
        """Free rows, with described rows replaced by the unit-normalized
        projection of their description mean."""
        if self._scatter is None:
            return self.entities
        described = ad.l2_normalize(ad.matmul(self._means, self.projection))
        full = ad.matmul(self._scatter, described)
        return ad.add(ad.mul(self.entities, self._free_cols), ad.mul(full, self._desc_cols))

    def energies(self, table: ad.Tensor, heads, rels, tails) -> ad.Tensor:
        h = ad.take_rows(table, heads)
        r = ad.take_rows(self.relations, rels)
        t = ad.take_rows(table, tails)
        diff = ad.add(ad.add(h, r), ad.scale(t, -1.0))
        if self.norm == "l1":
            return ad.sum_rows(ad.abs_(diff))
        return ad.sqrt_(ad.sum_rows(ad.mul(diff, diff)))


def train_transe(vocab: KgVocab, triples: TripleSet, config: TransEConfig,
                 word_vectors: dict[str, np.ndarray] | None = None,
                 loss_callback=None) -> tuple[EmbeddingTable, EmbeddingTable]:
    """Minimize the margin ranking loss over corrupted pairs with Adam.

    Deterministic given the config seed. Entity rows are renormalized to
    unit L2 norm after every epoch.
    """
    if vocab.n_entities < 2:
        raise ValueError("training needs at least 2 entities")
    rng = np.random.default_rng(config.seed)
    dim = config.dim
    bound = uniform_init_bound(dim)

    use_desc = bool(word_vectors) and any(vocab.description(e) for e in range(vocab.n_entities))
    if use_desc:
        init_table, proj0 = init_from_descriptions(vocab, word_vectors, dim, seed=config.seed)
        entity_param = ad.Tensor(init_table.vectors)
        projection = ad.Tensor(proj0)
        desc_mask, desc_means = _description_means(vocab, word_vectors)
    else:
        entity_param = ad.Tensor(rng.uniform(-bound, bound, size=(vocab.n_entities, dim)))
        projection = None
        desc_mask = desc_means = None
    relation_param = ad.Tensor(rng.uniform(-bound, bound, size=(vocab.n_relations, dim)))

    params = {"entities": entity_param, "relations": relation_param}
    if projection is not None:
        params["projection"] = projection
    opt = Adam(params, lr=config.learning_rate)
    graph = _EnergyGraph(entity_param, relation_param, config.norm,
                         desc_mask, desc_means, projection)

    def renormalize():
        norms = np.linalg.norm(entity_param.data, axis=1, keepdims=True)
        np.divide(entity_param.data, norms, out=entity_param.data, where=norms > 0)

    renormalize()
    order = np.arange(len(triples))
    all_triples = list(triples)
    for epoch in range(config.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [all_triples[i] for i in order[start : start + config.batch_size]]
            negatives = [corrupt(t, vocab, rng) for t in batch]
            heads = np.array([t.head for t in batch])
            rels = np.array([t.relation for t in batch])
            tails = np.array([t.tail for t in batch])
            n_heads = np.array([t.head for t in negatives])
            n_rels = np.array([t.relation for t in negatives])
            n_tails = np.array([t.tail for t in negatives])

            opt.zero_grad()
            table = graph.entity_matrix()
            d_pos = graph.energies(table, heads, rels, tails)
            d_neg = graph.energies(table, n_heads, n_rels, n_tails)
            hinge = ad.relu(ad.add_const(ad.add(d_pos, ad.scale(d_neg, -1.0)), config.margin))
            loss = ad.scale(ad.sum_all(hinge), 1.0 / len(batch))
            loss.backward()
            opt.step()
            epoch_loss += loss.item() * len(batch)
        renormalize()
        if loss_callback is not None:
            loss_callback(epoch, epoch_loss / len(order))

    final_entities = graph.entity_matrix().data.copy()
    return (EmbeddingTable("entity", final_entities),
            EmbeddingTable("relation", relation_param.data.copy()))


def eval_link_prediction(entities: EmbeddingTable, relations: EmbeddingTable,
                         test: TripleSet, known: TripleSet, norm: str = "l1",
                         hits_at: tuple[int, ...] = (1, 10)) -> dict[str, float]:
    """Rank the true tail of each test triple among all entities by energy.

    Filtered protocol: tails forming some other known-true triple with the
    same (head, relation) are removed from the candidate list first.
    """
    if len(test) == 0:
        raise ValueError("empty test set")
    ranks = []
    ev = entities.vectors
    for triple in test:
        translated = ev[triple.head] + relations.vectors[triple.relation]
        diff = translated[None, :] - ev
        if norm == "l1":
            energies = np.abs(diff).sum(axis=1)
        else:
            energies = np.linalg.norm(diff, axis=1)
        true_energy = energies[triple.tail]
        competing = np.ones(entities.count, dtype=bool)
        for other_tail in range(entities.count):
            if other_tail != triple.tail and Triple(triple.head, triple.relation, other_tail) in known:
                competing[other_tail] = False
        rank = 1 + int((energies[competing] < true_energy).sum())
        ranks.append(rank)
    ranks = np.array(ranks, dtype=np.float64)
    out = {"mean_rank": float(ranks.mean())}
    for k in hits_at:
        out[f"hits@{k}"] = float((ranks <= k).mean())
    return out


# ---------------------------------------------------------------------------
# embedding dump: one `name v1 ... vm` line per id under a `# kind=... dim=...`
# header


def write_embeddings(path, table: EmbeddingTable, names: list[str]) -> None:
    if len(names) != table.count:
        raise ValueError(f"{len(names)} names for {table.count} vectors")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# kind={table.kind} dim={table.dim}\n")
        for name, row in zip(names, table.vectors):
            fh.write(name + " " + " ".join(repr(float(v)) for v in row) + "\n")


def read_embeddings(path) -> tuple[EmbeddingTable, list[str]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ParseError("missing '# kind=... dim=...' header", line=1)
        fields = dict(part.split("=", 1) for part in header[1:].split())
        kind = fields["kind"]
        dim = int(fields["dim"])
        names, rows = [], []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise ParseError(f"expected {dim} values, got {len(parts) - 1}", line=lineno)
            names.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    if not rows:
        raise ParseError("no vectors in embedding file", line=2)
    return EmbeddingTable(kind, np.array(rows)), names
