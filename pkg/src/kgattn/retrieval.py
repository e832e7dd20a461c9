"""Soft-attention fact retrieval, directly or over conv-encoded clusters.

A context vector queries candidate vectors by plain dot product; the
softmax weights form a convex combination (the retrieved entity or
relation). The object side is completed by translation, t = e + r, and the
triple [e, r, t] is the retrieved fact.

In the conv model the entity candidates are compact cluster summaries: each
stacked member matrix passes through two rounds of column-wise 1-D
convolution and max pooling, sharing one filter per layer, ending in a
single row per cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError

# ReLU between conv layers is off by default: the sliding-window product has
# no nonlinearity of its own, and pooling already provides selection.


@dataclass
class ConvEncoderParams:
    """Two conv/pool layers whose schedule collapses q member rows to one."""

    filter1: ad.Tensor
    stride1: int
    pool1: int
    filter2: ad.Tensor
    stride2: int
    pool2: int
    relu_after_pool: bool = False

    def __post_init__(self):
        for name, v in (("stride1", self.stride1), ("stride2", self.stride2),
                        ("pool1", self.pool1), ("pool2", self.pool2)):
            if v < 1:
                raise ConfigError(f"{name} must be >= 1, got {v}")

    def schedule(self) -> tuple[int, int, int, int, int, int]:
        return (len(self.filter1.data), self.stride1, self.pool1,
                len(self.filter2.data), self.stride2, self.pool2)

    def validate(self, q: int) -> None:
        """Check that the composed layer arithmetic yields exactly one row."""
        rows = layer_arithmetic(q, *self.schedule())
        if rows[-1] != 1:
            raise ConfigError(
                f"conv schedule {self.schedule()} maps {q} rows to {rows[-1]}, "
                f"expected 1 (row trace {rows})")

    def tensors(self, prefix: str = "conv") -> dict[str, ad.Tensor]:
        return {f"{prefix}.filter1": self.filter1, f"{prefix}.filter2": self.filter2}


def layer_arithmetic(q, k1, s1, n1, k2, s2, n2) -> tuple[int, int, int, int, int]:
    """Row counts after conv1, pool1, conv2, pool2 (prefixed by q)."""
    if k1 > q:
        raise ConfigError(f"first filter length {k1} exceeds {q} rows")
    r1 = ad.conv1d_out_rows(q, k1, s1)
    p1 = ad.maxpool_out_rows(r1, n1) if n1 <= r1 else None
    if p1 is None:
        raise ConfigError(f"pool window {n1} exceeds {r1} rows")
    if k2 > p1:
        raise ConfigError(f"second filter length {k2} exceeds {p1} rows")
    r2 = ad.conv1d_out_rows(p1, k2, s2)
    if n2 > r2:
        raise ConfigError(f"pool window {n2} exceeds {r2} rows")
    p2 = ad.maxpool_out_rows(r2, n2)
    return (q, r1, p1, r2, p2)


def plan_conv_schedule(q: int, rng: np.random.Generator | None = None,
                       identity: bool = False) -> ConvEncoderParams:
    """Deterministic default schedule for q member rows.

    Prefers filter length 3, stride 1, pool window 2, then a global max pool
    on the second layer so exactly one row always remains. ``identity``
    selects the unit filter + global-max configuration whose output is
    invariant to member order.
    """
    if q < 1:
        raise ConfigError("clusters must hold at least one row")
    if identity:
        k1, s1, n1 = 1, 1, q
        k2, s2, n2 = 1, 1, 1
        f1 = ad.Tensor(np.ones(1))
        f2 = ad.Tensor(np.ones(1))
        return ConvEncoderParams(f1, s1, n1, f2, s2, n2)
    k1 = min(3, q)
    s1 = 1
    r1 = ad.conv1d_out_rows(q, k1, s1)
    n1 = 2 if r1 >= 2 else 1
    p1 = ad.maxpool_out_rows(r1, n1)
    k2 = min(3, p1)
    s2 = 1
    r2 = ad.conv1d_out_rows(p1, k2, s2)
    n2 = r2  # global pool guarantees one output row
    if rng is None:
        f1 = ad.Tensor(np.ones(k1) / k1)
        f2 = ad.Tensor(np.ones(k2) / k2)
    else:
        f1 = ad.Tensor(rng.normal(0.0, 1.0 / np.sqrt(k1), size=k1))
        f2 = ad.Tensor(rng.normal(0.0, 1.0 / np.sqrt(k2), size=k2))
    params = ConvEncoderParams(f1, s1, n1, f2, s2, n2)
    params.validate(q)
    return params


def encode_clusters(matrices, params: ConvEncoderParams,
                    n_valid: list[int] | None = None) -> list[ad.Tensor]:
    """One compact vector per cluster: conv -> pool -> conv -> pool.

    Filters are shared across clusters and across embedding dimensions.
    ``n_valid`` gives real member rows per cluster so windows lying wholly
    in zero padding are dropped before pooling.
    """
    k1, s1, n1, k2, s2, n2 = params.schedule()
    out = []
    for ci, mat in enumerate(matrices):
        m = mat if isinstance(mat, ad.Tensor) else ad.Tensor(mat)
        if ci == 0:
            params.validate(m.data.shape[0])
        valid = n_valid[ci] if n_valid is not None else m.data.shape[0]
        c1 = ad.conv1d_col(m, params.filter1, s1, n_valid=valid)
        valid = ad.conv1d_valid_rows(valid, k1, s1, c1.data.shape[0])
        p1 = ad.maxpool_col(c1, n1, n_valid=valid)
        valid = ad.maxpool_valid_rows(valid, n1, p1.data.shape[0])
        if params.relu_after_pool:
            p1 = ad.relu(p1)
        c2 = ad.conv1d_col(p1, params.filter2, s2, n_valid=valid)
        valid = ad.conv1d_valid_rows(valid, k2, s2, c2.data.shape[0])
        p2 = ad.maxpool_col(c2, n2, n_valid=valid)
        if params.relu_after_pool:
            p2 = ad.relu(p2)
        out.append(ad.reshape(p2, (m.data.shape[1],)))
    return out


@dataclass
class RetrievedFact:
    """The attended (e, r) pair, the translated object t = e + r, and the
    concatenated fact vector [e, r, t]; attention weights kept for audit."""

    e: ad.Tensor
    r: ad.Tensor
    t: ad.Tensor
    fact: ad.Tensor
    alpha_entities: ad.Tensor
    alpha_relations: ad.Tensor


def attend(context: ad.Tensor, candidates) -> tuple[ad.Tensor, ad.Tensor]:
    """Softmax over context-candidate dot products; pooled convex combination.

    ``candidates`` is a (count, dim) tensor or a list of vectors. A batched
    (B, dim) context yields (B, count) weights and (B, dim) pooled output.
    """
    if isinstance(candidates, (list, tuple)):
        if len(candidates) == 0:
            raise ValueError("attend needs at least one candidate")
        candidates = ad.stack_rows([c if isinstance(c, ad.Tensor) else ad.Tensor(c)
                                    for c in candidates])
    elif not isinstance(candidates, ad.Tensor):
        candidates = ad.Tensor(candidates)
    if candidates.data.shape[0] == 0:
        raise ValueError("attend needs at least one candidate")
    if context.data.ndim == 1:
        logits = ad.matmul(candidates, context)
    else:
        logits = ad.matmul(context, ad.transpose(candidates))
    weights = ad.softmax(logits)
    pooled = ad.matmul(weights, candidates)
    return weights, pooled


def _complete(c_e: ad.Tensor, c_r: ad.Tensor, entity_cands, relation_cands) -> RetrievedFact:
    alpha_e, e = attend(c_e, entity_cands)
    alpha_r, r = attend(c_r, relation_cands)
    t = ad.add(e, r)
    fact = ad.concat(ad.concat(e, r), t)
    return RetrievedFact(e=e, r=r, t=t, fact=fact,
                         alpha_entities=alpha_e, alpha_relations=alpha_r)


def retrieve_vanilla(c_e: ad.Tensor, c_r: ad.Tensor,
                     entity_table, relation_table) -> RetrievedFact:
    """Attend over every entity and relation vector directly."""
    return _complete(c_e, c_r, entity_table, relation_table)


def retrieve_conv(c_e: ad.Tensor, c_r: ad.Tensor,
                  entity_reps, relation_cands) -> RetrievedFact:
    """Attend over compact cluster summaries on the entity side.

    ``relation_cands`` may be cluster summaries too, or the raw relation
    table when the relation space is too small to cluster.
    """
    return _complete(c_e, c_r, entity_reps, relation_cands)


def dump_attention(path, names: list[str], weights: np.ndarray, top_k: int = 10) -> None:
    """Debug dump of the strongest attention targets, `name<TAB>weight`."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    order = np.argsort(-w, kind="stable")[:top_k]
    with open(path, "w", encoding="utf-8") as fh:
        for i in order:
            fh.write(f"{names[i]}\t{w[i]:.6f}\n")


def attention_entropy(weights: np.ndarray) -> float:
    """Mean Shannon entropy (nats) of attention rows; saturation diagnostic."""
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    w = np.clip(w, 1e-300, None)
    return float(-(w * np.log(w)).sum(axis=1).mean())
