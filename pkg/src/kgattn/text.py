"""Tokenization, word vectors, and the LSTM context-vector branches.

Each of the three branches (entity retrieval, relation retrieval,
classification) owns a disjoint LSTM + projection; the word-vector table
is shared below them. A branch maps a token sequence to a context vector:
the masked mean of hidden states, projected and passed through ReLU.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ParseError

log = logging.getLogger(__name__)

UNK = "<unk>"
_TOKEN_RE = re.compile(r"\w+")

BRANCHES = ("entity", "relation", "cls")


def split_tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class TokenSequence:
    ids: np.ndarray    # (T,) int token ids, padded with the unknown id
    mask: np.ndarray   # (T,) bool, True on the real-token prefix
    n_real: int


@dataclass
class WordVectors:
    words: list[str]
    matrix: np.ndarray  # (vocab, word_dim); row 0 is the unknown token

    def __post_init__(self):
        self._ids = {w: i for i, w in enumerate(self.words)}

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def id_of(self, word: str) -> int:
        return self._ids.get(word, 0)

    def __contains__(self, word: str) -> bool:
        return word in self._ids


def build_word_vectors(words, dim: int, seed: int = 0, sigma: float = 0.1) -> WordVectors:
    """Random Gaussian word vectors (trained jointly downstream)."""
    rng = np.random.default_rng(seed)
    ordered = [UNK] + [w for w in words if w != UNK]
    return WordVectors(ordered, rng.normal(0.0, sigma, size=(len(ordered), dim)))


def load_word_vectors(path) -> tuple[WordVectors, int]:
    """Parse `word v1 ... v_dw` lines; first occurrence wins on duplicates.

    Returns the table plus the duplicate-line count. An unknown-token row of
    zeros is prepended when absent.
    """
    words, rows = [], []
    seen = {}
    duplicates = 0
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if dim is None:
                dim = len(parts) - 1
                if dim < 1:
                    raise ParseError("word vector line needs at least one value", line=lineno)
            if len(parts) != dim + 1:
                raise ParseError(f"expected {dim} values, got {len(parts) - 1}", line=lineno)
            word = parts[0]
            if word in seen:
                duplicates += 1
                log.warning("line %d: duplicate word %r ignored", lineno, word)
                continue
            seen[word] = True
            words.append(word)
            rows.append([float(v) for v in parts[1:]])
    if not rows:
        raise ParseError("empty word-vector file", line=1)
    if UNK not in seen:
        words.insert(0, UNK)
        rows.insert(0, [0.0] * dim)
    return WordVectors(words, np.array(rows)), duplicates


def tokenize(text: str, vocab: WordVectors, max_len: int) -> TokenSequence:
    """Lowercase, split on non-word characters, truncate to max_len, pad."""
    tokens = split_tokens(text)
    if not tokens:
        raise ValueError("cannot tokenize empty text")
    tokens = tokens[:max_len]
    ids = np.zeros(max_len, dtype=np.int64)
    mask = np.zeros(max_len, dtype=bool)
    for i, tok in enumerate(tokens):
        ids[i] = vocab.id_of(tok)
        mask[i] = True
    return TokenSequence(ids=ids, mask=mask, n_real=len(tokens))


@dataclass
class LabeledExample:
    label: str
    text: str


def load_dataset(path) -> list[LabeledExample]:
    """Read `label<TAB>text` lines."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            label, sep, body = line.partition("\t")
            if not sep or not body.strip():
                raise ParseError("expected 'label<TAB>text'", line=lineno)
            out.append(LabeledExample(label=label.strip(), text=body))
    if not out:
        raise ParseError("empty dataset file", line=1)
    return out


def write_dataset(path, examples) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(f"{ex.label}\t{ex.text}\n")


@dataclass
class BranchParams:
    """One encoder branch: an LSTM plus its ReLU projection into KG space."""

    lstm: ad.LstmParams
    proj: ad.Tensor  # (hidden, kg_dim)

    def tensors(self, prefix: str) -> dict[str, ad.Tensor]:
        out = {f"{prefix}.{k}": v for k, v in self.lstm.tensors().items()}
        out[f"{prefix}.proj"] = self.proj
        return out


def init_branch(word_dim: int, hidden_dim: int, kg_dim: int,
                rng: np.random.Generator) -> BranchParams:
    lstm = ad.init_lstm_params(word_dim, hidden_dim, rng)
    proj = ad.Tensor(rng.normal(0.0, 1.0 / np.sqrt(hidden_dim), size=(hidden_dim, kg_dim)))
    return BranchParams(lstm=lstm, proj=proj)


def encode(ids: np.ndarray, mask: np.ndarray, embeddings: ad.Tensor,
           branch: BranchParams) -> ad.Tensor:
    """Context vector for a batch of sequences: ReLU(mean_t(h_t) @ proj).

    ``ids``/``mask`` are (B, T); the mean skips padding steps, so the output
    never depends on values at masked positions.
    """
    ids = np.atleast_2d(ids)
    mask = np.atleast_2d(mask)
    batch, steps = ids.shape
    n = branch.lstm.hidden_dim
    h, c = ad.zero_state(n, batch)
    states = []
    for t in range(steps):
        x_t = ad.take_rows(embeddings, ids[:, t])
        h, c = ad.lstm_cell(x_t, (h, c), branch.lstm)
        states.append(h)
    pooled = ad.mean_over_time(states, mask)
    return ad.relu(ad.matmul(pooled, branch.proj))
