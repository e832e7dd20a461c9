"""Knowledge-graph data model and file ingestion.

Triple files are UTF-8, one ``head<TAB>relation<TAB>tail`` per line;
``#``-prefixed comment lines and blank lines are ignored. Description
files are ``entity<TAB>free text`` per line.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Triple:
    head: int
    relation: int
    tail: int

    def key(self) -> tuple[int, int, int]:
        return (self.head, self.relation, self.tail)


@dataclass
class KgVocab:
    """Id/name bijections for entities and relations, plus optional
    tokenized descriptions per entity."""

    entity_names: list[str] = field(default_factory=list)
    relation_names: list[str] = field(default_factory=list)
    descriptions: dict[int, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        self._entity_ids = {n: i for i, n in enumerate(self.entity_names)}
        self._relation_ids = {n: i for i, n in enumerate(self.relation_names)}

    @property
    def n_entities(self) -> int:
        return len(self.entity_names)

    @property
    def n_relations(self) -> int:
        return len(self.relation_names)

    def entity_id(self, name: str, create: bool = False) -> int:
        eid = self._entity_ids.get(name)
        if eid is None:
            if not create:
                raise KeyError(f"unknown entity {name!r}")
            eid = len(self.entity_names)
            self.entity_names.append(name)
            self._entity_ids[name] = eid
        return eid

    def relation_id(self, name: str, create: bool = False) -> int:
        rid = self._relation_ids.get(name)
        if rid is None:
            if not create:
                raise KeyError(f"unknown relation {name!r}")
            rid = len(self.relation_names)
            self.relation_names.append(name)
            self._relation_ids[name] = rid
        return rid

    def has_entity(self, name: str) -> bool:
        return name in self._entity_ids

    def description(self, entity: int) -> list[str]:
        return self.descriptions.get(entity, [])


class TripleSet:
    """Triples in ingestion order plus an index for membership tests."""

    def __init__(self, triples=()):
        self.triples: list[Triple] = []
        self.index: set[tuple[int, int, int]] = set()
        for t in triples:
            self.add(t)

    def add(self, t: Triple) -> bool:
        """Returns False when the triple is already present."""
        if t.key() in self.index:
            return False
        self.triples.append(t)
        self.index.add(t.key())
        return True

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self):
        return iter(self.triples)

    def __contains__(self, t: Triple) -> bool:
        return t.key() in self.index


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line


def parse_triples(path) -> tuple[KgVocab, TripleSet, int]:
    """Read a triple file, building the vocabulary in first-appearance order.

    Returns (vocab, triples, duplicate_count). Duplicate lines are
    deduplicated; the count is reported back and logged.
    """
    vocab = KgVocab()
    triples = TripleSet()
    duplicates = 0
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 3 or not all(p.strip() for p in parts):
            raise ParseError(f"expected 'head<TAB>relation<TAB>tail', got {line!r}", line=lineno)
        h, r, t = (p.strip() for p in parts)
        triple = Triple(
            vocab.entity_id(h, create=True),
            vocab.relation_id(r, create=True),
            vocab.entity_id(t, create=True),
        )
        if not triples.add(triple):
            duplicates += 1
    if len(triples) == 0:
        raise ValueError(f"no triples found in {path}")
    if duplicates:
        log.warning("%d duplicate triple line(s) in %s", duplicates, path)
    return vocab, triples, duplicates


def write_triples(path, vocab: KgVocab, triples: TripleSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(f"{vocab.entity_names[t.head]}\t{vocab.relation_names[t.relation]}\t"
                     f"{vocab.entity_names[t.tail]}\n")


def parse_descriptions(path, vocab: KgVocab) -> tuple[KgVocab, int]:
    """Attach tokenized (lowercase, whitespace-split) descriptions to entities.

    Lines naming unknown entities are skipped with a warning; the skip count
    is returned. Entities without a line keep an empty description.
    """
    skipped = 0
    for lineno, line in _data_lines(path):
        name, _, text = line.partition("\t")
        name = name.strip()
        if not vocab.has_entity(name):
            log.warning("line %d: unknown entity %r, skipped", lineno, name)
            skipped += 1
            continue
        vocab.descriptions[vocab.entity_id(name)] = text.lower().split()
    return vocab, skipped


def write_descriptions(path, vocab: KgVocab) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for eid in sorted(vocab.descriptions):
            fh.write(f"{vocab.entity_names[eid]}\t{' '.join(vocab.descriptions[eid])}\n")


def corrupt(t: Triple, vocab: KgVocab, rng: np.random.Generator) -> Triple:
    """Negative sample: replace head or tail (p=0.5 each) with a different
    uniformly drawn entity. Unfiltered, so the result may coincide with some
    other true triple, but never with the input."""
    n = vocab.n_entities
    if n < 2:
        raise ValueError("corruption needs at least 2 entities")
    replace_head = rng.random() < 0.5
    old = t.head if replace_head else t.tail
    new = int(rng.integers(n - 1))
    if new >= old:
        new += 1
    if replace_head:
        return Triple(new, t.relation, t.tail)
    return Triple(t.head, t.relation, new)
