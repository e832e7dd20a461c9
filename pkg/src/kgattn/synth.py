"""Synthetic fact-determined classification benchmark.

Documents mention one subject entity token and one relation cue word inside
neutral filler. The label is the category of the object entity the KG
reaches from that subject via that relation; object names never appear in
any document, so text alone cannot reveal the label.

Subjects come in groups sharing one object profile (the same object under
every relation), and every subject is tied to its group anchor by an extra
relation, so translation-trained embeddings pull group members together and
balanced clustering recovers the groups. The train/test split holds out
whole (subject, relation) pairs: every subject, cue word, and object is
seen in training, but a test document's exact pair never is. A model can
therefore beat the marginal-label rate only by completing the fact through
the KG.

Separately, ``lattice_kg`` builds a small translation-consistent KG for
embedding sanity checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kg import KgVocab, Triple, TripleSet
from .text import LabeledExample

FILLER = [
    "the", "a", "of", "report", "notes", "today", "about", "with", "from",
    "latest", "update", "story", "item", "brief", "daily", "recent", "local",
    "world", "group", "panel", "review", "press", "wire", "desk", "memo",
    "note", "issue", "post", "page", "week",
]


@dataclass
class SynthConfig:
    n_groups: int = 8
    subjects_per_group: int = 5
    n_objects: int = 4
    n_classes: int = 4
    n_relations: int = 7
    docs_per_pair: int = 4
    min_len: int = 8
    max_len: int = 12
    holdout_per_subject: int = 2  # relations per subject whose docs go to test
    home_skew: float = 0.35      # share of a group's relations pointing at its home object
    seed: int = 0

    def __post_init__(self):
        if self.n_objects % self.n_classes != 0:
            raise ValueError("objects must spread evenly over classes")
        if not 1 <= self.holdout_per_subject < self.n_relations:
            raise ValueError("holdout must leave at least one training relation per subject")
        if not 0.0 <= self.home_skew < 1.0:
            raise ValueError("home_skew must lie in [0, 1)")


@dataclass
class SynthData:
    config: SynthConfig
    vocab: KgVocab
    triples: TripleSet
    train: list[LabeledExample]
    test: list[LabeledExample]
    subjects: list[str]
    objects: list[str]
    anchors: list[str]
    relations: list[str]
    cue_words: dict[str, list[str]]
    group_of: dict[str, int]
    object_of: dict[tuple[int, str], str]   # (group, relation) -> object name
    class_of: dict[str, str]                # object name -> label
    held_out: dict[str, list[str]] = field(default_factory=dict)


def generate(config: SynthConfig) -> SynthData:
    """Deterministic benchmark: KG triples plus labeled train/test documents."""
    rng = np.random.default_rng(config.seed)
    groups = range(config.n_groups)
    subjects = [f"s{g:02d}{i}" for g in groups for i in range(config.subjects_per_group)]
    objects = [f"obj{o}" for o in range(config.n_objects)]
    anchors = [f"hub{g}" for g in groups]
    relations = [f"rel{j}" for j in range(config.n_relations)]
    cue_words = {rel: [f"cue{j}a", f"cue{j}b"] for j, rel in enumerate(relations)}
    class_of = {obj: f"c{o % config.n_classes}" for o, obj in enumerate(objects)}
    group_of = {s: g for g in groups for s in subjects[g * config.subjects_per_group :
                                                       (g + 1) * config.subjects_per_group]}

    # one object profile per group, skewed toward a per-group home object so a
    # group's label marginal carries signal without determining the label
    object_of = {}
    home = {g: objects[int(rng.integers(config.n_objects))] for g in groups}
    for g in groups:
        for rel in relations:
            if rng.random() < config.home_skew:
                object_of[(g, rel)] = home[g]
            else:
                object_of[(g, rel)] = objects[int(rng.integers(config.n_objects))]

    vocab = KgVocab()
    triples = TripleSet()
    for s in subjects:
        sid = vocab.entity_id(s, create=True)
        for rel in relations:
            rid = vocab.relation_id(rel, create=True)
            oid = vocab.entity_id(object_of[(group_of[s], rel)], create=True)
            triples.add(Triple(sid, rid, oid))
        gid = vocab.entity_id(anchors[group_of[s]], create=True)
        triples.add(Triple(sid, vocab.relation_id("in_group", create=True), gid))
    # category edges: same-class objects share a tail, so translation training
    # pulls them toward one region and the object's class stays decodable
    for obj in objects:
        triples.add(Triple(vocab.entity_id(obj),
                           vocab.relation_id("category", create=True),
                           vocab.entity_id("cat_" + class_of[obj], create=True)))

    for s in subjects:
        vocab.descriptions[vocab.entity_id(s)] = ["member", "of", anchors[group_of[s]]]
    for obj in objects:
        vocab.descriptions[vocab.entity_id(obj)] = ["concept", obj]
    for a in anchors:
        vocab.descriptions[vocab.entity_id(a)] = ["group", "anchor", a]

    held_out = {s: [relations[i] for i in sorted(rng.choice(
        config.n_relations, size=config.holdout_per_subject, replace=False))]
        for s in subjects}

    train: list[LabeledExample] = []
    test: list[LabeledExample] = []
    for s in subjects:
        for rel in relations:
            label = class_of[object_of[(group_of[s], rel)]]
            bucket = test if rel in held_out[s] else train
            for _ in range(config.docs_per_pair):
                bucket.append(LabeledExample(label=label,
                                             text=_compose(s, rel, cue_words, rng, config)))
    return SynthData(config=config, vocab=vocab, triples=triples, train=train,
                     test=test, subjects=subjects, objects=objects, anchors=anchors,
                     relations=relations, cue_words=cue_words, group_of=group_of,
                     object_of=object_of, class_of=class_of, held_out=held_out)


def _compose(subject: str, relation: str, cue_words, rng: np.random.Generator,
             config: SynthConfig) -> str:
    length = int(rng.integers(config.min_len, config.max_len + 1))
    tokens = [FILLER[i] for i in rng.integers(len(FILLER), size=length)]
    pos = rng.choice(length, size=2, replace=False)
    tokens[pos[0]] = subject
    cues = cue_words[relation]
    tokens[pos[1]] = cues[int(rng.integers(len(cues)))]
    return " ".join(tokens)


# ---------------------------------------------------------------------------
# translation-consistent lattice KG for embedding sanity checks


def lattice_kg(n_rows: int = 4, n_cols: int = 5, seed: int = 0,
               holdout_fraction: float = 0.2) -> tuple[KgVocab, TripleSet, TripleSet, TripleSet]:
    """Grid entities with offset relations, so every fact is an exact
    translation of ground-truth points. Returns (vocab, all, train, held_out).
    """
    rng = np.random.default_rng(seed)
    vocab = KgVocab()
    for r in range(n_rows):
        for c in range(n_cols):
            vocab.entity_id(f"p{r}{c}", create=True)
    offsets = {"east": (0, 1), "south": (1, 0), "southeast": (1, 1),
               "east2": (0, 2), "south2": (2, 0)}
    every = TripleSet()
    for name, (dr, dc) in offsets.items():
        rid = vocab.relation_id(name, create=True)
        for r in range(n_rows - dr):
            for c in range(n_cols - dc):
                every.add(Triple(vocab.entity_id(f"p{r}{c}"),
                                 rid,
                                 vocab.entity_id(f"p{r + dr}{c + dc}")))
    order = rng.permutation(len(every))
    n_test = max(1, int(round(holdout_fraction * len(every))))
    all_triples = list(every)
    test = TripleSet(all_triples[i] for i in order[:n_test])
    train = TripleSet(all_triples[i] for i in order[n_test:])
    return vocab, every, train, test
