"""Dev probe for the synthetic-task recipe. Not part of the package tests."""

import itertools
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from kgattn import clustering as cl
from kgattn import model as md
from kgattn import synth as sy
from kgattn import text as tx
from kgattn import transe as te


def run(seed=0, rels=6, dpp=4, holdout=1, skew=0.35, l=10, transe_epochs=250,
        lr=0.01, enc_lr=None, pre=0, epochs=60, mode="conv_kg", probe_every=10,
        kappa=1.0, quiet=False):
    cfg = sy.SynthConfig(seed=seed, n_relations=rels, docs_per_pair=dpp,
                         holdout_per_subject=holdout, home_skew=skew)
    data = sy.generate(cfg)
    ent, rel = te.train_transe(data.vocab, data.triples,
                               te.TransEConfig(dim=16, epochs=transe_epochs, seed=seed))
    clusters = cl.balanced_kmeans(ent, cl.ClusterConfig(n_clusters=l, seed=seed))
    groups = {}
    for s in data.subjects:
        groups.setdefault(data.group_of[s], []).append(
            int(clusters.assignments[data.vocab.entity_id(s)]))
    purity = sum(np.bincount(np.array(v)).max() for v in groups.values())
    kg, _ = md.prepare_kg(ent, rel, data.vocab.entity_names, data.vocab.relation_names,
                          l, seed, mode)
    labels = md.dataset_labels(data.train)
    tc = md.TrainConfig(mode=mode, epochs=0, pretrain_epochs=probe_every, seed=seed,
                        learning_rate=lr)
    voc = tx.build_word_vectors(md.vocabulary_of(data.train + data.test), tc.word_dim, seed=seed)
    cr = kg.clusters.rows_per_cluster if kg.clusters else None
    params = md.init_model(tc, voc, len(labels), kg.entities.dim, cr)
    if kappa != 1.0:
        params.entity_branch.proj.data *= kappa
        params.relation_branch.proj.data *= kappa
    track = []
    t0 = time.time()
    for block in range(epochs // probe_every):
        tr = md.pretrain_retrieval(data.train, params, kg, tc, labels)
        tst = md.evaluate_retrieval_only(params, data.test, kg, tc, labels)
        track.append((round(tr, 2), round(tst, 2)))
    if not quiet:
        print(f"seed={seed} rels={rels} dpp={dpp} skew={skew} purity={purity}/40 "
              f"lr={lr} kappa={kappa} [{time.time()-t0:.0f}s]")
        print("   ", track)
    return track[-1][1]


if __name__ == "__main__":
    kwargs = {}
    for arg in sys.argv[1:]:
        k, v = arg.split("=")
        kwargs[k] = float(v) if "." in v else int(v) if v.lstrip("-").isdigit() else v
    run(**kwargs)
