"""
Estimating how a labeling lies
==============================

A confusion matrix gives p(observed tag | true tag).  Counting the
(gold, automatic) pairs from a re-annotated clean corpus initializes
it; conditioning on word clusters lets different vocabulary regions
have different error profiles, and interpolating each cluster matrix
with the global one keeps rare clusters from overfitting.
"""

import numpy as np

from cmtag.clustering import WordClustering
from cmtag.corpus import TagSet
from cmtag.distant import LabeledPair
from cmtag.noise import (build_model, effective_matrix, render_heatmap,
                         row_softmax)

tagset = TagSet(("PER", "LOC"))
rng = np.random.default_rng(0)

# Two word populations with opposite failure modes: among the "a..."
# words the annotator drops half the persons but gets locations right;
# among the "b..." words persons are fine but a third of the locations
# come back labeled person.
clustering = WordClustering({"a%d" % i: 0 for i in range(50)}
                            | {"b%d" % i: 1 for i in range(50)}, 2)
pairs = []
for i in range(50):
    a, b = "a%d" % i, "b%d" % i
    for _ in range(6):
        pairs.append(LabeledPair("I-PER",
                                 "O" if rng.random() < 0.5 else "I-PER", a))
        pairs.append(LabeledPair("I-LOC", "I-LOC", a))
        pairs.append(LabeledPair("I-PER", "I-PER", b))
        pairs.append(LabeledPair("I-LOC",
                                 "I-PER" if rng.random() < 0.33 else "I-LOC",
                                 b))
        pairs.append(LabeledPair("O", "O", a))
        pairs.append(LabeledPair("O", "O", b))

# One global matrix sees the mixture of both behaviors.
global_model = build_model(pairs, None, "global", tagset=tagset)
print(render_heatmap(row_softmax(global_model.global_logits), list(tagset),
                     title="global"))

# Cluster-conditioned matrices separate them.  lam mixes each cluster
# matrix with the global one in probability space: lam=0.25 keeps 75%
# of the cluster-specific signal.
model = build_model(pairs, clustering, "cluster-ip", lam=0.25, tagset=tagset)
for g in (0, 1):
    print()
    print(render_heatmap(row_softmax(model.groups[g]), list(tagset),
                         title="cluster %d (before interpolation)" % g))

per = tagset.index("I-PER")
print()
print("effective p(observed | true=I-PER) rows after interpolation:")
for g in (0, 1):
    row = effective_matrix(model, g)[per]
    print("  cluster %d: %s" % (g, np.round(row, 3)))
print("  unseen cluster falls back to the global row: %s"
      % np.round(effective_matrix(model, 99)[per], 3))
