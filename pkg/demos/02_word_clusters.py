"""
Grouping words without supervision
==================================

Confusion matrices can be conditioned on word clusters, so the package
ships two ways to build them: k-means over (PCA-reduced) embedding
vectors, and Brown clustering, which merges words agglomeratively to
keep the average mutual information between adjacent clusters high.
"""

import numpy as np

from cmtag.clustering import brown_cluster, kmeans_cluster
from cmtag.corpus import Corpus, Sentence
from cmtag.embeddings import fit_pca

# --- k-means on embeddings -------------------------------------------
# Three artificial word families, well separated in embedding space.
rng = np.random.default_rng(0)
points = {}
for c, family in enumerate(["fruit", "city", "verb"]):
    center = np.zeros(6)
    center[c] = 8.0
    for i in range(5):
        points["%s%d" % (family, i)] = center + rng.normal(0, 0.5, 6)

# PCA first: real embedding tables are wide, and a handful of principal
# components is enough for cluster structure.
mat = np.stack(list(points.values()))
pca = fit_pca(mat, 2, seed=0)
reduced = {w: pca.project(v) for w, v in points.items()}

clustering = kmeans_cluster(reduced, 3, seed=0)
for family in ["fruit", "city", "verb"]:
    ids = sorted({clustering.assign("%s%d" % (family, i)) for i in range(5)})
    print("%-6s -> cluster(s) %s" % (family, ids))
print("out-of-vocabulary words get the extra id %d" % clustering.assign("xyzzy"))

# --- Brown clustering on raw text ------------------------------------
# No vectors needed, just co-occurrence.  Weekdays and fruit appear in
# interchangeable contexts, so the merges discover the two families.
sentences = []
for day in ("monday", "tuesday", "friday"):
    for _ in range(4):
        sentences.append(Sentence(["on", day, "we", "rest"]))
for fruit in ("apples", "pears", "plums"):
    for _ in range(4):
        sentences.append(Sentence(["eat", fruit, "for", "lunch"]))

brown = brown_cluster(Corpus(sentences), p=4)
groups = {}
for word in ("monday", "tuesday", "friday", "apples", "pears", "plums"):
    groups.setdefault(brown.assign(word), []).append(word)
print()
for cid, words in sorted(groups.items()):
    print("brown cluster %d: %s" % (cid, " ".join(words)))
