"""Hard word clusterings: k-means on embeddings, Brown on raw text.

Both produce a :class:`WordClustering` that maps every vocabulary word to
a cluster id in ``[0, p)``.  Unseen words map to the reserved id ``p``;
downstream the noise model routes that id to the global confusion matrix.
"""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError


class WordClustering:
    """word -> cluster id map with a reserved out-of-vocabulary id."""

    def __init__(self, mapping, p):
        if p < 1:
            raise ConfigError("cluster count must be >= 1")
        bad = [w for w, c in mapping.items() if not 0 <= c < p]
        if bad:
            raise ConfigError("cluster id out of range for %r" % bad[:3])
        self.mapping = dict(mapping)
        self.p = p
        self.oov_cluster_id = p

    def __len__(self):
        return len(self.mapping)

    def assign(self, word):
        return self.mapping.get(word, self.oov_cluster_id)


def assign(clustering, word):
    """Cluster id of ``word``, or the reserved OOV id if unmapped."""
    return clustering.assign(word)


def save_clustering(clustering, path):
    with open(path, "w", encoding="utf-8") as fh:
        for word, cid in clustering.mapping.items():
            fh.write("%s\t%d\n" % (word, cid))


def load_clustering(path, p=None):
    """Read ``word<TAB>id`` lines; p defaults to max id + 1."""
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            word, _, cid = line.rpartition("\t")
            mapping[word] = int(cid)
    if p is None:
        p = max(mapping.values()) + 1 if mapping else 1
    return WordClustering(mapping, p)


# ---------------------------------------------------------------------------
# k-means


@dataclass
class KMeansState:
    centroids: np.ndarray
    assignments: np.ndarray
    objective: float
    objective_trace: list = field(default_factory=list)
    iterations: int = 0


def _plus_plus_init(x, p, rng):
    n = x.shape[0]
    centroids = np.empty((p, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, p):
        total = d2.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centroids[i] = x[idx]
        d2 = np.minimum(d2, ((x - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans_fit(x, p, seed, max_iter=100):
    """Lloyd's algorithm with k-means++ seeding on the rows of ``x``.

    Ties in the assignment step go to the lowest centroid index.  An
    empty cluster seizes the point currently farthest from its own
    centroid, which keeps the objective non-increasing; that monotonicity
    is checked on every iteration.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if p < 1:
        raise ConfigError("cluster count must be >= 1")
    if np.unique(x, axis=0).shape[0] < p:
        raise ConfigError("fewer distinct points (%d) than clusters (%d)"
                          % (np.unique(x, axis=0).shape[0], p))
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(x, p, rng)
    assignments = None
    trace = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        # repair empty clusters one at a time
        while True:
            sizes = np.bincount(new_assign, minlength=p)
            empties = np.flatnonzero(sizes == 0)
            if empties.size == 0:
                break
            e = empties[0]
            own = d2[np.arange(n), new_assign]
            eligible = sizes[new_assign] > 1
            own = np.where(eligible, own, -np.inf)
            victim = int(own.argmax())
            centroids[e] = x[victim]
            d2[:, e] = ((x - centroids[e]) ** 2).sum(axis=1)
            new_assign[victim] = e
        objective = float(d2[np.arange(n), new_assign].sum())
        if trace and objective > trace[-1] * (1 + 1e-12) + 1e-12:
            raise NumericalError(
                "k-means objective increased: %r -> %r" % (trace[-1], objective)
            )
        trace.append(objective)
        if assignments is not None and np.array_equal(new_assign, assignments):
            assignments = new_assign
            break
        assignments = new_assign
        for c in range(p):
            members = x[assignments == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    return KMeansState(centroids, assignments, trace[-1], trace, iterations)


def kmeans_cluster(points, p, seed, max_iter=100):
    """Cluster a ``word -> vector`` map; deterministic for a given seed."""
    words = list(points)
    x = np.array([points[w] for w in words], dtype=float)
    state = kmeans_fit(x, p, seed, max_iter=max_iter)
    mapping = {w: int(c) for w, c in zip(words, state.assignments)}
    return WordClustering(mapping, p)


# ---------------------------------------------------------------------------
# Brown clustering


def _ami_of_counts(counts):
    """Average mutual information of a cluster-level bigram count table."""
    total = counts.sum()
    if total <= 0:
        return 0.0
    prob = counts / total
    left = prob.sum(axis=1)
    right = prob.sum(axis=0)
    denom = np.outer(left, right)
    q = np.zeros_like(prob)
    mask = prob > 0
    q[mask] = prob[mask] * np.log(prob[mask] / denom[mask])
    return float(q.sum())


class BrownState:
    """Active clusters with their bigram counts and incremental AMI.

    Cluster identity is the position in ``members``; a merge folds the
    higher position into the lower one and deletes it, so position order
    is the deterministic tie-break order.
    """

    def __init__(self, seed_words, out_counts):
        self.members = [[w] for w in seed_words]
        self.pos = {w: i for i, w in enumerate(seed_words)}
        c = len(seed_words)
        self.counts = np.zeros((c, c))
        for w in seed_words:
            for other, n in out_counts[w].items():
                if other in self.pos:
                    self.counts[self.pos[w], self.pos[other]] += n
        self.ami = _ami_of_counts(self.counts)

    def __len__(self):
        return len(self.members)

    def introduce(self, word, out_counts, in_counts):
        """Add a word as a new singleton cluster; its bigram mass with the
        already-active words enters the table now."""
        c = len(self.members)
        grown = np.zeros((c + 1, c + 1))
        grown[:c, :c] = self.counts
        for other, n in out_counts[word].items():
            if other in self.pos:
                grown[c, self.pos[other]] += n
        for other, n in in_counts[word].items():
            if other in self.pos:
                grown[self.pos[other], c] += n
        # the word is not in self.pos yet, so its self-bigrams were
        # skipped by both loops above
        grown[c, c] = out_counts[word].get(word, 0)
        self.counts = grown
        self.members.append([word])
        self.pos[word] = c
        # the total mass changed, so every term of the AMI changed
        self.ami = _ami_of_counts(self.counts)

    def best_merge(self):
        """Pair (a, b), a < b, whose merge loses the least mutual
        information, with ties broken by position order."""
        c = len(self.members)
        counts = self.counts
        total = counts.sum()
        if total <= 0:
            return 0, 1, 0.0, self.ami
        prob = counts / total
        left = prob.sum(axis=1)
        right = prob.sum(axis=0)
        denom = np.outer(left, right)
        q = np.zeros_like(prob)
        mask = prob > 0
        q[mask] = prob[mask] * np.log(prob[mask] / denom[mask])
        qrow = q.sum(axis=1)
        qcol = q.sum(axis=0)
        s = qrow + qcol - np.diag(q)

        best = None  # (loss, a, b, ami_after)
        idx = np.arange(c)
        for a in range(c - 1):
            b_arr = idx[a + 1:]
            rows_m = prob[a, :][None, :] + prob[b_arr, :]
            cols_m = (prob[:, [a]] + prob[:, b_arr]).T
            plm = left[a] + left[b_arr]
            prm = right[a] + right[b_arr]

            qr = np.zeros_like(rows_m)
            m = rows_m > 0
            den = plm[:, None] * right[None, :]
            qr[m] = rows_m[m] * np.log(rows_m[m] / den[m])
            qr[:, a] = 0.0
            qr[np.arange(len(b_arr)), b_arr] = 0.0

            qc = np.zeros_like(cols_m)
            m = cols_m > 0
            den = left[None, :] * prm[:, None]
            qc[m] = cols_m[m] * np.log(cols_m[m] / den[m])
            qc[:, a] = 0.0
            qc[np.arange(len(b_arr)), b_arr] = 0.0

            pmm = prob[a, a] + prob[a, b_arr] + prob[b_arr, a] + prob[b_arr, b_arr]
            q_self = np.zeros_like(pmm)
            m = pmm > 0
            q_self[m] = pmm[m] * np.log(pmm[m] / (plm[m] * prm[m]))

            added = qr.sum(axis=1) + qc.sum(axis=1) + q_self
            removed = s[a] + s[b_arr] - q[a, b_arr] - q[b_arr, a]
            losses = removed - added
            k = int(losses.argmin())
            if best is None or losses[k] < best[0]:
                best = (float(losses[k]), a, int(b_arr[k]),
                        self.ami - float(removed[k]) + float(added[k]))
        loss, a, b, ami_after = best
        return a, b, loss, ami_after

    def merge(self, a, b, ami_after):
        """Fold cluster b into cluster a (a < b) and drop position b."""
        counts = self.counts
        counts[a, :] += counts[b, :]
        counts[:, a] += counts[:, b]
        self.counts = np.delete(np.delete(counts, b, axis=0), b, axis=1)
        self.members[a].extend(self.members[b])
        del self.members[b]
        for w in self.members[a]:
            self.pos[w] = a
        for i in range(b, len(self.members)):
            for w in self.members[i]:
                self.pos[w] = i
        self.ami = ami_after


def brown_cluster(corpus, p, vocab_cap=None, window=50, on_event=None):
    """Agglomerative mutual-information clustering of corpus words.

    The ``p + window`` most frequent words start as singleton clusters;
    the rest enter one at a time by frequency rank, and after each
    introduction the pair of clusters whose merge costs the least average
    mutual information is merged, until p clusters remain.  Words ranked
    below ``vocab_cap`` are left unmapped (they take the OOV id).

    ``on_event`` is called with ``("seed", words)``, ``("introduce",
    word)`` and ``("merge", a, b, loss, ami)`` tuples as the run
    progresses, which is how the bookkeeping is audited in tests.
    """
    freq = Counter()
    for sent in corpus:
        freq.update(sent.tokens)
    if not freq:
        raise ConfigError("empty corpus")
    ranked = sorted(freq, key=lambda w: (-freq[w], w))
    if vocab_cap is not None:
        ranked = ranked[:vocab_cap]
    if p < 1 or p > len(ranked):
        raise ConfigError(
            "cluster count %d not in [1, %d] for this vocabulary" % (p, len(ranked))
        )
    vocab = set(ranked)
    out_counts = {w: Counter() for w in ranked}
    in_counts = {w: Counter() for w in ranked}
    for sent in corpus:
        for w1, w2 in zip(sent.tokens, sent.tokens[1:]):
            if w1 in vocab and w2 in vocab:
                out_counts[w1][w2] += 1
                in_counts[w2][w1] += 1

    n_seed = min(len(ranked), p + window)
    table = BrownState(ranked[:n_seed], out_counts)
    queue = ranked[n_seed:]
    if on_event:
        on_event(("seed", list(ranked[:n_seed])))
    while queue or len(table) > p:
        if len(table) <= p or len(table) < 2:
            word = queue.pop(0)
            table.introduce(word, out_counts, in_counts)
            if on_event:
                on_event(("introduce", word))
            continue
        a, b, loss, ami_after = table.best_merge()
        table.merge(a, b, ami_after)
        if on_event:
            on_event(("merge", a, b, loss, table.ami))
        if queue:
            word = queue.pop(0)
            table.introduce(word, out_counts, in_counts)
            if on_event:
                on_event(("introduce", word))
    mapping = {}
    for cid, words in enumerate(table.members):
        for w in words:
            mapping[w] = cid
    return WordClustering(mapping, p)
