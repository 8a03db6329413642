"""Synthetic corpora with feature-dependent label noise.

Each word belongs to one latent cluster, and each cluster corrupts tags
through its own known row-stochastic matrix.  Clean text comes from a
small tag Markov chain with per-(cluster, tag) vocabularies; synthetic
embeddings place the cluster vocabularies in well separated regions so
k-means on them can recover the latent clusters.  On top of that sits
the driver that runs model variants over seeds and tabulates mean F1.
"""

import dataclasses
import json
import sys
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .clustering import WordClustering, brown_cluster, kmeans_cluster
from .corpus import Corpus, Sentence, TagSet
from .distant import Gazetteer, LabeledPair
from .embeddings import EmbeddingTable, fit_pca
from .errors import CmtagError, ConfigError
from .evaluation import score
from .noise import build_model
from .tagger import TrainConfig, predict, train

MODE_NAMES = (
    "base",
    "base+noise",
    "global-cm",
    "global-id-cm",
    "brown-cm", "brown-cm-freq", "brown-cm-ip", "brown-cm-freq-ip",
    "kmeans-cm", "kmeans-cm-freq", "kmeans-cm-ip", "kmeans-cm-freq-ip",
)


@dataclass(frozen=True)
class ModeSpec:
    train_mode: str       # base | base+noise | cm
    cluster_method: str   # None | brown | kmeans
    noise_mode: str       # None | global | global-identity | cluster...


def parse_mode(mode):
    """Split a variant name into training routing, clustering method,
    and confusion-matrix mode."""
    if mode == "base":
        return ModeSpec("base", None, None)
    if mode == "base+noise":
        return ModeSpec("base+noise", None, None)
    if mode == "global-cm":
        return ModeSpec("cm", None, "global")
    if mode == "global-id-cm":
        return ModeSpec("cm", None, "global-identity")
    for method in ("brown", "kmeans"):
        prefix = method + "-cm"
        if mode == prefix or mode.startswith(prefix + "-"):
            suffix = mode[len(prefix):]
            noise = {"": "cluster", "-freq": "cluster-freq",
                     "-ip": "cluster-ip",
                     "-freq-ip": "cluster-freq-ip"}.get(suffix)
            if noise is not None:
                return ModeSpec("cm", method, noise)
    raise ConfigError("unknown mode %r (known: %s)"
                      % (mode, ", ".join(MODE_NAMES)))


# ---------------------------------------------------------------------------
# synthetic data


@dataclass
class SyntheticSpec:
    entity_types: tuple = ("PER", "LOC", "ORG", "MISC")
    n_clusters: int = 2
    true_matrices: object = None   # (n_clusters, k, k) nested lists or array
    words_per_cell: int = 150
    sentence_len: tuple = (5, 10)
    n_clean: int = 200
    n_noisy: int = 5000
    n_dev: int = 200
    n_test: int = 800
    embed_dim: int = 16
    cluster_sep: float = 6.0
    tag_sep: float = 1.5
    embed_noise: float = 1.0
    seed: int = 0

    def tagset(self):
        return TagSet(self.entity_types)

    def matrices(self):
        if self.true_matrices is None:
            return default_true_matrices(self.tagset(), self.n_clusters)
        return np.asarray(self.true_matrices, dtype=float)

    def validate(self):
        k = len(self.tagset())
        mats = self.matrices()
        if mats.shape != (self.n_clusters, k, k):
            raise ConfigError("true matrices must be %r, got %r"
                              % ((self.n_clusters, k, k), mats.shape))
        if not np.allclose(mats.sum(axis=2), 1.0, atol=1e-9):
            raise ConfigError("true matrix rows must sum to 1")
        if np.any(mats < 0):
            raise ConfigError("true matrix entries must be non-negative")
        if self.n_clusters + k > self.embed_dim:
            raise ConfigError("embed_dim too small to separate clusters and tags")
        lo, hi = self.sentence_len
        if lo < 1 or hi < lo:
            raise ConfigError("bad sentence length range")
        if min(self.n_clean, self.n_noisy, self.n_dev, self.n_test,
               self.words_per_cell, self.n_clusters) < 1:
            raise ConfigError("sizes must be positive")


def default_true_matrices(tagset, n_clusters=2):
    """Divergent per-cluster noise: cluster 0 drops 80% of PER to O,
    cluster 1 flips 80% of LOC to PER, and every cluster drops 15% of
    MISC to O (a shared component the global matrix can capture).

    The drop/flip rates are high enough that a single global matrix is
    badly wrong in both clusters, which is what separates the
    cluster-conditioned variants from the global one."""
    k = len(tagset)
    o = tagset.index("O")
    per = tagset.index("I-PER")
    loc = tagset.index("I-LOC")
    misc = tagset.index("I-MISC")
    mats = np.stack([np.eye(k)] * n_clusters)
    for c in range(n_clusters):
        mats[c, misc, misc] = 0.85
        mats[c, misc, o] = 0.15
    mats[0, per, per] = 0.2
    mats[0, per, o] = 0.8
    if n_clusters > 1:
        mats[1, loc, loc] = 0.2
        mats[1, loc, per] = 0.8
    return mats


def _cell_words(spec):
    """Disjoint vocabulary for every (cluster, tag index) cell."""
    k = len(spec.tagset())
    return [[["c%dt%dw%03d" % (c, t, i) for i in range(spec.words_per_cell)]
             for t in range(k)]
            for c in range(spec.n_clusters)]


def _tag_chain(k):
    """Start distribution and transition matrix over tag indices; index
    0 is O, the rest are entity types."""
    start = np.full(k, 0.3 / (k - 1))
    start[0] = 0.7
    trans = np.empty((k, k))
    trans[0] = start
    for i in range(1, k):
        trans[i] = 0.15 / (k - 2) if k > 2 else 0.0
        trans[i, i] = 0.35
        trans[i, 0] = 0.5
    return start, trans


def _sample_corpus(spec, cells, n_sentences, rng, role):
    tagset = spec.tagset()
    k = len(tagset)
    start, trans = _tag_chain(k)
    start_cum = start.cumsum()
    trans_cum = trans.cumsum(axis=1)
    lo, hi = spec.sentence_len
    sentences = []
    for _ in range(n_sentences):
        length = int(rng.integers(lo, hi + 1))
        u = rng.random(length)
        clusters = rng.integers(spec.n_clusters, size=length)
        picks = rng.integers(spec.words_per_cell, size=length)
        tokens = []
        tags = []
        t = 0
        for pos in range(length):
            cum = start_cum if pos == 0 else trans_cum[t]
            t = int((cum <= u[pos]).sum())
            tokens.append(cells[clusters[pos]][t][picks[pos]])
            tags.append(tagset.tag(t))
        sentences.append(Sentence(tokens, tags))
    return Corpus(sentences, role=role)


def corrupt_corpus(corpus, clustering, matrices, tagset, seed):
    """Resample every tag through its word's cluster matrix."""
    matrices = np.asarray(matrices, dtype=float)
    rng = np.random.default_rng(seed)
    cums = matrices.cumsum(axis=2)
    sentences = []
    for sent in corpus:
        u = rng.random(len(sent.tokens))
        tags = []
        for pos, (word, tag) in enumerate(zip(sent.tokens, sent.tags)):
            c = clustering.assign(word)
            i = tagset.index(tag)
            j = int((cums[c, i] <= u[pos]).sum())
            tags.append(tagset.tag(j))
        sentences.append(Sentence(list(sent.tokens), tags))
    return Corpus(sentences, role="noisy")


def generate(spec):
    """All artifacts of one synthetic world, deterministic in the seed.

    Returns (clean, noisy, dev, test, true clustering, embeddings).
    The noisy corpus carries corrupted tags; the other three are gold.
    """
    spec.validate()
    tagset = spec.tagset()
    k = len(tagset)
    seeds = np.random.SeedSequence(spec.seed).spawn(6)
    cells = _cell_words(spec)

    mapping = {}
    for c in range(spec.n_clusters):
        for t in range(k):
            for w in cells[c][t]:
                mapping[w] = c
    clustering = WordClustering(mapping, spec.n_clusters)

    emb_rng = np.random.default_rng(seeds[0])
    vectors = {}
    for c in range(spec.n_clusters):
        for t in range(k):
            base = np.zeros(spec.embed_dim)
            base[c] = spec.cluster_sep
            base[spec.n_clusters + t] = spec.tag_sep
            for w in cells[c][t]:
                vectors[w] = base + emb_rng.normal(
                    0.0, spec.embed_noise, spec.embed_dim)
    table = EmbeddingTable(spec.embed_dim, vectors)

    clean = _sample_corpus(spec, cells, spec.n_clean,
                           np.random.default_rng(seeds[1]), "clean")
    dev = _sample_corpus(spec, cells, spec.n_dev,
                         np.random.default_rng(seeds[2]), "clean")
    test = _sample_corpus(spec, cells, spec.n_test,
                          np.random.default_rng(seeds[3]), "clean")
    gold_noisy = _sample_corpus(spec, cells, spec.n_noisy,
                                np.random.default_rng(seeds[4]), "noisy")
    noisy = corrupt_corpus(gold_noisy, clustering, spec.matrices(), tagset,
                           seeds[5])
    return clean, noisy, dev, test, clustering, table


def collect_noise_pairs(clean, clustering, matrices, tagset, seed):
    """(clean tag, corrupted tag, word) pairs from a fresh corruption of
    the clean corpus, the synthetic stand-in for re-annotating it."""
    corrupted = corrupt_corpus(clean, clustering, matrices, tagset, seed)
    pairs = []
    for sent, bad in zip(clean, corrupted):
        for word, ct, nt in zip(sent.tokens, sent.tags, bad.tags):
            pairs.append(LabeledPair(ct, nt, word))
    return pairs


def synthetic_gazetteer(spec, coverage=0.35, contamination=4):
    """A gazetteer knowing a fraction of each entity vocabulary cell plus
    a few plain words mislisted as entities."""
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed).spawn(7)[6])
    tagset = spec.tagset()
    cells = _cell_words(spec)
    gaz = Gazetteer()
    for c in range(spec.n_clusters):
        for etype in spec.entity_types:
            t = tagset.index("I-" + etype)
            words = cells[c][t]
            n_keep = int(round(coverage * len(words)))
            for i in sorted(rng.choice(len(words), n_keep, replace=False)):
                gaz.add((words[i],), etype)
        o_words = cells[c][0]
        wrong = rng.choice(len(o_words), contamination, replace=False)
        for i in sorted(wrong):
            etype = spec.entity_types[int(rng.integers(len(spec.entity_types)))]
            gaz.add((o_words[i],), etype)
    return gaz


# ---------------------------------------------------------------------------
# experiment driver


@dataclass
class VariantConfig:
    mode: str
    p: int = 4
    pca_dim: int = 8
    fraction: float = 0.75
    lam: float = 0.25
    vocab_cap: int = None

    @property
    def name(self):
        return self.mode


@dataclass
class VariantResult:
    name: str
    scores: list
    mean_f1: float
    std_err: float


@dataclass
class TrendReport:
    seeds: list
    results: dict = field(default_factory=dict)


def count_group_instances(corpora, clustering):
    counts = Counter()
    for corpus in corpora:
        for sent in corpus:
            for word in sent.tokens:
                counts[clustering.assign(word)] += 1
    return dict(counts)


def _corpus_vocab(corpora):
    vocab = set()
    for corpus in corpora:
        for sent in corpus:
            vocab.update(sent.tokens)
    return sorted(vocab)


def build_clustering(method, variant, corpora, emb, seed):
    """The word clustering a variant trains with, from data alone."""
    if method == "kmeans":
        vocab = _corpus_vocab(corpora)
        mat = np.stack([emb.lookup(w) for w in vocab])
        pca = fit_pca(mat, variant.pca_dim, seed=seed)
        points = {w: pca.project(emb.lookup(w)) for w in vocab}
        return kmeans_cluster(points, variant.p, seed=seed)
    if method == "brown":
        merged = Corpus([Sentence(list(s.tokens)) for c in corpora for s in c])
        return brown_cluster(merged, variant.p, vocab_cap=variant.vocab_cap)
    raise ConfigError("unknown clustering method %r" % method)


def run_variant(variant, clean, noisy, dev, test, emb, pairs, seed,
                train_config=None, tagset=None):
    """One (variant, seed) pipeline run; returns (test F1, details)."""
    if tagset is None:
        tagset = TagSet()
    ms = parse_mode(variant.mode)
    config = dataclasses.replace(train_config or TrainConfig(),
                                 seed=seed, mode=ms.train_mode)
    clustering = None
    cm = None
    if ms.train_mode == "cm":
        lam = variant.lam if ms.noise_mode in ("cluster-ip",
                                               "cluster-freq-ip") else 0.0
        if ms.cluster_method is not None:
            clustering = build_clustering(ms.cluster_method, variant,
                                          (clean, noisy), emb, seed)
            counts = count_group_instances((clean, noisy), clustering)
        else:
            counts = None
        cm = build_model(pairs, clustering, ms.noise_mode, lam=lam,
                         fraction=variant.fraction, tagset=tagset,
                         group_counts=counts)
    model, cm, log = train(clean, noisy, dev, cm, config, emb,
                           clustering=clustering, tagset=tagset)
    predicted = predict(model, test, emb, tagset, config.window)
    report = score(test, predicted)
    details = {"mode": variant.mode, "seed": seed, "test_f1": report.f1,
               "epochs": len(log), "log": log}
    return report.f1, details


def run_matrix_experiment(spec, variants, seeds, train_config=None,
                          progress=None):
    """Every variant on every seed, each seed its own synthetic world.

    Returns a TrendReport of per-variant mean F1 and standard error.
    """
    seeds = list(seeds)
    if len(seeds) < 3:
        raise ConfigError("need at least 3 seeds for a standard error")
    scores = {v.name: [] for v in variants}
    tagset = spec.tagset()
    for seed in seeds:
        world = dataclasses.replace(spec, seed=seed)
        clean, noisy, dev, test, true_clust, emb = generate(world)
        pair_seed = np.random.SeedSequence([seed, 1]).generate_state(1)[0]
        pairs = collect_noise_pairs(clean, true_clust, world.matrices(),
                                    tagset, int(pair_seed))
        for variant in variants:
            try:
                f1, details = run_variant(variant, clean, noisy, dev, test,
                                          emb, pairs, seed, train_config,
                                          tagset)
            except Exception as exc:
                raise CmtagError("variant %r failed on seed %d: %s"
                                 % (variant.name, seed, exc)) from exc
            scores[variant.name].append(f1)
            if progress:
                progress("%-22s seed %-3d f1 %5.1f  (%d epochs)"
                         % (variant.name, seed, f1, details["epochs"]))
    report = TrendReport(seeds)
    for v in variants:
        arr = np.array(scores[v.name])
        se = float(arr.std(ddof=1) / np.sqrt(len(arr)))
        report.results[v.name] = VariantResult(v.name, [float(s) for s in arr],
                                               float(arr.mean()), se)
    return report


def render_trend(report):
    lines = ["%-22s %8s %8s  %s" % ("variant", "mean f1", "se", "runs")]
    for name, res in report.results.items():
        runs = " ".join("%5.1f" % s for s in res.scores)
        lines.append("%-22s %8.1f %8.2f  %s"
                     % (name, res.mean_f1, res.std_err, runs))
    return "\n".join(lines)


def trend_json(report):
    return {
        "seeds": list(report.seeds),
        "variants": [
            {
                "name": res.name,
                "mean_f1": round(res.mean_f1, 2),
                "std_err": round(res.std_err, 3),
                "scores": [round(s, 2) for s in res.scores],
            }
            for res in report.results.values()
        ],
    }


def default_spec():
    return SyntheticSpec()


def load_spec(path):
    """SyntheticSpec from a JSON or TOML file of field overrides."""
    if path.endswith(".toml"):
        if sys.version_info >= (3, 11):
            import tomllib as toml
        else:
            import tomli as toml
        with open(path, "rb") as fh:
            doc = toml.load(fh)
    else:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    known = {f.name for f in dataclasses.fields(SyntheticSpec)}
    bad = set(doc) - known
    if bad:
        raise ConfigError("unknown spec fields: %s" % ", ".join(sorted(bad)))
    if "entity_types" in doc:
        doc["entity_types"] = tuple(doc["entity_types"])
    if "sentence_len" in doc:
        doc["sentence_len"] = tuple(doc["sentence_len"])
    return dataclasses.replace(SyntheticSpec(), **doc)
