"""Shared helpers: tiny corpora, vector files, and gazetteers on disk."""

import numpy as np
import pytest

from cmtag.corpus import Corpus, Sentence, TagSet
from cmtag.embeddings import EmbeddingTable


@pytest.fixture
def tagset():
    return TagSet()


def make_corpus(sent_specs, role="clean"):
    """Build a corpus from [(tokens, tags), ...]; tags may be None."""
    sentences = []
    for tokens, tags in sent_specs:
        tokens = tokens.split() if isinstance(tokens, str) else list(tokens)
        if isinstance(tags, str):
            tags = tags.split()
        sentences.append(Sentence(tokens, list(tags) if tags else None))
    return Corpus(sentences, role=role)


def make_table(words, dim=4, seed=0, oov_policy="zero"):
    """Deterministic random embedding table over the given words."""
    rng = np.random.default_rng(seed)
    return EmbeddingTable(dim, {w: rng.normal(size=dim) for w in words},
                          oov_policy=oov_policy)


def write_vectors(path, table):
    """Write an embedding table in the text vector format."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("%d %d\n" % (len(table.vectors), table.dimension))
        for word, vec in table.vectors.items():
            fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def write_gazetteer(path, forms):
    """One surface form per line; forms are strings of space-joined tokens."""
    with open(path, "w", encoding="utf-8") as fh:
        for form in forms:
            fh.write(form + "\n")
