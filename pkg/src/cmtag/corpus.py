"""CoNLL-style corpora, tag schemes and clean/noisy splitting.

Tags are plain strings.  In the IO scheme a tag is ``"O"`` or
``"I-<TYPE>"``; in IOB2 additionally ``"B-<TYPE>"`` marks the first token
of a span.  The package trains in IO (one matrix row/column per tag keeps
the confusion matrices small) and converts to IOB2 for entity-level
evaluation.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AlignmentError, ConfigError, ParseError

DEFAULT_ENTITY_TYPES = ("PER", "LOC", "ORG", "MISC")

OUTSIDE = "O"


class TagSet:
    """Ordered IO tag inventory; index 0 is always the outside tag.

    The integer index of a tag is its row/column in every probability
    matrix of the package, so the ordering must stay fixed for a run.
    """

    def __init__(self, entity_types=DEFAULT_ENTITY_TYPES):
        if len(set(entity_types)) != len(entity_types):
            raise ConfigError("duplicate entity types: %r" % (entity_types,))
        self.entity_types = tuple(entity_types)
        self.tags = [OUTSIDE] + ["I-" + t for t in self.entity_types]
        self._index = {t: i for i, t in enumerate(self.tags)}

    def __len__(self):
        return len(self.tags)

    def __iter__(self):
        return iter(self.tags)

    def __eq__(self, other):
        return isinstance(other, TagSet) and other.entity_types == self.entity_types

    def index(self, tag):
        try:
            return self._index[tag]
        except KeyError:
            raise ConfigError("tag %r not in tag set %r" % (tag, self.tags)) from None

    def tag(self, index):
        return self.tags[index]

    def valid_io(self, tag):
        return tag in self._index

    def valid_iob2(self, tag):
        if tag == OUTSIDE:
            return True
        return (
            len(tag) > 2
            and tag[0] in "BI"
            and tag[1] == "-"
            and tag[2:] in self.entity_types
        )


@dataclass
class Sentence:
    tokens: list
    tags: Optional[list] = None

    def __len__(self):
        return len(self.tokens)


@dataclass
class Corpus:
    sentences: list = field(default_factory=list)
    role: str = "clean"  # clean | noisy | unlabeled | test

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def n_tokens(self):
        return sum(len(s) for s in self.sentences)

    def is_tagged(self):
        return all(s.tags is not None for s in self.sentences)

    def untagged_copy(self, role="unlabeled"):
        return Corpus([Sentence(list(s.tokens), None) for s in self.sentences], role)


def read_conll(path, token_column=0, tag_column=1, tagset=None, scheme="io",
               role="clean"):
    """Read a whitespace-separated column file, one token per line.

    Blank lines separate sentences; lines whose first token is
    ``-DOCSTART-`` are skipped.  ``tag_column=None`` reads an untagged
    corpus.  Tags are validated against ``tagset`` in the given scheme and
    a :class:`ParseError` naming the line is raised on anything malformed.
    """
    if scheme not in ("io", "iob2"):
        raise ConfigError("unknown tag scheme %r" % scheme)
    tagset = tagset or TagSet()
    sentences = []
    tokens, tags = [], []

    def flush():
        if tokens:
            sentences.append(
                Sentence(list(tokens), list(tags) if tag_column is not None else None)
            )
            tokens.clear()
            tags.clear()

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            cols = line.split()
            if not cols:
                flush()
                continue
            if cols[0] == "-DOCSTART-":
                continue
            try:
                token = cols[token_column]
            except IndexError:
                raise ParseError(
                    "missing token column %d" % token_column, path, lineno
                ) from None
            tokens.append(token)
            if tag_column is None:
                continue
            try:
                tag = cols[tag_column]
            except IndexError:
                raise ParseError(
                    "missing tag column %d (ragged row)" % tag_column, path, lineno
                ) from None
            ok = tagset.valid_io(tag) if scheme == "io" else tagset.valid_iob2(tag)
            if not ok:
                raise ParseError(
                    "tag %r not valid in scheme %s for types %r"
                    % (tag, scheme, tagset.entity_types),
                    path,
                    lineno,
                )
            tags.append(tag)
    flush()
    return Corpus(sentences, role)


def write_conll(corpus, path):
    """Write ``token<TAB>tag`` lines, blank line between sentences."""
    with open(path, "w", encoding="utf-8") as fh:
        for sent in corpus:
            for i, token in enumerate(sent.tokens):
                if sent.tags is None:
                    fh.write(token + "\n")
                else:
                    fh.write("%s\t%s\n" % (token, sent.tags[i]))
            fh.write("\n")


def split_clean_noisy(corpus, clean_fraction, seed):
    """Partition a tagged corpus into a small clean part and a large
    untagged remainder headed for distant supervision.

    The split is by sentence and deterministic for a given seed.  The
    clean side keeps round(clean_fraction * n) sentences with their gold
    tags; the remainder is returned tag-stripped.
    """
    if not 0.0 < clean_fraction < 1.0:
        raise ConfigError("clean_fraction must be in (0,1), got %r" % clean_fraction)
    if not corpus.is_tagged():
        raise ConfigError("split requires a fully tagged corpus")
    n = len(corpus)
    n_clean = int(round(clean_fraction * n))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    clean_idx = set(perm[:n_clean].tolist())
    clean_sents, rest = [], []
    for i, sent in enumerate(corpus.sentences):
        if i in clean_idx:
            clean_sents.append(Sentence(list(sent.tokens), list(sent.tags)))
        else:
            rest.append(Sentence(list(sent.tokens), None))
    return Corpus(clean_sents, "clean"), Corpus(rest, "unlabeled")


def io_to_iob2(tags):
    """IO -> IOB2: the first token of each maximal same-type run gets B-."""
    out = []
    prev = OUTSIDE
    for tag in tags:
        if tag == OUTSIDE:
            out.append(OUTSIDE)
        elif tag != prev:
            out.append("B-" + tag[2:])
        else:
            out.append("I-" + tag[2:])
        prev = tag
    return out


def iob2_to_io(tags):
    """IOB2 -> IO: B- and I- both collapse to I- (adjacency is lost)."""
    return [t if t == OUTSIDE else "I-" + t[2:] for t in tags]
