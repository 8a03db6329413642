"""Gazetteer-based distant supervision.

A gazetteer maps multi-token surface forms to entity types.  Annotating
raw text with it yields the large noisy corpus; annotating a tag-stripped
copy of the small gold corpus yields (clean, noisy) label pairs from
which the confusion matrices are estimated.
"""

from dataclasses import dataclass

from .corpus import OUTSIDE, Corpus, Sentence
from .errors import ConfigError


@dataclass(frozen=True)
class LabeledPair:
    """One token's gold tag, its automatically assigned tag, and the word
    itself (kept for routing the pair to a word cluster later)."""

    clean: str
    noisy: str
    word: str


class Gazetteer:
    """Exact-match lookup of token sequences, optionally case-folded.

    Conflicting entries (same surface form listed under two types) are
    resolved first-wins; the number of discarded duplicates is kept in
    ``conflicts``.
    """

    def __init__(self, case_fold=False):
        self.case_fold = case_fold
        self.entries = {}  # tuple of tokens -> entity type
        self.type_counts = {}
        self.conflicts = 0
        self.skipped_empty = 0
        # index: first token -> [(form, type)] sorted longest first
        self._by_first = {}

    def __len__(self):
        return len(self.entries)

    def _key(self, tokens):
        if self.case_fold:
            return tuple(t.lower() for t in tokens)
        return tuple(tokens)

    def add(self, tokens, etype):
        form = self._key(tokens)
        if not form or any(not t for t in form):
            raise ConfigError("empty surface form in gazetteer entry")
        if form in self.entries:
            self.conflicts += 1
            return False
        self.entries[form] = etype
        self.type_counts[etype] = self.type_counts.get(etype, 0) + 1
        bucket = self._by_first.setdefault(form[0], [])
        bucket.append((form, etype))
        bucket.sort(key=lambda fe: -len(fe[0]))
        return True

    def match_at(self, tokens, start):
        """Longest entry matching ``tokens[start:]``, as (length, type)."""
        first = tokens[start].lower() if self.case_fold else tokens[start]
        for form, etype in self._by_first.get(first, ()):
            end = start + len(form)
            if end > len(tokens):
                continue
            if self._key(tokens[start:end]) == form:
                return len(form), etype
        return 0, None


def load_gazetteer(paths, case_fold=False):
    """Build one gazetteer from ``[(path, entity_type), ...]`` files.

    Each file lists one surface form per line, tokens space-separated.
    Empty lines are skipped and counted.
    """
    gaz = Gazetteer(case_fold=case_fold)
    for path, etype in paths:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                tokens = line.split()
                if not tokens:
                    gaz.skipped_empty += 1
                    continue
                gaz.add(tokens, etype)
    return gaz


def annotate(corpus, gaz):
    """Label an untagged corpus by greedy longest match, left to right.

    Matched spans get ``I-<TYPE>`` (IO scheme); everything else is O.
    Spans never overlap: after a match the scan resumes past its end.
    """
    if any(s.tags is not None for s in corpus):
        raise ConfigError("annotate expects an untagged corpus")
    sentences = []
    for sent in corpus:
        tags = [OUTSIDE] * len(sent.tokens)
        i = 0
        while i < len(sent.tokens):
            length, etype = gaz.match_at(sent.tokens, i)
            if length:
                for j in range(i, i + length):
                    tags[j] = "I-" + etype
                i += length
            else:
                i += 1
        sentences.append(Sentence(list(sent.tokens), tags))
    return Corpus(sentences, "noisy")


def collect_pairs(clean, gaz):
    """Re-annotate the gold corpus and zip token-wise into label pairs."""
    if not clean.is_tagged():
        raise ConfigError("collect_pairs requires a fully tagged corpus")
    auto = annotate(clean.untagged_copy(), gaz)
    pairs = []
    for gold_sent, auto_sent in zip(clean, auto):
        for word, y, y_hat in zip(gold_sent.tokens, gold_sent.tags, auto_sent.tags):
            pairs.append(LabeledPair(clean=y, noisy=y_hat, word=word))
    return pairs
