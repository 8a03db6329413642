"""
Entity-level scoring
====================

Taggers are scored on whole entities, not tokens: a predicted span
counts only if its boundaries and type both match a gold span.  The
scorer follows the official CoNLL script's semantics, including its
lenient treatment of an I- tag that continues nothing.
"""

from cmtag.corpus import Corpus, Sentence, io_to_iob2
from cmtag.evaluation import extract_spans, render_report, report_json, score

# Corpora are tagged in IO; evaluation converts to IOB2, where B- marks
# a span's first token, so adjacent entities stay distinguishable.
io_tags = ["I-PER", "I-PER", "O", "I-LOC"]
print("IO   :", io_tags)
print("IOB2 :", io_to_iob2(io_tags))

# Span extraction is the heart of the scorer: inclusive boundaries plus
# the entity type.
tags = ["B-PER", "I-PER", "O", "B-LOC", "B-LOC"]
for span in extract_spans(tags):
    print("tokens %d..%d is a %s" % (span.start, span.end, span.etype))

# A dangling I- (no span open, or the wrong type open) is repaired to
# B-, matching the reference implementation.
print("repaired:", extract_spans(["O", "I-ORG", "I-ORG"]))

# Scoring: one exact match, one boundary miss, one type miss.
gold = Corpus([
    Sentence("ada lovelace wrote it".split(),
             ["I-PER", "I-PER", "O", "O"]),
    Sentence("born in london".split(), ["O", "O", "I-LOC"]),
    Sentence("grace visited turing".split(), ["I-PER", "O", "I-PER"]),
])
pred = Corpus([
    Sentence("ada lovelace wrote it".split(),
             ["I-PER", "O", "O", "O"]),       # boundary error
    Sentence("born in london".split(), ["O", "O", "I-ORG"]),  # type error
    Sentence("grace visited turing".split(),
             ["I-PER", "O", "O"]),            # one hit, one miss
])
report = score(gold, pred)
print()
print(render_report(report))

# The same numbers ship as JSON for dashboards and logs.
print()
print(report_json(report))
