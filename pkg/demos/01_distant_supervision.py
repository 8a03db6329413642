"""
Annotating raw text with a gazetteer
====================================

A gazetteer is a list of known entity names.  Matching it against
untagged text produces cheap (and noisy) training data: names the list
knows are tagged, everything else silently becomes O.  This script
builds a small gazetteer, annotates a few sentences, and measures how
the automatic labels compare to the gold ones.
"""

from cmtag.corpus import Corpus, Sentence
from cmtag.distant import Gazetteer, annotate, collect_pairs
from cmtag.evaluation import labeling_report, render_report

# A tiny gold corpus.  Tags use the IO scheme: "I-TYPE" inside an
# entity, "O" outside.
gold = Corpus([
    Sentence("alice visited paris last june".split(),
             ["I-PER", "O", "I-LOC", "O", "O"]),
    Sentence("bob works at acme corp".split(),
             ["I-PER", "O", "O", "I-ORG", "I-ORG"]),
    Sentence("the acme office in oslo".split(),
             ["O", "I-ORG", "O", "O", "I-LOC"]),
])

# The gazetteer knows some of those names -- and believes one wrong
# thing: that "june" is a person.
gaz = Gazetteer()
gaz.add(("alice",), "PER")
gaz.add(("acme", "corp"), "ORG")   # multi-token surface form
gaz.add(("oslo",), "LOC")
gaz.add(("june",), "PER")

# Annotation runs over untagged text, so strip the gold tags first.
auto = annotate(gold.untagged_copy(), gaz)
for sent in auto:
    print(" ".join("%s/%s" % (w, t) for w, t in zip(sent.tokens, sent.tags)))

# The labeling report quantifies the damage: matching is exact on span
# boundaries and type, so the partial "acme" hit in sentence 3 counts
# against precision, and every missed name costs recall.
print()
print(render_report(labeling_report(gold, auto)))

# For noise modeling downstream we keep one (gold tag, automatic tag)
# pair per token; the word is kept so pairs can be routed to word
# clusters later.
pairs = collect_pairs(gold, gaz)
mistakes = [p for p in pairs if p.clean != p.noisy]
print()
print("%d/%d tokens mislabeled by the gazetteer:" % (len(mistakes), len(pairs)))
for p in mistakes:
    print("  %-8s gold %-6s got %s" % (p.word, p.clean, p.noisy))
