"""Entity-level scoring with official CoNLL script semantics.

Corpora are tagged in IO; scoring converts to IOB2 and compares spans
on exact boundaries and type.  An I- tag following O or a different
type is repaired to B- (the lenient behavior of the reference script);
strict mode raises instead.
"""

from dataclasses import dataclass, field

from .corpus import io_to_iob2
from .errors import AlignmentError, ConfigError


@dataclass(frozen=True)
class EntitySpan:
    sentence: int
    start: int
    end: int
    etype: str


@dataclass
class TypeScore:
    gold: int = 0
    predicted: int = 0
    correct: int = 0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0


@dataclass
class EvalReport:
    gold: int
    predicted: int
    correct: int
    precision: float
    recall: float
    f1: float
    per_type: dict = field(default_factory=dict)


def extract_spans(tags, sentence=0, strict=False):
    """Maximal IOB2 spans, inclusive boundaries.

    Lenient mode treats a dangling I- as B-; strict mode rejects it.
    """
    spans = []
    start = None
    cur = None

    def close(end):
        spans.append(EntitySpan(sentence, start, end, cur))

    for i, tag in enumerate(tags):
        if tag == "O":
            if cur is not None:
                close(i - 1)
                cur = None
            continue
        prefix, dash, etype = tag.partition("-")
        if dash != "-" or prefix not in ("B", "I") or not etype:
            raise ConfigError("not an IOB2 tag: %r" % tag)
        if prefix == "I" and (cur is None or etype != cur):
            if strict:
                raise ConfigError(
                    "I-%s at position %d does not continue a span" % (etype, i))
            prefix = "B"
        if prefix == "B":
            if cur is not None:
                close(i - 1)
            start, cur = i, etype
    if cur is not None:
        close(len(tags) - 1)
    return spans


def _prf(correct, predicted, gold):
    p = 100.0 * correct / predicted if predicted else 0.0
    r = 100.0 * correct / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def _corpus_spans(corpus, scheme, strict):
    spans = set()
    for si, sent in enumerate(corpus):
        tags = sent.tags
        if scheme == "io":
            tags = io_to_iob2(tags)
        spans.update(extract_spans(tags, si, strict))
    return spans


def score(gold, predicted, scheme="io", strict=False):
    """Micro-averaged entity precision/recall/F1 of predictions.

    Both corpora must be tagged with identical sentence and token
    structure.  scheme names the tagging of the inputs; "io" converts
    to IOB2 first, "iob2" scores the tags as given.
    """
    if scheme not in ("io", "iob2"):
        raise ConfigError("unknown scheme %r" % scheme)
    if not (gold.is_tagged() and predicted.is_tagged()):
        raise ConfigError("both corpora must be tagged")
    if len(gold.sentences) != len(predicted.sentences):
        raise AlignmentError("sentence counts differ: %d vs %d"
                             % (len(gold.sentences), len(predicted.sentences)))
    for si, (g, p) in enumerate(zip(gold, predicted)):
        if g.tokens != p.tokens:
            raise AlignmentError("sentence %d tokens differ" % si)

    gold_spans = _corpus_spans(gold, scheme, strict)
    pred_spans = _corpus_spans(predicted, scheme, strict)
    matched = gold_spans & pred_spans

    types = sorted({s.etype for s in gold_spans | pred_spans})
    per_type = {}
    for t in types:
        tg = sum(1 for s in gold_spans if s.etype == t)
        tp = sum(1 for s in pred_spans if s.etype == t)
        tc = sum(1 for s in matched if s.etype == t)
        p, r, f = _prf(tc, tp, tg)
        per_type[t] = TypeScore(tg, tp, tc, p, r, f)
    p, r, f = _prf(len(matched), len(pred_spans), len(gold_spans))
    return EvalReport(len(gold_spans), len(pred_spans), len(matched),
                      p, r, f, per_type)


def labeling_report(gold, auto, scheme="io", strict=False):
    """How well an automatic labeling reproduces gold entities.

    Same arithmetic as score; the predictions are a distantly
    supervised version of the gold corpus.
    """
    return score(gold, auto, scheme=scheme, strict=strict)


def render_report(report, title="overall"):
    """Aligned plain-text report, percentages to one decimal."""
    lines = [
        "spans: gold %d, predicted %d, correct %d"
        % (report.gold, report.predicted, report.correct)
    ]
    width = max([len(title)] + [len(t) for t in report.per_type])
    fmt = "%-*s  precision %6.1f  recall %6.1f  f1 %6.1f"
    lines.append(fmt % (width, title, report.precision, report.recall,
                        report.f1))
    for t, s in sorted(report.per_type.items()):
        lines.append(fmt % (width, t, s.precision, s.recall, s.f1))
    return "\n".join(lines)


def report_json(report):
    """The same report as a JSON-serializable dict."""
    return {
        "gold": report.gold,
        "predicted": report.predicted,
        "correct": report.correct,
        "precision": round(report.precision, 1),
        "recall": round(report.recall, 1),
        "f1": round(report.f1, 1),
        "types": {
            t: {
                "gold": s.gold,
                "predicted": s.predicted,
                "correct": s.correct,
                "precision": round(s.precision, 1),
                "recall": round(s.recall, 1),
                "f1": round(s.f1, 1),
            }
            for t, s in sorted(report.per_type.items())
        },
    }
