"""Confusion matrices relating clean labels to distantly supervised ones.

A row i gives p(noisy=j | clean=i) as the softmax of learned logits.
One global matrix covers all noisy instances; optionally the largest
word-cluster groups get their own matrices, interpolated with the global
one.  Smoothed count-based initialization comes from labeled pairs where
both the gold tag and the distant tag of a token are known.
"""

import json

import numpy as np

from .corpus import TagSet
from .errors import ConfigError

NOISE_MODES = (
    "global",
    "global-identity",
    "cluster",
    "cluster-freq",
    "cluster-ip",
    "cluster-freq-ip",
)

DEFAULT_SMOOTHING = 1e-6
DEFAULT_MIN_PAIRS = 5
IDENTITY_GAIN = 6.0


class ConfusionLogits:
    """k x k real logits; row = clean label, column = noisy label."""

    def __init__(self, b):
        b = np.asarray(b, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ConfigError("confusion logits must be square")
        if not np.all(np.isfinite(b)):
            raise ConfigError("confusion logits must be finite")
        self.b = b

    @property
    def k(self):
        return self.b.shape[0]


def init_logits(pairs, tagset, smoothing=DEFAULT_SMOOTHING):
    """Log of smoothed conditional frequencies p(noisy|clean) from pairs.

    A clean label never seen among the pairs gets a uniform row.
    """
    if smoothing <= 0:
        raise ConfigError("smoothing must be positive")
    k = len(tagset)
    counts = np.zeros((k, k))
    for pair in pairs:
        counts[tagset.index(pair.clean), tagset.index(pair.noisy)] += 1
    row_totals = counts.sum(axis=1, keepdims=True)
    b = np.log((counts + smoothing) / (row_totals + k * smoothing))
    return ConfusionLogits(b)


def identity_logits(k, gain=IDENTITY_GAIN):
    """Logits gain * I, softmaxing to a strongly diagonal matrix."""
    return ConfusionLogits(gain * np.eye(k))


def row_softmax(logits):
    """Row-stochastic matrix from logits, stable under per-row shifts."""
    b = logits.b if isinstance(logits, ConfusionLogits) else np.asarray(logits, float)
    shifted = b - b.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def select_frequent(group_counts, fraction, p):
    """Ids of the ceil(fraction * p) largest groups by instance count.

    Ties go to the lower cluster id.  Groups absent from the count map
    count as zero.
    """
    if not 0 < fraction <= 1:
        raise ConfigError("fraction must be in (0, 1]")
    n_keep = int(np.ceil(fraction * p))
    ranked = sorted(range(p), key=lambda c: (-group_counts.get(c, 0), c))
    return set(ranked[:n_keep])


class ConfusionModel:
    """Global logits plus optional per-group logits and how to combine them."""

    def __init__(self, global_logits, groups=None, selected=None,
                 lam=0.0, mode="global"):
        if mode not in NOISE_MODES:
            raise ConfigError("unknown noise mode %r" % mode)
        if not 0.0 <= lam <= 1.0:
            raise ConfigError("lambda must be in [0, 1]")
        groups = dict(groups or {})
        selected = set(selected if selected is not None else groups)
        if mode in ("global", "global-identity") and groups:
            raise ConfigError("mode %r admits no group matrices" % mode)
        if not set(groups) <= selected:
            raise ConfigError("group matrices outside the selected set")
        self.global_logits = global_logits
        self.groups = groups
        self.selected = selected
        self.lam = float(lam)
        self.mode = mode

    @property
    def k(self):
        return self.global_logits.k

    def uses_interpolation(self):
        return self.mode in ("cluster-ip", "cluster-freq-ip")

    def group_for(self, group):
        """The group whose matrix applies, or None for the global one."""
        if self.mode in ("global", "global-identity"):
            return None
        # at lambda = 1 the mixture is the global matrix and the group
        # logits get zero gradient, so route straight to global
        if self.uses_interpolation() and self.lam == 1.0:
            return None
        if group in self.groups:
            return group
        return None


def effective_matrix(model, group):
    """Row-stochastic matrix applied to instances of the given group.

    Groups without their own matrix (unselected, too few pairs, or the
    OOV group) use the global matrix.  Interpolating modes mix the group
    matrix with the global one in probability space, weighting the
    global matrix by lambda.
    """
    g = model.group_for(group)
    a_global = row_softmax(model.global_logits)
    if g is None:
        return a_global
    a_group = row_softmax(model.groups[g])
    lam = model.lam if model.uses_interpolation() else 0.0
    return (1.0 - lam) * a_group + lam * a_global


def noisy_distribution(clean, mat):
    """Push a clean label distribution through a confusion matrix.

    p(noisy=j) = sum_i mat[i, j] * p(clean=i); linear and
    simplex-preserving.  Accepts a single vector or a batch of rows.
    """
    clean = np.asarray(clean, dtype=float)
    return clean @ mat


def build_model(pairs, clustering, mode, lam=0.0, fraction=1.0,
                smoothing=DEFAULT_SMOOTHING, tagset=None,
                group_counts=None, min_pairs=DEFAULT_MIN_PAIRS):
    """Initialize a ConfusionModel from labeled pairs.

    Cluster modes estimate one matrix per selected group from that
    group's pairs alone, falling back to the global matrix for groups
    contributing fewer than min_pairs pairs.  group_counts (cluster id
    -> instance count over all corpora) drives -freq selection; when
    omitted the pairs themselves are counted.
    """
    if tagset is None:
        tagset = TagSet()
    if mode not in NOISE_MODES:
        raise ConfigError("unknown noise mode %r" % mode)
    if mode in ("global", "global-identity"):
        if lam != 0.0:
            raise ConfigError("lambda only applies to cluster modes")
        if clustering is not None:
            raise ConfigError("clustering only applies to cluster modes")
    else:
        if clustering is None:
            raise ConfigError("cluster modes need a clustering")
    if mode in ("cluster-ip", "cluster-freq-ip"):
        if not 0.0 <= lam <= 1.0:
            raise ConfigError("lambda must be in [0, 1]")
    elif mode in ("cluster", "cluster-freq") and lam != 0.0:
        raise ConfigError("lambda only applies to interpolating modes")

    if mode == "global-identity":
        return ConfusionModel(identity_logits(len(tagset)), mode=mode)
    global_logits = init_logits(pairs, tagset, smoothing)
    if mode == "global":
        return ConfusionModel(global_logits, mode=mode)

    by_group = {}
    for pair in pairs:
        by_group.setdefault(clustering.assign(pair.word), []).append(pair)
    by_group.pop(clustering.oov_cluster_id, None)

    if mode in ("cluster-freq", "cluster-freq-ip"):
        if group_counts is None:
            group_counts = {g: len(ps) for g, ps in by_group.items()}
        selected = select_frequent(group_counts, fraction, clustering.p)
    else:
        selected = set(range(clustering.p))

    groups = {}
    for g in sorted(selected):
        ps = by_group.get(g, [])
        if len(ps) < min_pairs:
            continue
        groups[g] = init_logits(ps, tagset, smoothing)
    return ConfusionModel(global_logits, groups=groups, selected=selected,
                          lam=lam, mode=mode)


def save_model(model, tagset, path):
    """Write the model as versioned JSON, logits at full precision."""
    doc = {
        "format": "cmtag-confusion-model",
        "version": 1,
        "tags": list(tagset),
        "mode": model.mode,
        "lambda": model.lam,
        "selected": sorted(model.selected),
        "global": model.global_logits.b.tolist(),
        "groups": {str(g): l.b.tolist() for g, l in model.groups.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path):
    """Read back a model written by save_model; returns (model, tags)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "cmtag-confusion-model":
        raise ConfigError("not a confusion model file: %s" % path)
    if doc.get("version") != 1:
        raise ConfigError("unsupported model version %r" % doc.get("version"))
    model = ConfusionModel(
        ConfusionLogits(np.array(doc["global"])),
        groups={int(g): ConfusionLogits(np.array(b))
                for g, b in doc["groups"].items()},
        selected=set(doc["selected"]),
        lam=doc["lambda"],
        mode=doc["mode"],
    )
    return model, doc["tags"]


def render_heatmap(mat, tags, title=None, cell="%5.2f"):
    """Plain-text heatmap of a row-stochastic matrix, for run reports."""
    width = max(len(t) for t in tags)
    lines = []
    if title:
        lines.append(title)
    header = " " * (width + 1) + " ".join("%*s" % (5, t[:5]) for t in tags)
    lines.append(header)
    for i, tag in enumerate(tags):
        row = " ".join(cell % mat[i, j] for j in range(len(tags)))
        lines.append("%-*s %s" % (width + 1, tag, row))
    return "\n".join(lines)
