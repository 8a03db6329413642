"""Windowed feedforward tagger with a clean head and a noisy head.

The clean head is softmax(u . tanh(W1 x + b1) + b_out) over a window of
concatenated word embeddings.  The noisy head pushes the clean
distribution through a confusion matrix chosen per instance group.  All
gradients, including those of the confusion logits, are explicit; the
optimizer is NADAM.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, Sentence, TagSet
from .errors import ConfigError, NumericalError, ShapeError
from .noise import (ConfusionLogits, ConfusionModel, effective_matrix,
                    row_softmax)

TRAIN_MODES = ("base", "base+noise", "cm")


@dataclass
class Instance:
    center_word: str
    feature: np.ndarray
    target: int
    source: str
    group: int


class TaggerModel:

    def __init__(self, input_dim, hidden, k, window, seed=0, rng=None):
        if rng is None:
            rng = np.random.default_rng(seed)
        self.w1 = rng.normal(0.0, np.sqrt(1.0 / input_dim), (hidden, input_dim))
        self.b1 = np.zeros(hidden)
        self.u = rng.normal(0.0, np.sqrt(1.0 / hidden), (k, hidden))
        self.b_out = np.zeros(k)
        self.window = window
        self.hidden = hidden

    @property
    def k(self):
        return self.u.shape[0]

    @property
    def input_dim(self):
        return self.w1.shape[1]

    def params(self):
        """Live references, keyed for the optimizer."""
        return {"w1": self.w1, "b1": self.b1, "u": self.u, "b_out": self.b_out}

    def set_params(self, params):
        self.w1 = params["w1"]
        self.b1 = params["b1"]
        self.u = params["u"]
        self.b_out = params["b_out"]


@dataclass
class TrainConfig:
    learning_rate: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0
    ratio_clean: int = 1
    ratio_noisy: int = 1
    patience: int = 5
    window: int = 2
    hidden: int = 128
    mode: str = "cm"

    def validate(self):
        if self.learning_rate <= 0 or self.eps <= 0:
            raise ConfigError("rates must be positive")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ConfigError("betas must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or self.patience < 0:
            raise ConfigError("batch size, epochs, patience must be non-negative")
        if self.ratio_clean < 1 or self.ratio_noisy < 1:
            raise ConfigError("mixing ratio parts must be positive integers")
        if self.window < 0 or self.hidden < 1:
            raise ConfigError("bad architecture sizes")
        if self.mode not in TRAIN_MODES:
            raise ConfigError("unknown training mode %r" % self.mode)


@dataclass
class Gradients:
    w1: np.ndarray
    b1: np.ndarray
    u: np.ndarray
    b_out: np.ndarray
    cm_global: np.ndarray = None
    cm_groups: dict = field(default_factory=dict)


def featurize(sentence, position, emb, clustering, window, tagset=None):
    """Window of concatenated embeddings around one token.

    Boundary positions pad with zeros.  The group comes from the center
    word; without a clustering it is None and routes to the global
    matrix downstream.
    """
    tokens = sentence.tokens
    if not 0 <= position < len(tokens):
        raise ConfigError("position %d outside sentence" % position)
    d = emb.dimension
    parts = []
    for i in range(position - window, position + window + 1):
        if 0 <= i < len(tokens):
            parts.append(emb.lookup(tokens[i]))
        else:
            parts.append(np.zeros(d))
    word = tokens[position]
    group = clustering.assign(word) if clustering is not None else None
    target = None
    if tagset is not None and sentence.tags is not None:
        target = tagset.index(sentence.tags[position])
    return Instance(word, np.concatenate(parts), target, "clean", group)


def featurize_corpus(corpus, emb, clustering, window, tagset, source):
    out = []
    for sent in corpus:
        for pos in range(len(sent.tokens)):
            inst = featurize(sent, pos, emb, clustering, window, tagset)
            inst.source = source
            out.append(inst)
    return out


def _clean_forward(model, x):
    """Returns (probabilities, hidden activations) for a batch of rows."""
    h = np.tanh(x @ model.w1.T + model.b1)
    z = h @ model.u.T + model.b_out
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True), h


def forward_clean(model, x):
    """Clean-head distribution for one feature vector or a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.input_dim:
        raise ShapeError("feature length %d, model expects %d"
                         % (x.shape[1], model.input_dim))
    probs, _ = _clean_forward(model, x)
    return probs[0] if single else probs


def forward_noisy(model, cm, inst):
    """Noisy-head distribution: clean head pushed through the group's
    effective confusion matrix."""
    clean = forward_clean(model, inst.feature)
    return clean @ effective_matrix(cm, inst.group)


def _softmax_backward(a, da):
    """Jacobian-vector product of row softmax: rows of a are the outputs."""
    return a * (da - (a * da).sum(axis=1, keepdims=True))


def loss_and_grads(model, cm, batch):
    """Mean negative log-likelihood of a mixed batch plus all gradients.

    Clean instances (and every instance when cm is None) are scored by
    the clean head on their targets; noisy instances go through the
    group's effective matrix.  Instances sharing a routing destination
    are stacked so each destination costs a few matrix products.
    """
    if not batch:
        raise ConfigError("empty batch")
    n = len(batch)
    x = np.stack([inst.feature for inst in batch])
    targets = np.array([inst.target for inst in batch])
    c, h = _clean_forward(model, x)

    routes = {}
    for i, inst in enumerate(batch):
        if inst.source == "noisy" and cm is not None:
            key = cm.group_for(inst.group)
        else:
            key = "clean"
        routes.setdefault(key, []).append(i)

    nll = np.empty(n)
    dz = np.zeros_like(c)
    cm_global_grad = None
    cm_group_grads = {}
    if cm is not None:
        a_global = row_softmax(cm.global_logits)
        lam = cm.lam if cm.uses_interpolation() else 0.0

    for key, idx in routes.items():
        idx = np.array(idx)
        ci = c[idx]
        ti = targets[idx]
        if key == "clean":
            pt = ci[np.arange(len(idx)), ti]
            nll[idx] = -np.log(pt)
            dzi = ci.copy()
            dzi[np.arange(len(idx)), ti] -= 1.0
            dz[idx] = dzi / n
            continue
        if key is None:
            mat = a_global
        else:
            a_group = row_softmax(cm.groups[key])
            mat = (1.0 - lam) * a_group + lam * a_global
        p_hat = ci @ mat
        pt = p_hat[np.arange(len(idx)), ti]
        nll[idx] = -np.log(pt)
        dp = np.zeros_like(p_hat)
        dp[np.arange(len(idx)), ti] = -1.0 / (pt * n)
        dc = dp @ mat.T
        dz[idx] = _softmax_backward(ci, dc)
        dmat = ci.T @ dp
        if key is None:
            da_global = dmat
            da_group = None
        else:
            da_group = (1.0 - lam) * dmat
            da_global = lam * dmat
        if da_group is not None:
            g = _softmax_backward(a_group, da_group)
            if key in cm_group_grads:
                cm_group_grads[key] += g
            else:
                cm_group_grads[key] = g
        dg = _softmax_backward(a_global, da_global)
        if cm_global_grad is None:
            cm_global_grad = dg
        else:
            cm_global_grad += dg

    loss = float(nll.mean())
    if not np.isfinite(loss):
        raise NumericalError(
            "non-finite loss on batch of %d (%d clean, %d noisy)"
            % (n, sum(b.source == "clean" for b in batch),
               sum(b.source == "noisy" for b in batch)))

    du = dz.T @ h
    db_out = dz.sum(axis=0)
    dh = dz @ model.u
    dpre = (1.0 - h * h) * dh
    dw1 = dpre.T @ x
    db1 = dpre.sum(axis=0)
    if cm is not None and cm_global_grad is None:
        cm_global_grad = np.zeros((cm.k, cm.k))
    return loss, Gradients(dw1, db1, du, db_out, cm_global_grad, cm_group_grads)


# ---------------------------------------------------------------------------
# NADAM


@dataclass
class NadamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def nadam_step(params, grads, state, config):
    """One Nesterov-accelerated Adam update over a dict of tensors.

    m and v are bias-corrected moving averages; the step combines the
    momentum estimate with the bias-corrected current gradient:
    lr * (b1 * m_hat + (1 - b1) * g / (1 - b1^t)) / (sqrt(v_hat) + eps).
    """
    state.t += 1
    t = state.t
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads[name]
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        p -= config.learning_rate * (b1 * m_hat + (1.0 - b1) * g / c1) \
            / (np.sqrt(v_hat) + config.eps)
    return params, state


# ---------------------------------------------------------------------------
# training loop


def _batches(order, size):
    for start in range(0, len(order), size):
        yield order[start:start + size]


class _CleanCycle:
    """Endless stream of clean batches, reshuffling on wraparound."""

    def __init__(self, instances, size, rng):
        self.instances = instances
        self.size = size
        self.rng = rng
        self.order = rng.permutation(len(instances))
        self.pos = 0

    def next_batch(self):
        if self.pos >= len(self.order):
            self.order = self.rng.permutation(len(self.instances))
            self.pos = 0
        idx = self.order[self.pos:self.pos + self.size]
        self.pos += self.size
        return [self.instances[i] for i in idx]


def _collect_tensors(model, cm):
    params = dict(model.params())
    if cm is not None:
        params["cm_global"] = cm.global_logits.b
        for g in sorted(cm.groups):
            params["cm_group:%d" % g] = cm.groups[g].b
    return params


def _grads_as_dict(grads, params, cm):
    out = {"w1": grads.w1, "b1": grads.b1, "u": grads.u, "b_out": grads.b_out}
    if cm is not None:
        k = cm.k
        out["cm_global"] = (grads.cm_global if grads.cm_global is not None
                            else np.zeros((k, k)))
        for g in sorted(cm.groups):
            out["cm_group:%d" % g] = grads.cm_groups.get(g, np.zeros((k, k)))
    return out


def predict(model, corpus, emb, tagset, window=None, batch_size=256):
    """Clean-head predictions as a tagged copy of the corpus."""
    if window is None:
        window = model.window
    sentences = []
    for sent in corpus:
        feats = [featurize(sent, i, emb, None, window).feature
                 for i in range(len(sent.tokens))]
        tags = []
        for start in range(0, len(feats), batch_size):
            probs = forward_clean(model, np.stack(feats[start:start + batch_size]))
            tags.extend(tagset.tag(int(i)) for i in probs.argmax(axis=1))
        sentences.append(Sentence(list(sent.tokens), tags))
    return Corpus(sentences, role=corpus.role)


def train(clean, noisy, dev, cm, config, emb, clustering=None,
          tagset=None, on_batch=None):
    """Joint training on clean and noisy corpora with early stopping.

    One epoch walks the noisy instances once in mini-batches, drawing
    ratio_clean clean batches (from an endlessly cycling, reshuffled
    clean stream) for every ratio_noisy noisy batches.  In base mode an
    epoch is a single pass over the clean batches and noisy data is
    never touched.  After each epoch dev entity F1 decides the best
    snapshot; training stops after `patience` epochs without a new best.

    Returns (model, cm, log), the model and confusion model restored to
    the best dev epoch, and one log record per epoch.
    """
    from .evaluation import score

    config.validate()
    if clean is None or len(clean.sentences) == 0:
        raise ConfigError("clean corpus must be non-empty")
    if not clean.is_tagged():
        raise ConfigError("clean corpus must be tagged")
    if dev is None or len(dev.sentences) == 0:
        raise ConfigError("dev corpus must be non-empty")
    if config.mode == "cm" and cm is None:
        raise ConfigError("cm mode needs a confusion model")
    if config.mode != "cm" and cm is not None:
        raise ConfigError("confusion model given but mode is %r" % config.mode)
    if config.mode != "base":
        if noisy is None or len(noisy.sentences) == 0:
            raise ConfigError("mode %r needs noisy data" % config.mode)
        if not noisy.is_tagged():
            raise ConfigError("noisy corpus must be tagged")
    if tagset is None:
        tagset = TagSet()

    rng = np.random.default_rng(config.seed)
    clean_insts = featurize_corpus(clean, emb, clustering, config.window,
                                   tagset, "clean")
    noisy_insts = []
    if config.mode != "base":
        noisy_insts = featurize_corpus(noisy, emb, clustering, config.window,
                                       tagset, "noisy")
    model = TaggerModel(emb.dimension * (2 * config.window + 1),
                        config.hidden, len(tagset), config.window, rng=rng)
    batch_cm = cm if config.mode == "cm" else None

    params = _collect_tensors(model, batch_cm)
    state = NadamState()
    log = []
    best = None  # (f1, epoch, saved params)
    since_best = 0
    for epoch in range(1, config.epochs + 1):
        losses = []
        step = 0
        if config.mode == "base":
            for idx in _batches(rng.permutation(len(clean_insts)),
                                config.batch_size):
                batch = [clean_insts[i] for i in idx]
                loss, grads = loss_and_grads(model, None, batch)
                nadam_step(params, _grads_as_dict(grads, params, None),
                           state, config)
                losses.append(loss)
                if on_batch:
                    on_batch(epoch, step, loss)
                step += 1
        else:
            cycle = _CleanCycle(clean_insts, config.batch_size, rng)
            noisy_order = rng.permutation(len(noisy_insts))
            noisy_batches = list(_batches(noisy_order, config.batch_size))
            pos = 0
            while pos < len(noisy_batches):
                for _ in range(config.ratio_clean):
                    batch = cycle.next_batch()
                    loss, grads = loss_and_grads(model, None, batch)
                    nadam_step(params, _grads_as_dict(grads, params, batch_cm),
                               state, config)
                    losses.append(loss)
                    if on_batch:
                        on_batch(epoch, step, loss)
                    step += 1
                for _ in range(config.ratio_noisy):
                    if pos >= len(noisy_batches):
                        break
                    batch = [noisy_insts[i] for i in noisy_batches[pos]]
                    pos += 1
                    loss, grads = loss_and_grads(model, batch_cm, batch)
                    nadam_step(params, _grads_as_dict(grads, params, batch_cm),
                               state, config)
                    losses.append(loss)
                    if on_batch:
                        on_batch(epoch, step, loss)
                    step += 1
        predicted = predict(model, dev, emb, tagset, config.window)
        report = score(dev, predicted)
        entry = {
            "epoch": epoch,
            "loss": float(np.mean(losses)) if losses else 0.0,
            "dev_precision": report.precision,
            "dev_recall": report.recall,
            "dev_f1": report.f1,
        }
        log.append(entry)
        if best is None or report.f1 > best[0]:
            best = (report.f1, epoch,
                    {k: v.copy() for k, v in params.items()})
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    if best is not None:
        saved = best[2]
        for k in params:
            params[k][...] = saved[k]
    return model, cm, log


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, model, cm, tagset, state=None, epoch=None,
                    dev_f1=None):
    doc = {
        "format": "cmtag-checkpoint",
        "version": 1,
        "tags": list(tagset),
        "window": model.window,
        "hidden": model.hidden,
        "weights": {k: v.tolist() for k, v in model.params().items()},
        "epoch": epoch,
        "dev_f1": dev_f1,
    }
    if cm is not None:
        doc["confusion"] = {
            "mode": cm.mode,
            "lambda": cm.lam,
            "selected": sorted(cm.selected),
            "global": cm.global_logits.b.tolist(),
            "groups": {str(g): l.b.tolist() for g, l in cm.groups.items()},
        }
    if state is not None:
        doc["optimizer"] = {
            "t": state.t,
            "m": {k: v.tolist() for k, v in state.m.items()},
            "v": {k: v.tolist() for k, v in state.v.items()},
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path):
    """Returns (model, cm, tags, extras) from a checkpoint file."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "cmtag-checkpoint":
        raise ConfigError("not a checkpoint file: %s" % path)
    if doc.get("version") != 1:
        raise ConfigError("unsupported checkpoint version %r" % doc.get("version"))
    weights = {k: np.array(v) for k, v in doc["weights"].items()}
    hidden, input_dim = weights["w1"].shape
    k = weights["u"].shape[0]
    model = TaggerModel(input_dim, hidden, k, doc["window"])
    model.w1 = weights["w1"]
    model.b1 = weights["b1"]
    model.u = weights["u"]
    model.b_out = weights["b_out"]
    cm = None
    if "confusion" in doc:
        c = doc["confusion"]
        cm = ConfusionModel(
            ConfusionLogits(np.array(c["global"])),
            groups={int(g): ConfusionLogits(np.array(b))
                    for g, b in c["groups"].items()},
            selected=set(c["selected"]),
            lam=c["lambda"],
            mode=c["mode"],
        )
    extras = {"epoch": doc.get("epoch"), "dev_f1": doc.get("dev_f1")}
    return model, cm, doc["tags"], extras


def write_log(log, path):
    """One JSON object per epoch, one per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps(entry) + "\n")
