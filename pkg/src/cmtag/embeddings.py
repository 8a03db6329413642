"""Pretrained word vectors and PCA reduction for clustering.

The vector file format is the common text one: a ``count dim`` header
line, then one ``word v1 ... vd`` row per word.  PCA is computed with
power iteration plus deflation, which is plenty for the r <= 100 range
used here and keeps the whole package on plain numpy.
"""

import numpy as np

from .errors import ConfigError, ParseError, ShapeError

PCA_MAX_ITER = 1000
PCA_TOL = 1e-9


class EmbeddingTable:
    """word -> d-vector lookup, total under an out-of-vocabulary policy.

    Policy "zero" returns the zero vector for unknown words (used for
    tagger features, where an absent word should contribute nothing);
    "mean" returns the mean of all stored vectors (used for clustering,
    where it pools unknown words into one central region).
    """

    def __init__(self, dimension, vectors=None, oov_policy="zero"):
        if oov_policy not in ("zero", "mean"):
            raise ConfigError("oov_policy must be 'zero' or 'mean'")
        self.dimension = dimension
        self.vectors = dict(vectors or {})
        self.oov_policy = oov_policy
        self._mean = None

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, word):
        return word in self.vectors

    def mean_vector(self):
        if self._mean is None:
            if self.vectors:
                self._mean = np.mean(list(self.vectors.values()), axis=0)
            else:
                self._mean = np.zeros(self.dimension)
        return self._mean

    def lookup(self, word, policy=None):
        vec = self.vectors.get(word)
        if vec is not None:
            return vec
        policy = policy or self.oov_policy
        if policy == "zero":
            return np.zeros(self.dimension)
        return self.mean_vector()


def load_vectors(path, vocab_filter=None, oov_policy="zero"):
    """Load a text vector file, optionally restricted to a vocabulary."""
    vectors = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParseError("expected 'count dim' header", path, 1)
        try:
            _count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise ParseError("expected 'count dim' header", path, 1) from None
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) <= 1:
                continue
            word = parts[0]
            if len(parts) - 1 != dim:
                raise ParseError(
                    "expected %d components, got %d" % (dim, len(parts) - 1),
                    path,
                    lineno,
                )
            if vocab_filter is not None and word not in vocab_filter:
                continue
            try:
                vectors[word] = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise ParseError("non-numeric vector component", path, lineno) from None
    return EmbeddingTable(dim, vectors, oov_policy)


class PcaTransform:
    """Mean vector plus r orthonormal principal axes (rows)."""

    def __init__(self, mean, components, explained_variance):
        self.mean = np.asarray(mean, dtype=float)
        self.components = np.asarray(components, dtype=float)
        self.explained_variance = np.asarray(explained_variance, dtype=float)

    @property
    def r(self):
        return self.components.shape[0]

    def project(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.mean.shape[0]:
            raise ShapeError(
                "vector of length %d, transform expects %d"
                % (v.shape[-1], self.mean.shape[0])
            )
        return (v - self.mean) @ self.components.T


def _power_iteration(cov, rng, previous):
    """Dominant eigenvector of ``cov``, kept orthogonal to earlier ones."""
    n = cov.shape[0]
    v = rng.standard_normal(n)
    for prev in previous:
        v -= (v @ prev) * prev
    norm = np.linalg.norm(v)
    if norm == 0.0:  # astronomically unlikely; keep deterministic anyway
        v = np.zeros(n)
        v[0] = 1.0
    else:
        v /= norm
    for _ in range(PCA_MAX_ITER):
        w = cov @ v
        for prev in previous:
            w -= (w @ prev) * prev
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            # remaining spectrum is numerically zero: any unit vector in the
            # orthogonal complement is a valid axis
            break
        w /= norm
        if min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < PCA_TOL:
            v = w
            break
        v = w
    return v


def fit_pca(vectors, r, seed=0):
    """Top-r principal axes of the rows of ``vectors``.

    Power iteration with deflation on the sample covariance; deterministic
    for a fixed seed.  Component signs are normalized so the largest-
    magnitude entry of each axis is positive.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        raise ShapeError("expected an n x d matrix")
    n, d = x.shape
    if n < 2:
        raise ConfigError("need at least 2 vectors to fit a PCA")
    if not 1 <= r <= min(n, d):
        raise ConfigError("r must be in [1, min(n, d)] = [1, %d]" % min(n, d))
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    rng = np.random.default_rng(seed)
    components = []
    variances = []
    for _ in range(r):
        v = _power_iteration(cov, rng, components)
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        lam = float(v @ cov @ v)
        components.append(v)
        variances.append(max(lam, 0.0))
        cov = cov - lam * np.outer(v, v)
    return PcaTransform(mean, np.array(components), np.array(variances))


def project(transform, v):
    return transform.project(v)
