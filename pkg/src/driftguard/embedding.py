"""Deterministic text embedding provider, cosine similarity, null calibration.

The reference provider is a hashed bag-of-tokens: lowercase, split on
non-alphanumerics, hash each token into one of 384 buckets with a fixed
keyed hash, accumulate term frequency, L2-normalize.  Bucket counts are
integers before normalization, so the result is platform-independent.
External providers can plug in behind the same ``embed`` contract.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import DimensionError, InsufficientCorpus

DIM = 384
_HASH_SEED = b"driftguard-v1"
_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _bucket(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), key=_HASH_SEED,
                             digest_size=8).digest()
    return int.from_bytes(digest, "big") % DIM


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-length real vector; unit norm unless the all-zero vector."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != DIM:
            raise DimensionError(f"expected {DIM} components, got {len(self.values)}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def embed(text: str) -> EmbeddingVector:
    """Embed UTF-8 text; identical text gives an identical vector."""
    counts = np.zeros(DIM, dtype=np.int64)
    for token in _tokenize(text):
        counts[_bucket(token)] += 1
    norm = float(np.sqrt(np.dot(counts, counts)))
    if norm == 0.0:
        return EmbeddingVector(tuple([0.0] * DIM))
    return EmbeddingVector(tuple((counts / norm).tolist()))


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """u.v / (|u||v|); 0 when either norm is 0."""
    a, b = u.as_array(), v.as_array()
    if a.shape != b.shape:
        raise DimensionError("embedding dimensions differ")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def similarity(text_a: str, text_b: str) -> float:
    return cosine(embed(text_a), embed(text_b))


@dataclass(frozen=True)
class NullDistribution:
    """Sorted similarity scores from unrelated text pairs."""

    samples: tuple[float, ...]

    def __post_init__(self):
        if not self.samples:
            raise InsufficientCorpus("null distribution needs samples")
        if list(self.samples) != sorted(self.samples):
            raise InsufficientCorpus("samples must be sorted ascending")

    def quantile(self, q: float) -> float:
        return float(np.quantile(np.asarray(self.samples), q,
                                 method="linear"))


def calibrate_null(corpus: list[str], n_pairs: int, seed: int) -> NullDistribution:
    """Similarity distribution over random unordered pairs from the corpus."""
    if len(corpus) < 2:
        raise InsufficientCorpus(f"corpus has {len(corpus)} entries, need >= 2")
    if n_pairs < 1:
        raise InsufficientCorpus("n_pairs must be >= 1")
    rng = random.Random(seed)
    vectors = [embed(t) for t in corpus]
    sims = []
    for _ in range(n_pairs):
        i, j = rng.sample(range(len(corpus)), 2)
        sims.append(cosine(vectors[i], vectors[j]))
    return NullDistribution(tuple(sorted(sims)))


def shipped_corpus() -> list[str]:
    """The bundled SA/UQ phrase corpus, one phrase per line."""
    text = resources.files("driftguard.data").joinpath(
        "null_corpus.txt").read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line.strip()]
