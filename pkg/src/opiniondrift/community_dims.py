"""Community embeddings and social dimensions.

Communities are embedded with skip-gram negative sampling, treating a
community as the "word" and each of its commenters as a "context".  A
social dimension is a unit direction built from seed community pairs;
communities are scored by projecting onto it, then percentile-ranked and
cut into five equal bins.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .panel import UNKNOWN, CommentEvent, ContractViolation, DimensionFacet

log = logging.getLogger(__name__)

N_BINS = 5

BIN_LABELS = {
    "partisan": ("left-wing", "center-left", "center", "center-right", "right-wing"),
}

# (negative pole, positive pole); higher scores lean older, more feminine,
# more right-wing, more affluent
DEFAULT_SEED_PAIRS = {
    "age": [("teenagers", "RedditForGrownups")],
    "gender": [("AskMen", "AskWomen")],
    "partisan": [("democrats", "Conservative")],
    "affluence": [("vagabond", "backpacking")],
}


class MissingCommunity(KeyError):
    pass


class DegenerateDimension(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    names: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        vectors = np.asarray(self.vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[0] != len(names):
            raise ValueError(f"expected ({len(names)}, d) vectors, got {vectors.shape}")
        if len(set(names)) != len(names):
            raise ValueError("community names must be unique")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.vectors[self._index[name]]
        except KeyError:
            raise MissingCommunity(name) from None

    def normalized(self) -> np.ndarray:
        norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
        return np.divide(self.vectors, norms, out=np.zeros_like(self.vectors), where=norms > 0)

    def cosine(self, a: str, b: str) -> float:
        u, v = self[a], self[b]
        return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))

    def most_similar(self, name: str, topn: int = 10) -> list[tuple[str, float]]:
        unit = self.normalized()
        sims = unit @ unit[self._index[name]]
        order = [i for i in np.argsort(-sims, kind="stable") if self.names[i] != name]
        return [(self.names[i], float(sims[i])) for i in order[:topn]]

    def save_text(self, path) -> None:
        """Write the classic text vector format: ``N d`` header, then one row per community."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.names)} {self.dim}\n")
            for name, vec in zip(self.names, self.vectors):
                fh.write(name + " " + " ".join(repr(float(x)) for x in vec) + "\n")

    @classmethod
    def load_text(cls, path) -> "EmbeddingMatrix":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"{path}: header must be '<N> <d>'")
            n, d = int(header[0]), int(header[1])
            names, rows = [], []
            for lineno, line in enumerate(fh, 2):
                parts = line.rstrip("\n").split(" ")
                if not line.strip():
                    continue
                if len(parts) != d + 1:
                    raise ValueError(f"{path}:{lineno}: expected {d} values, got {len(parts) - 1}")
                names.append(parts[0])
                rows.append([float(x) for x in parts[1:]])
        if len(names) != n:
            raise ValueError(f"{path}: header says {n} communities, found {len(names)}")
        return cls(tuple(names), np.array(rows, dtype=float).reshape(n, d))


# -- training ---------------------------------------------------------------

@dataclass
class SGNSParams:
    dim: int = 150
    negative: int = 5
    epochs: int = 5
    alpha: float = 0.025
    min_alpha: float = 0.0001
    ns_exponent: float = 0.75
    min_count: int = 1
    batch_size: int = 32
    seed: int = 0


@dataclass
class TrainResult:
    embedding: EmbeddingMatrix
    dropped_communities: list[str] = field(default_factory=list)
    dropped_authors: list[str] = field(default_factory=list)
    pairs_used: int = 0


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def train_embedding(
    cooccurrence: Iterable[tuple[str, str, int]], params: SGNSParams | None = None
) -> TrainResult:
    """Skip-gram with negative sampling over (community, author, count) triples.

    Each (community, author) occurrence is one positive example per epoch,
    visited in a seeded random order.  Negative authors are drawn from the
    unigram distribution raised to ``ns_exponent``.  The learning rate decays
    linearly from ``alpha`` to ``min_alpha``.  Updates are applied in
    mini-batches of ``batch_size`` examples; results are bit-identical for a
    fixed seed.
    """
    p = params or SGNSParams()
    counts: dict[tuple[str, str], int] = defaultdict(int)
    for community, author, n in cooccurrence:
        if n <= 0:
            raise ContractViolation(f"count for ({community}, {author}) must be positive, got {n}")
        counts[(community, author)] += int(n)

    comm_total: dict[str, int] = defaultdict(int)
    auth_total: dict[str, int] = defaultdict(int)
    for (c, a), n in counts.items():
        comm_total[c] += n
        auth_total[a] += n
    dropped_c = sorted(c for c, n in comm_total.items() if n < p.min_count)
    dropped_a = sorted(a for a, n in auth_total.items() if n < p.min_count)
    if dropped_c or dropped_a:
        log.info("min_count=%d dropped %d communities and %d authors", p.min_count, len(dropped_c), len(dropped_a))
    drop_c, drop_a = set(dropped_c), set(dropped_a)
    pairs = sorted((c, a, n) for (c, a), n in counts.items() if c not in drop_c and a not in drop_a)

    communities = sorted({c for c, _, _ in pairs})
    authors = sorted({a for _, a, _ in pairs})
    ci = {c: i for i, c in enumerate(communities)}
    ai = {a: i for i, a in enumerate(authors)}
    rng = np.random.default_rng(p.seed)
    w_in = (rng.random((len(communities), p.dim)) - 0.5) / p.dim
    w_out = np.zeros((len(authors), p.dim))
    if not pairs:
        return TrainResult(EmbeddingMatrix(tuple(communities), w_in), dropped_c, dropped_a, 0)

    reps = np.array([n for _, _, n in pairs])
    ex_c = np.repeat(np.array([ci[c] for c, _, _ in pairs]), reps)
    ex_a = np.repeat(np.array([ai[a] for _, a, _ in pairs]), reps)
    freq = np.zeros(len(authors))
    np.add.at(freq, ex_a, 1.0)
    noise = freq ** p.ns_exponent
    noise_cdf = np.cumsum(noise / noise.sum())
    noise_cdf[-1] = 1.0

    total = len(ex_c) * p.epochs
    done = 0
    bs = max(1, int(p.batch_size))
    for _ in range(p.epochs):
        order = rng.permutation(len(ex_c))
        for start in range(0, len(order), bs):
            idx = order[start:start + bs]
            lr = max(p.min_alpha, p.alpha - (p.alpha - p.min_alpha) * done / total)
            done += len(idx)
            wc, wa = ex_c[idx], ex_a[idx]
            neg = np.searchsorted(noise_cdf, rng.random((len(idx), p.negative)), side="right")
            neg = np.minimum(neg, len(authors) - 1)
            keep = (neg != wa[:, None]).astype(float)

            v = w_in[wc]
            u_pos = w_out[wa]
            u_neg = w_out[neg]
            g_pos = (1.0 - _sigmoid(np.einsum("bd,bd->b", v, u_pos))) * lr
            g_neg = -_sigmoid(np.einsum("bd,bkd->bk", v, u_neg)) * lr * keep
            grad_v = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
            np.add.at(w_out, wa, g_pos[:, None] * v)
            np.add.at(w_out, neg, g_neg[:, :, None] * v[:, None, :])
            np.add.at(w_in, wc, grad_v)
    return TrainResult(EmbeddingMatrix(tuple(communities), w_in), dropped_c, dropped_a, len(ex_c))


def read_cooccurrence(path) -> list[tuple[str, str, int]]:
    """Read ``community,author,count`` CSV rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [(r["community"], r["author"], int(r["count"])) for r in reader]


def cooccurrence_from_events(events: Iterable[CommentEvent]) -> list[tuple[str, str, int]]:
    counts: dict[tuple[str, str], int] = defaultdict(int)
    for ev in events:
        counts[(ev.community, ev.author)] += 1
    return [(c, a, n) for (c, a), n in sorted(counts.items())]


# -- dimensions -------------------------------------------------------------

@dataclass(frozen=True)
class DimensionSpec:
    name: str
    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        pairs = tuple((str(a), str(b)) for a, b in self.pairs)
        if not pairs:
            raise ValueError(f"dimension {self.name!r} needs at least one seed pair")
        object.__setattr__(self, "pairs", pairs)

    def reversed(self) -> "DimensionSpec":
        return DimensionSpec(self.name, tuple((b, a) for a, b in self.pairs))


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm <= 1e-12:
        raise DegenerateDimension("direction has zero length")
    return v / norm


def build_dimension(embedding: EmbeddingMatrix, spec: DimensionSpec) -> np.ndarray:
    """Unit direction: normalized mean of the normalized seed-pair differences."""
    for pair in spec.pairs:
        for name in pair:
            if name not in embedding:
                raise MissingCommunity(f"seed community {name!r} of dimension {spec.name!r} is not in the embedding")
    diffs = []
    for neg, pos in spec.pairs:
        try:
            diffs.append(_unit(embedding[pos] - embedding[neg]))
        except DegenerateDimension:
            raise DegenerateDimension(f"{spec.name}: seeds {neg!r} and {pos!r} have identical vectors") from None
    try:
        return _unit(np.mean(diffs, axis=0))
    except DegenerateDimension:
        raise DegenerateDimension(f"{spec.name}: seed-pair differences cancel out") from None


@dataclass(frozen=True)
class CommunityScore:
    community: str
    raw: float
    percentile: float
    bin: int


def bin_of_percentile(percentile: float) -> int:
    """Quintile bin of a percentile: [0,20) -> 0, ..., [80,100] -> 4."""
    if not 0.0 <= percentile <= 100.0:
        raise ValueError(f"percentile out of range: {percentile}")
    return min(int(percentile // 20.0), N_BINS - 1)


def score_communities(embedding: EmbeddingMatrix, dimension: np.ndarray) -> list[CommunityScore]:
    """Project every community onto ``dimension`` and percentile-rank them.

    Percentile is rank / (N - 1) * 100 with ranks taken in ascending
    projection order, ties broken by community name.  Returned in rank order.
    """
    n = len(embedding)
    if n < 2:
        raise ContractViolation("percentiles need at least two communities")
    dimension = np.asarray(dimension, dtype=float)
    if abs(float(np.linalg.norm(dimension)) - 1.0) > 1e-9:
        raise ContractViolation("dimension must be a unit vector")
    raw = embedding.normalized() @ dimension
    order = sorted(range(n), key=lambda i: (raw[i], embedding.names[i]))
    scores = []
    for rank, i in enumerate(order):
        scores.append(CommunityScore(
            embedding.names[i],
            float(raw[i]),
            rank * 100.0 / (n - 1),
            # exact integer form of floor(percentile / 20)
            min(N_BINS * rank // (n - 1), N_BINS - 1),
        ))
    return scores


def bin_labels(dimension: str) -> tuple[str, ...]:
    return BIN_LABELS.get(dimension, tuple(f"{dimension} {20 * k}-{20 * (k + 1)}%" for k in range(N_BINS)))


def bin_facet(scores: Sequence[CommunityScore], dimension: str) -> DimensionFacet:
    """Facet mapping each scored community to its named bin; others are Unknown."""
    labels = bin_labels(dimension)
    return DimensionFacet(dimension, {s.community: labels[s.bin] for s in scores}, labels)


def bin_events(events: Iterable[CommentEvent], scores: Sequence[CommunityScore], dimension: str) -> list[str]:
    facet = bin_facet(scores, dimension)
    return [facet.community_bins.get(ev.community, UNKNOWN) for ev in events]


def write_scores(scores: Sequence[CommunityScore], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["community", "raw", "percentile", "bin"])
        for s in scores:
            writer.writerow([s.community, repr(s.raw), repr(s.percentile), s.bin])


def read_scores(path) -> list[CommunityScore]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            CommunityScore(r["community"], float(r["raw"]), float(r["percentile"]), int(r["bin"]))
            for r in csv.DictReader(fh)
        ]


def dimension_specs_from_config(config: Mapping[str, Sequence[Sequence[str]]]) -> list[DimensionSpec]:
    return [DimensionSpec(name, tuple(tuple(p) for p in pairs)) for name, pairs in config.items()]
