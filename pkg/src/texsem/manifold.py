"""Isomap over semantic descriptions.

Pipeline: correlation distances between description vectors, a symmetrized
kNN graph (k auto-raised until connected), all-pairs geodesics by repeated
heap Dijkstra, classical MDS on the geodesic matrix, a residual curve whose
elbow picks the embedding dimension, and a landmark (Nystrom) projection
for out-of-sample queries.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import InvalidInputError, SemanticVector

DEFAULT_KNN = 10
DEFAULT_DMAX = 10
AXIS_CORRELATION_THRESHOLD = 0.55


def _description_matrix(descriptions) -> np.ndarray:
    if isinstance(descriptions, np.ndarray):
        return np.asarray(descriptions, dtype=float)
    return np.asarray([d.values for d in descriptions], dtype=float)


def _pearson_rows_to_vector(matrix: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Correlation of each matrix row against v; zero-variance v gives 0."""
    mc = matrix - matrix.mean(axis=1, keepdims=True)
    vc = v - v.mean()
    ms = np.sqrt((mc**2).sum(axis=1))
    vs = float(np.sqrt((vc**2).sum()))
    if vs == 0.0:
        return np.zeros(matrix.shape[0])
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (mc @ vc) / (ms * vs)
    return np.clip(np.where(np.isfinite(r), r, 0.0), -1.0, 1.0)


def correlation_distance(descriptions) -> np.ndarray:
    """d_ij = 1 - pearson(v_i, v_j), clipped to [0, 2], zero diagonal.

    Description vectors must each have nonzero variance across attributes;
    a constant description has no defined correlation to anything.
    """
    matrix = _description_matrix(descriptions)
    n = matrix.shape[0]
    if n < 2:
        raise InvalidInputError(f"need at least 2 descriptions, got {n}")
    flat = matrix.std(axis=1) == 0.0
    if flat.any():
        bad = np.flatnonzero(flat)[:8].tolist()
        raise InvalidInputError(
            f"descriptions with zero variance cannot be correlated "
            f"(sample indices {bad})"
        )
    r = np.corrcoef(matrix)
    r = np.clip(r, -1.0, 1.0)
    d = 1.0 - r
    d = np.clip((d + d.T) / 2.0, 0.0, 2.0)
    np.fill_diagonal(d, 0.0)
    return d


@dataclass(frozen=True)
class KnnGraph:
    """Symmetrized kNN graph; adjacency[i] is a tuple of (j, weight)."""

    n: int
    k: int
    adjacency: tuple[tuple[tuple[int, float], ...], ...]


def knn_graph(dist: np.ndarray, k: int = DEFAULT_KNN) -> KnnGraph:
    """Union-symmetrized k-nearest-neighbor graph.

    If the graph is disconnected, k is raised one step at a time until it
    connects; the final k is recorded on the returned graph.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if n < 2:
        raise InvalidInputError("need at least 2 points")
    order = np.argsort(dist, axis=1, kind="stable")

    k = min(k, n - 1)
    while True:
        neighbor_sets: list[dict[int, float]] = [dict() for _ in range(n)]
        for i in range(n):
            count = 0
            for j in order[i]:
                j = int(j)
                if j == i:
                    continue
                w = float(dist[i, j])
                neighbor_sets[i][j] = w
                neighbor_sets[j][i] = w
                count += 1
                if count >= k:
                    break
        if _connected(neighbor_sets) or k >= n - 1:
            break
        k += 1

    adjacency = tuple(
        tuple(sorted(neighbors.items())) for neighbors in neighbor_sets
    )
    return KnnGraph(n=n, k=k, adjacency=adjacency)


def _connected(neighbor_sets) -> bool:
    n = len(neighbor_sets)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    found = 1
    while stack:
        u = stack.pop()
        for v in neighbor_sets[u]:
            if not seen[v]:
                seen[v] = True
                found += 1
                stack.append(v)
    return found == n


def _dijkstra(adjacency, source: int, n: int) -> np.ndarray:
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    done = np.zeros(n, dtype=bool)
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in adjacency[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def geodesics(graph: KnnGraph) -> np.ndarray:
    """All-pairs shortest path matrix via one Dijkstra run per source."""
    n = graph.n
    out = np.empty((n, n))
    for src in range(n):
        row = _dijkstra(graph.adjacency, src, n)
        if not np.isfinite(row).all():
            raise InvalidInputError("graph is disconnected; geodesics undefined")
        out[src] = row
    return out


def all_pairs_naive(graph: KnnGraph) -> np.ndarray:
    """O(n^3) Floyd-Warshall; kept as an independent oracle for geodesics."""
    n = graph.n
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for i, neighbors in enumerate(graph.adjacency):
        for j, w in neighbors:
            if w < d[i, j]:
                d[i, j] = w
    for k in range(n):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


def classical_mds(dist: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Classical (Torgerson) MDS.

    Double-centers B = -1/2 J D^2 J, takes the top-d eigenpairs of B, and
    returns (coords, eigenvalues). Negative eigenvalues are truncated at
    zero; if fewer than d positive eigenvalues exist the missing axes are
    zero-padded (with a warning). Column signs are canonicalized so the
    entry of largest magnitude in each axis is positive.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    sq = dist**2
    row = sq.mean(axis=1, keepdims=True)
    col = sq.mean(axis=0, keepdims=True)
    b = -0.5 * (sq - row - col + sq.mean())
    b = (b + b.T) / 2.0
    evals, evecs = np.linalg.eigh(b)
    idx = np.argsort(evals)[::-1][:d]
    lam = evals[idx]
    vec = evecs[:, idx]
    # relative cutoff: eigenvalues at roundoff scale are rank deficiency
    cutoff = max(float(evals.max(initial=0.0)), 0.0) * 1e-12
    positive = int((lam > cutoff).sum())
    if positive < d:
        warnings.warn(
            f"only {positive} positive eigenvalues; zero-padding {d - positive} axes",
            RuntimeWarning,
            stacklevel=2,
        )
    lam = np.where(lam > cutoff, lam, 0.0)
    coords = vec * np.sqrt(lam)
    for a in range(coords.shape[1]):
        colvals = coords[:, a]
        if colvals.any() and colvals[np.argmax(np.abs(colvals))] < 0.0:
            coords[:, a] = -colvals
            vec[:, a] = -vec[:, a]
    return coords, lam


def _pairwise_sq_dists(coords: np.ndarray) -> np.ndarray:
    g = coords @ coords.T
    sq = np.diag(g)[:, None] + np.diag(g)[None, :] - 2.0 * g
    return np.maximum(sq, 0.0)


def residual_curve(geo: np.ndarray, d_max: int) -> list[float]:
    """residual(d) = 1 - r^2 between geodesic and embedded distances.

    r is the Pearson correlation over the upper triangle. Coordinates for
    dimension d are the first d axes of the d_max MDS solution, so the
    curve is computed from one eigendecomposition.
    """
    geo = np.asarray(geo, dtype=float)
    n = geo.shape[0]
    if d_max < 1:
        raise InvalidInputError(f"d_max must be >= 1, got {d_max}")
    d_max = min(d_max, n - 1)
    coords, _ = classical_mds(geo, d_max)
    iu = np.triu_indices(n, 1)
    g = geo[iu]
    residuals = []
    sq = np.zeros(len(g))
    for d in range(1, d_max + 1):
        delta = coords[:, d - 1 : d]
        sq = sq + ((delta - delta.T) ** 2)[iu]
        e = np.sqrt(sq)
        gs = g.std()
        es = e.std()
        if gs == 0.0 or es == 0.0:
            residuals.append(0.0 if np.allclose(g, e) else 1.0)
            continue
        r = float(np.corrcoef(g, e)[0, 1])
        residuals.append(max(0.0, 1.0 - r * r))
    return residuals


def pick_dimension(residuals: Sequence[float]) -> int:
    """Elbow rule: the dimension with the largest discrete second difference.

    Boundary dimensions (no neighbor on one side) count as second
    difference 0, so a featureless (e.g. strictly linear) curve ties
    everywhere and the tie-break picks d=1.
    """
    r = [float(v) for v in residuals]
    if len(r) < 3:
        raise InvalidInputError(f"need at least 3 residuals, got {len(r)}")
    best_d, best_val = 1, 0.0
    for d in range(2, len(r)):
        second = r[d - 2] - 2.0 * r[d - 1] + r[d]
        if second > best_val + 1e-15:
            best_d, best_val = d, second
    return best_d


@dataclass(frozen=True)
class EmbeddingModel:
    """A built semantic embedding plus everything needed for queries."""

    coords: np.ndarray          # (n, d)
    d: int
    geodesics: np.ndarray       # (n, n)
    knn_k: int
    eigenvalues: np.ndarray     # (d,)
    descriptions: tuple[SemanticVector, ...]

    def __post_init__(self):
        for name in ("coords", "geodesics", "eigenvalues"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.d < 1:
            raise InvalidInputError("embedding dimension must be >= 1")
        if self.coords.shape != (len(self.descriptions), self.d):
            raise InvalidInputError("coords shape does not match descriptions/d")

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def build_embedding(descriptions: Sequence[SemanticVector], k: int = DEFAULT_KNN,
                    d_max: int = DEFAULT_DMAX, d: Optional[int] = None):
    """Full Isomap build; returns (EmbeddingModel, residual curve)."""
    descriptions = tuple(descriptions)
    dist = correlation_distance(descriptions)
    graph = knn_graph(dist, k)
    geo = geodesics(graph)
    residuals = residual_curve(geo, d_max)
    if d is None:
        d = pick_dimension(residuals)
    coords, lam = classical_mds(geo, d)
    model = EmbeddingModel(
        coords=coords,
        d=d,
        geodesics=geo,
        knn_k=graph.k,
        eigenvalues=lam,
        descriptions=descriptions,
    )
    return model, residuals


def embed_out_of_sample(model: EmbeddingModel, v: SemanticVector) -> np.ndarray:
    """Project a new description into the embedding (landmark Nystrom).

    Correlation distances from v to the training descriptions are extended
    to approximate geodesics through v's k nearest landmarks, then projected
    onto the MDS eigenbasis. Embedding a training description reproduces its
    stored coordinate. A constant (zero-variance) query correlates with
    nothing and sits at distance 1 from every landmark.
    """
    lam = model.eigenvalues
    if not (lam > 0.0).any():
        raise InvalidInputError("embedding has no positive eigenvalues")
    matrix = _description_matrix(model.descriptions)
    r = _pearson_rows_to_vector(matrix, np.asarray(v.values, dtype=float))
    direct = np.clip(1.0 - r, 0.0, 2.0)

    k = min(model.knn_k, model.n)
    nearest = np.argsort(direct, kind="stable")[:k]
    # geodesic through the nearest landmarks only
    geo_v = np.min(direct[nearest, None] + model.geodesics[nearest, :], axis=0)

    sq = geo_v**2
    geo_sq = model.geodesics**2
    diff = geo_sq.mean(axis=1) - sq
    coords = np.zeros(model.d)
    safe = lam > 0.0
    # p_a = (1/(2 sqrt(lam_a))) * v_a . (mean row of D^2 - delta^2),
    # with v_a the unit eigenvector, i.e. coords column / sqrt(lam_a).
    proj = 0.5 * (diff @ model.coords[:, safe])
    coords[safe] = proj / lam[safe]
    return coords


def axis_attribute_correlations(model: EmbeddingModel,
                                raw: Optional[Sequence[SemanticVector]] = None,
                                threshold: float = AXIS_CORRELATION_THRESHOLD):
    """Correlate each attribute column with each embedding axis.

    Returns (corr, groups): corr is (43, d); groups[a] lists attribute
    indices whose |correlation| exceeds the threshold on axis a.
    Zero-variance attribute columns report correlation 0.
    """
    matrix = _description_matrix(raw if raw is not None else model.descriptions)
    if matrix.shape[0] != model.n:
        raise InvalidInputError("raw description count does not match embedding")
    n_attr = matrix.shape[1]
    corr = np.zeros((n_attr, model.d))
    for a in range(model.d):
        corr[:, a] = _pearson_rows_to_vector(matrix.T, model.coords[:, a])
    groups = [
        [int(j) for j in np.flatnonzero(np.abs(corr[:, a]) > threshold)]
        for a in range(model.d)
    ]
    return corr, groups


def description_checksum(v: SemanticVector) -> str:
    return hashlib.sha256(",".join(repr(x) for x in v.values).encode()).hexdigest()


def save_embedding(model: EmbeddingModel, path, residuals=None) -> None:
    payload = {
        "coords": [[float(v) for v in row] for row in model.coords],
        "eigenvalues": [float(v) for v in model.eigenvalues],
        "d": model.d,
        "k": model.knn_k,
        "landmark_checksums": [description_checksum(v) for v in model.descriptions],
    }
    if residuals is not None:
        payload["residuals"] = [float(v) for v in residuals]
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_embedding(path, descriptions: Sequence[SemanticVector]) -> EmbeddingModel:
    """Rebuild an EmbeddingModel from embedding.json plus its descriptions.

    Checksums guard against mismatched description sets; the geodesic matrix
    is recomputed deterministically at the stored k.
    """
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    descriptions = tuple(descriptions)
    stored = payload["landmark_checksums"]
    if len(stored) != len(descriptions):
        raise InvalidInputError(
            f"embedding at {path} has {len(stored)} landmarks, "
            f"dataset has {len(descriptions)}"
        )
    for i, (have, v) in enumerate(zip(stored, descriptions)):
        if have != description_checksum(v):
            raise InvalidInputError(
                f"landmark checksum mismatch at sample index {i}; embedding "
                f"was built from different descriptions"
            )
    dist = correlation_distance(descriptions)
    graph = knn_graph(dist, int(payload["k"]))
    geo = geodesics(graph)
    return EmbeddingModel(
        coords=np.asarray(payload["coords"], dtype=float),
        d=int(payload["d"]),
        geodesics=geo,
        knn_k=int(payload["k"]),
        eigenvalues=np.asarray(payload["eigenvalues"], dtype=float),
        descriptions=descriptions,
    )


def write_residuals_csv(residuals: Sequence[float], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("dimension,residual\n")
        for d, r in enumerate(residuals, start=1):
            fh.write(f"{d},{float(r)!r}\n")
