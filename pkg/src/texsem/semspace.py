"""End-to-end semantic space: build, retrieve, generate, and score.

A SemanticSpace embeds every dataset description with Isomap and keeps the
generation tag alongside each embedded point. Queries are raw semantic
vectors; they are projected out-of-sample and answered by Euclidean
nearest neighbor, whose tag then drives the procedural renderer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import features as features_mod
from . import ldl, manifold, procgen
from .core import (
    AttributeVocabulary,
    GenerationTag,
    InvalidInputError,
    SemanticVector,
    TextureImage,
    TextureSample,
    VOCABULARY,
)

EMBEDDING_NAME = "embedding.json"
RESIDUALS_NAME = "residuals.csv"


@dataclass(frozen=True)
class SemanticSpace:
    embedding: manifold.EmbeddingModel
    samples: tuple[TextureSample, ...]

    def __post_init__(self):
        if len(self.samples) != self.embedding.n:
            raise InvalidInputError("sample count does not match embedding size")

    @property
    def coords(self) -> np.ndarray:
        return self.embedding.coords


@dataclass(frozen=True)
class GenerationResult:
    image: TextureImage
    tag: GenerationTag
    neighbor_id: int
    neighbor_distance: float
    query_point: np.ndarray


def build_space(samples: Sequence[TextureSample],
                predictor: Optional[ldl.MaxEntModel] = None,
                k: int = manifold.DEFAULT_KNN,
                d_max: int = manifold.DEFAULT_DMAX,
                d: Optional[int] = None):
    """Embed all sample descriptions; returns (SemanticSpace, residuals).

    Samples without semantics get them predicted from their feature vectors
    when a predictor is supplied (prediction is simplex-scaled, which is
    fine for the correlation-based embedding: per-vector scaling does not
    change Pearson correlations).
    """
    samples = list(samples)
    if len(samples) < k + 1:
        raise InvalidInputError(
            f"need at least k+1={k + 1} samples to build a space, got {len(samples)}"
        )
    resolved = []
    for s in samples:
        if s.semantics is not None:
            resolved.append(s)
            continue
        if predictor is None:
            raise InvalidInputError(
                f"sample {s.id} has no semantics and no predictor was given"
            )
        if s.features is None:
            raise InvalidInputError(
                f"sample {s.id} has no semantics and no features to predict from"
            )
        dist = ldl.predict(predictor, np.asarray(s.features, dtype=float))
        resolved.append(s.with_semantics(SemanticVector(dist.values)))
    descriptions = [s.semantics for s in resolved]
    if len({d.values for d in descriptions}) == 1:
        raise InvalidInputError(
            "all sample semantics are identical; the correlation matrix has "
            "zero variance and no space can be built"
        )
    embedding, residuals = manifold.build_embedding(descriptions, k=k, d_max=d_max, d=d)
    return SemanticSpace(embedding=embedding, samples=tuple(resolved)), residuals


def nearest_neighbor(space: SemanticSpace, query: SemanticVector):
    """Embed the query and return (sample, distance); ties pick smallest id."""
    neighbors = top_neighbors(space, query, 1)
    sample, dist = neighbors[0]
    return sample, dist


def top_neighbors(space: SemanticSpace, query: SemanticVector, k: int):
    """The k nearest samples as (sample, distance), ascending by distance."""
    point = manifold.embed_out_of_sample(space.embedding, query)
    deltas = space.coords - point
    dists = np.sqrt((deltas**2).sum(axis=1))
    order = sorted(range(len(dists)), key=lambda i: (dists[i], space.samples[i].id))
    return [(space.samples[i], float(dists[i])) for i in order[:k]]


def generate_from_description(space: SemanticSpace, query: SemanticVector,
                              size: int, reuse_seed: bool = False,
                              registry=None) -> GenerationResult:
    """Render a new texture from the retrieved neighbor's generation tag.

    By default a fresh (but deterministic) seed replaces the neighbor's so
    the output is a new texture instance; reuse_seed=True reproduces the
    stored sample exactly.
    """
    point = manifold.embed_out_of_sample(space.embedding, query)
    sample, dist = nearest_neighbor(space, query)
    if reuse_seed:
        seed = sample.tag.seed
    else:
        digest = manifold.description_checksum(query)
        seed = procgen.fresh_seed(sample.tag.seed, sample.id, int(digest[:15], 16))
    tag = GenerationTag(sample.tag.model_id, sample.tag.params, seed)
    image = procgen.generate(tag, size, registry=registry)
    return GenerationResult(
        image=image,
        tag=tag,
        neighbor_id=sample.id,
        neighbor_distance=dist,
        query_point=point,
    )


def closed_loop_mse(query: SemanticVector, result: GenerationResult,
                    predictor: ldl.MaxEntModel,
                    bank: features_mod.GaborBank) -> float:
    """Mean squared error between the query and the predicted description
    of the generated texture, rescaled to the query's raw L1 mass."""
    fv = features_mod.extract(result.image, bank)
    dist = ldl.predict(predictor, fv.as_array())
    raw_pred = dist.as_array() * query.l1_mass()
    diff = query.as_array() - raw_pred
    return float(np.mean(diff**2))


def query_from_mapping(mapping: dict, vocabulary: AttributeVocabulary = VOCABULARY) -> SemanticVector:
    """Build a query vector from an attribute-name -> value mapping.

    Unknown names and out-of-range values are rejected with the offending
    key; unspecified attributes default to 0.
    """
    values = [0.0] * len(vocabulary.names)
    for name, value in mapping.items():
        idx = vocabulary.index(name)  # raises naming the key
        value = float(value)
        if not (0.0 <= value <= 1.0):
            raise InvalidInputError(
                f"value for attribute {name!r} outside [0, 1]: {value}"
            )
        values[idx] = value
    return SemanticVector(tuple(values))


def load_query(path, vocabulary: AttributeVocabulary = VOCABULARY) -> SemanticVector:
    """Read a query.json file: a flat attribute-name -> value mapping."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict):
        raise InvalidInputError("query file must contain a JSON object")
    return query_from_mapping(payload, vocabulary)


def save_space(space: SemanticSpace, directory, residuals=None) -> None:
    """Persist the embedding (embedding.json + residuals.csv) to a directory.

    Samples are not duplicated; loading needs the original dataset.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifold.save_embedding(space.embedding, directory / EMBEDDING_NAME,
                            residuals=residuals)
    if residuals is not None:
        manifold.write_residuals_csv(residuals, directory / RESIDUALS_NAME)


def load_space(directory, samples: Sequence[TextureSample],
               predictor: Optional[ldl.MaxEntModel] = None) -> SemanticSpace:
    directory = Path(directory)
    samples = list(samples)
    resolved = []
    for s in samples:
        if s.semantics is None:
            if predictor is None or s.features is None:
                raise InvalidInputError(
                    f"sample {s.id} lacks semantics; load the space with the "
                    f"predictor and features used to build it"
                )
            dist = ldl.predict(predictor, np.asarray(s.features, dtype=float))
            s = s.with_semantics(SemanticVector(dist.values))
        resolved.append(s)
    embedding = manifold.load_embedding(
        directory / EMBEDDING_NAME, [s.semantics for s in resolved]
    )
    return SemanticSpace(embedding=embedding, samples=tuple(resolved))


def write_provenance(result: GenerationResult, query: SemanticVector, path,
                     mse: Optional[float] = None,
                     vocabulary: AttributeVocabulary = VOCABULARY) -> None:
    payload = {
        "tag": {
            "model_id": result.tag.model_id,
            "params": list(result.tag.params),
            "seed": result.tag.seed,
        },
        "neighbor_id": result.neighbor_id,
        "neighbor_distance": result.neighbor_distance,
        "query": {
            name: value
            for name, value in zip(vocabulary.names, query.values)
            if value > 0.0
        },
        "query_point": [float(v) for v in result.query_point],
    }
    if mse is not None:
        payload["closed_loop_mse"] = mse
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")
