"""Domain types, the 43-attribute vocabulary, and dataset persistence.

Semantic values flow through two vector forms.  A *semantic vector* keeps
each attribute independently in [0, 1] (fraction of annotators that used
the word); a *distribution* is the L1-normalized form consumed by the
distribution learner.  Keeping them as separate types makes the simplex
constraints enforceable at construction time.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from PIL import Image

ATTRIBUTE_NAMES: tuple[str, ...] = (
    "irregular",
    "grid",
    "granular",
    "complex",
    "uniform",
    "spiralled",
    "marbled",
    "mottled",
    "fuzzy",
    "crinkled",
    "well-ordered",
    "speckled",
    "polka-dotted",
    "repetitive",
    "ridged",
    "uneven",
    "smooth",
    "cellular",
    "globular",
    "porous",
    "regular",
    "veined",
    "cyclical",
    "freckled",
    "simple",
    "dense",
    "stained",
    "honeycombed",
    "coarse",
    "rough",
    "gouged",
    "rocky",
    "woven",
    "lined",
    "fine",
    "nonuniform",
    "disordered",
    "fibrous",
    "random",
    "lacelike",
    "messy",
    "scaly",
    "netlike",
)

N_ATTRIBUTES = len(ATTRIBUTE_NAMES)

DEFAULT_EPSILON = 1e-6

MANIFEST_NAME = "manifest.jsonl"
ATTRIBUTES_NAME = "attributes.txt"
IMAGES_DIRNAME = "images"


class TexsemError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(TexsemError, ValueError):
    """An operation received arguments outside its contract."""


class DatasetError(TexsemError):
    """Dataset files are missing, unreadable, or inconsistent."""


@dataclass(frozen=True)
class AttributeVocabulary:
    """The ordered, index-stable list of semantic attribute names."""

    names: tuple[str, ...] = ATTRIBUTE_NAMES

    def __post_init__(self):
        if len(self.names) != N_ATTRIBUTES:
            raise InvalidInputError(
                f"vocabulary must have {N_ATTRIBUTES} names, got {len(self.names)}"
            )
        if len(set(self.names)) != len(self.names):
            raise InvalidInputError("vocabulary names must be unique")

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidInputError(f"unknown attribute name: {name!r}") from None

    def checksum(self) -> str:
        return hashlib.sha256(",".join(self.names).encode("utf-8")).hexdigest()


VOCABULARY = AttributeVocabulary()


def _as_float_tuple(values) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class SemanticVector:
    """Raw 43-attribute description; every value independently in [0, 1]."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _as_float_tuple(self.values))
        if len(self.values) != N_ATTRIBUTES:
            raise InvalidInputError(
                f"semantic vector needs {N_ATTRIBUTES} values, got {len(self.values)}"
            )
        for j, v in enumerate(self.values):
            if not math.isfinite(v) or v < 0.0 or v > 1.0:
                raise InvalidInputError(
                    f"semantic value for {ATTRIBUTE_NAMES[j]!r} out of [0, 1]: {v}"
                )

    @classmethod
    def from_array(cls, arr) -> "SemanticVector":
        return cls(_as_float_tuple(np.asarray(arr, dtype=float)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def l1_mass(self) -> float:
        return float(sum(self.values))


@dataclass(frozen=True)
class Distribution:
    """Nonnegative values summing to one (within 1e-9)."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _as_float_tuple(self.values))
        if not self.values:
            raise InvalidInputError("distribution must be nonempty")
        total = 0.0
        for v in self.values:
            if not math.isfinite(v) or v < 0.0:
                raise InvalidInputError(f"distribution value must be >= 0, got {v}")
            total += v
        if abs(total - 1.0) > 1e-9:
            raise InvalidInputError(f"distribution must sum to 1, got {total!r}")

    @classmethod
    def from_array(cls, arr) -> "Distribution":
        return cls(_as_float_tuple(np.asarray(arr, dtype=float)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True, eq=False)
class TextureImage:
    """Single-channel image, intensities in [0, 1], row-major."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.pixels, dtype=float))
        if arr.shape != (self.height, self.width):
            raise InvalidInputError(
                f"pixel array shape {arr.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if arr.size and (not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0):
            raise InvalidInputError("pixel intensities must be finite and in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_array(cls, arr) -> "TextureImage":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 2:
            raise InvalidInputError(f"expected a 2-D array, got shape {arr.shape}")
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr)


@dataclass(frozen=True)
class GenerationTag:
    """Provenance needed to regenerate a texture: model, parameters, seed."""

    model_id: str
    params: tuple[float, ...]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "params", _as_float_tuple(self.params))
        object.__setattr__(self, "seed", int(self.seed))
        if not (0 <= self.seed < 2**64):
            raise InvalidInputError(f"seed must fit in 64 bits, got {self.seed}")


@dataclass(frozen=True)
class TextureSample:
    """One dataset row: image reference, generation tag, description."""

    id: int
    image_path: str
    tag: GenerationTag
    semantics: Optional[SemanticVector]
    features: Optional[tuple[float, ...]] = None

    def with_features(self, values) -> "TextureSample":
        return TextureSample(
            id=self.id,
            image_path=self.image_path,
            tag=self.tag,
            semantics=self.semantics,
            features=_as_float_tuple(values),
        )

    def with_semantics(self, semantics: SemanticVector) -> "TextureSample":
        return TextureSample(
            id=self.id,
            image_path=self.image_path,
            tag=self.tag,
            semantics=semantics,
            features=self.features,
        )


def normalize_counts(counts: Sequence[int], participants: int) -> SemanticVector:
    """Turn per-attribute annotator counts into fractional semantic values."""
    if participants <= 0:
        raise InvalidInputError(f"participants must be positive, got {participants}")
    if len(counts) != N_ATTRIBUTES:
        raise InvalidInputError(
            f"expected {N_ATTRIBUTES} counts, got {len(counts)}"
        )
    for j, c in enumerate(counts):
        if c < 0 or c > participants:
            raise InvalidInputError(
                f"count for {ATTRIBUTE_NAMES[j]!r} outside [0, {participants}]: {c}"
            )
    return SemanticVector(tuple(c / participants for c in counts))


def to_distribution(v: SemanticVector, epsilon: float = DEFAULT_EPSILON) -> Distribution:
    """Floor values at epsilon and renormalize onto the simplex.

    An all-zero vector (with epsilon=0) maps to the uniform distribution so
    that degenerate inputs cannot crash downstream training.
    """
    if epsilon < 0:
        raise InvalidInputError(f"epsilon must be >= 0, got {epsilon}")
    arr = np.maximum(v.as_array(), epsilon)
    total = arr.sum()
    if total <= 0.0:
        arr = np.full(len(v.values), 1.0 / len(v.values))
        total = 1.0
    return Distribution.from_array(arr / total)


def split_texture(img: TextureImage) -> tuple[TextureImage, TextureImage, TextureImage, TextureImage]:
    """Split an even-dimension image into its four quadrant tiles.

    Order: top-left, top-right, bottom-left, bottom-right.
    """
    if img.width % 2 != 0 or img.height % 2 != 0:
        raise InvalidInputError(
            f"image dimensions must be even to split, got {img.width}x{img.height}"
        )
    h2, w2 = img.height // 2, img.width // 2
    p = img.pixels
    return (
        TextureImage.from_array(p[:h2, :w2]),
        TextureImage.from_array(p[:h2, w2:]),
        TextureImage.from_array(p[h2:, :w2]),
        TextureImage.from_array(p[h2:, w2:]),
    )


def write_png(img: TextureImage, path) -> None:
    """Write an 8-bit grayscale PNG; intensity i maps to round(i*255)."""
    data = np.round(img.pixels * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(os.fspath(path), format="PNG")


def read_png(path) -> TextureImage:
    with Image.open(os.fspath(path)) as im:
        arr = np.asarray(im.convert("L"), dtype=float) / 255.0
    return TextureImage.from_array(arr)


def _sample_record(sample: TextureSample) -> dict:
    return {
        "id": sample.id,
        "image_path": sample.image_path,
        "model_id": sample.tag.model_id,
        "params": list(sample.tag.params),
        "seed": sample.tag.seed,
        "semantics": list(sample.semantics.values) if sample.semantics else None,
    }


def save_dataset(samples: Iterable[TextureSample], directory,
                 vocabulary: AttributeVocabulary = VOCABULARY) -> Path:
    """Write manifest.jsonl and attributes.txt into `directory`.

    Images are not written here; samples reference them by relative path.
    Returns the manifest path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    samples = list(samples)
    ids = [s.id for s in samples]
    if len(set(ids)) != len(ids):
        raise DatasetError("sample ids must be unique within a dataset")

    attr_path = directory / ATTRIBUTES_NAME
    attr_path.write_text("\n".join(vocabulary.names) + "\n", encoding="utf-8")

    manifest_path = directory / MANIFEST_NAME
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(_sample_record(sample), sort_keys=False) + "\n")
    return manifest_path


def load_dataset(directory, vocabulary: AttributeVocabulary = VOCABULARY) -> list[TextureSample]:
    """Load samples from a dataset directory written by save_dataset.

    Every image referenced by the manifest must exist; a missing file is
    reported with the offending sample id.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetError(f"manifest not found: {manifest_path}")

    attr_path = directory / ATTRIBUTES_NAME
    if attr_path.is_file():
        names = tuple(attr_path.read_text(encoding="utf-8").splitlines())
        if names != vocabulary.names:
            raise DatasetError(f"attribute list in {attr_path} does not match vocabulary")

    samples = []
    seen_ids = set()
    for lineno, line in enumerate(manifest_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"bad manifest line {lineno}: {exc}") from exc
        sid = int(rec["id"])
        if sid in seen_ids:
            raise DatasetError(f"duplicate sample id {sid} in manifest")
        seen_ids.add(sid)
        image_path = rec["image_path"]
        if not (directory / image_path).is_file():
            raise DatasetError(f"sample {sid}: missing image file {image_path!r}")
        sem = rec.get("semantics")
        samples.append(
            TextureSample(
                id=sid,
                image_path=image_path,
                tag=GenerationTag(
                    model_id=rec["model_id"],
                    params=tuple(rec["params"]),
                    seed=int(rec["seed"]),
                ),
                semantics=SemanticVector(tuple(sem)) if sem is not None else None,
            )
        )
    return samples


def load_sample_image(directory, sample: TextureSample) -> TextureImage:
    return read_png(Path(directory) / sample.image_path)
