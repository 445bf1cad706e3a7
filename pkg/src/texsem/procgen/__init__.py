"""Registry of parametric texture models, rendering, and the semantic oracle.

The oracle assigns each tag a deterministic 43-attribute description:
the model's hand-authored template plus per-parameter linear modulation.
It deliberately ignores the seed, so two renders of the same model and
parameters under different noise instances share one description.
"""

from __future__ import annotations

import importlib.resources
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from ..core import (
    GenerationTag,
    InvalidInputError,
    SemanticVector,
    TexsemError,
    TextureImage,
    VOCABULARY,
)
from .render import RENDERERS, channel_key, _splitmix64

MIN_DYNAMIC_RANGE = 0.2


class GenerationError(TexsemError):
    """A tag cannot be rendered: unknown model or out-of-range parameter."""


@dataclass(frozen=True)
class ParamSpec:
    name: str
    lo: float
    hi: float
    modulators: tuple[tuple[int, float], ...]  # (attribute index, weight)


@dataclass(frozen=True)
class ModelDescriptor:
    model_id: str
    params: tuple[ParamSpec, ...]
    template_semantics: SemanticVector

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    @property
    def param_ranges(self) -> tuple[tuple[float, float], ...]:
        return tuple((p.lo, p.hi) for p in self.params)

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def modulators(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        return tuple(p.modulators for p in self.params)


class ModelRegistry:
    def __init__(self, models: Sequence[ModelDescriptor]):
        self._models = list(models)
        self._by_id = {m.model_id: m for m in self._models}
        if len(self._by_id) != len(self._models):
            raise InvalidInputError("duplicate model ids in registry config")

    def list_models(self) -> list[ModelDescriptor]:
        return list(self._models)

    def get(self, model_id: str) -> ModelDescriptor:
        try:
            return self._by_id[model_id]
        except KeyError:
            raise GenerationError(f"unknown model_id: {model_id!r}") from None

    def validate_tag(self, tag: GenerationTag) -> ModelDescriptor:
        model = self.get(tag.model_id)
        if len(tag.params) != model.arity:
            raise GenerationError(
                f"model {model.model_id!r} takes {model.arity} params, "
                f"tag has {len(tag.params)}"
            )
        for spec, value in zip(model.params, tag.params):
            if not (spec.lo <= value <= spec.hi):
                raise GenerationError(
                    f"param {spec.name!r} of model {model.model_id!r} out of "
                    f"range [{spec.lo}, {spec.hi}]: {value}"
                )
        return model


def _parse_model(entry: dict) -> ModelDescriptor:
    model_id = entry["id"]
    if model_id not in RENDERERS:
        raise InvalidInputError(f"no renderer for model id {model_id!r}")
    params = []
    for p in entry.get("param", []):
        lo, hi = (float(v) for v in p["range"])
        if not (lo < hi):
            raise InvalidInputError(
                f"model {model_id!r} param {p['name']!r}: need lo < hi, got [{lo}, {hi}]"
            )
        mods = tuple(
            (VOCABULARY.index(attr), float(w))
            for attr, w in p.get("modulates", {}).items()
        )
        params.append(ParamSpec(name=p["name"], lo=lo, hi=hi, modulators=mods))
    template = np.zeros(len(VOCABULARY.names))
    for attr, value in entry.get("template", {}).items():
        template[VOCABULARY.index(attr)] = float(value)
    if (template > 0.5).sum() < 5:
        raise InvalidInputError(
            f"model {model_id!r}: template must set at least 5 attributes above 0.5"
        )
    return ModelDescriptor(
        model_id=model_id,
        params=tuple(params),
        template_semantics=SemanticVector.from_array(template),
    )


def load_registry(path=None) -> ModelRegistry:
    """Parse a registry config; defaults to the packaged models.toml."""
    if path is None:
        data = importlib.resources.files(__package__).joinpath("models.toml").read_bytes()
    else:
        data = Path(path).read_bytes()
    config = tomllib.loads(data.decode("utf-8"))
    return ModelRegistry([_parse_model(m) for m in config.get("model", [])])


_default_registry: Optional[ModelRegistry] = None


def default_registry() -> ModelRegistry:
    global _default_registry
    if _default_registry is None:
        _default_registry = load_registry()
    return _default_registry


def list_models() -> list[ModelDescriptor]:
    return default_registry().list_models()


def generate(tag: GenerationTag, size: int,
             registry: Optional[ModelRegistry] = None) -> TextureImage:
    """Render a tag at size x size pixels. Pure function of (tag, size)."""
    registry = registry or default_registry()
    registry.validate_tag(tag)
    if size < 2:
        raise InvalidInputError(f"size must be at least 2, got {size}")
    renderer = RENDERERS[tag.model_id]
    arr = renderer(tag.params, tag.seed, size, size)
    arr = np.clip(arr, 0.0, 1.0)
    return TextureImage.from_array(arr)


def sample_parameter_grid(model: ModelDescriptor, n_per_param: int,
                          seeds: Sequence[int]) -> list[GenerationTag]:
    """Evenly spaced, endpoint-inclusive parameter grid crossed with seeds.

    n_per_param == 1 yields the range midpoint.
    """
    if n_per_param < 1:
        raise InvalidInputError(f"n_per_param must be >= 1, got {n_per_param}")
    if not seeds:
        raise InvalidInputError("need at least one seed")
    axes = []
    for spec in model.params:
        if n_per_param == 1:
            axes.append([(spec.lo + spec.hi) / 2.0])
        else:
            axes.append(list(np.linspace(spec.lo, spec.hi, n_per_param)))
    tags = []
    for combo in itertools.product(*axes):
        for seed in seeds:
            tags.append(GenerationTag(model.model_id, tuple(combo), int(seed)))
    return tags


def oracle_semantics(tag: GenerationTag,
                     registry: Optional[ModelRegistry] = None) -> SemanticVector:
    """Deterministic description of a tag, independent of its seed.

    values = clamp(template + sum_p weight * t_p, 0, 1) where t_p maps the
    parameter range [lo, hi] onto [-0.5, +0.5].
    """
    registry = registry or default_registry()
    model = registry.validate_tag(tag)
    values = model.template_semantics.as_array().copy()
    for spec, value in zip(model.params, tag.params):
        # Offset from the midpoint so a midpoint parameter contributes exactly 0.
        t = (value - (spec.lo + spec.hi) / 2.0) / (spec.hi - spec.lo)
        for attr_idx, weight in spec.modulators:
            values[attr_idx] += weight * t
    return SemanticVector.from_array(np.clip(values, 0.0, 1.0))


def fresh_seed(base_seed: int, *mix: int) -> int:
    """Derive a new 64-bit seed deterministically from a base and context."""
    h = channel_key(base_seed, 977)
    with np.errstate(over="ignore"):
        for m in mix:
            h = _splitmix64(h + np.uint64(m % (1 << 64)))
    return int(h)
