"""Semantic-description-driven procedural texture generation toolkit."""

__version__ = "0.1.0"

from .core import (
    ATTRIBUTE_NAMES,
    N_ATTRIBUTES,
    AttributeVocabulary,
    Distribution,
    GenerationTag,
    SemanticVector,
    TextureImage,
    TextureSample,
    VOCABULARY,
)

__all__ = [
    "ATTRIBUTE_NAMES",
    "N_ATTRIBUTES",
    "AttributeVocabulary",
    "Distribution",
    "GenerationTag",
    "SemanticVector",
    "TextureImage",
    "TextureSample",
    "VOCABULARY",
    "__version__",
]
