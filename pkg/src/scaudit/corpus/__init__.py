from .manifest import (
    CorpusManifest,
    ManifestFormatError,
    Sample,
    SchemaVersionError,
    load_manifest,
    write_manifest,
)
from .generator import TemplateError, ValidationReport, generate, render, validate

__all__ = [
    "CorpusManifest",
    "ManifestFormatError",
    "Sample",
    "SchemaVersionError",
    "load_manifest",
    "write_manifest",
    "TemplateError",
    "ValidationReport",
    "generate",
    "render",
    "validate",
]
