"""Corpus manifest model and line-delimited JSON persistence.

File layout: a `#corpus-v1` header line, then one JSON object per sample
with the keys id, platform, category, label, template_id, params, and
renderings. Source text lives inline (JSON escaping handles newlines) so an
evaluation run needs no external file tree.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

VULNERABLE = "vulnerable"
SAFE = "safe"
LLM_SOURCE = "llm_source"
ANALYSIS_SOURCE = "analysis_source"

_HEADER = "#corpus-v1"


class ManifestFormatError(Exception):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class SchemaVersionError(Exception):
    pass


@dataclass(frozen=True)
class Sample:
    id: str
    platform: str
    category: str
    label: str
    renderings: dict[str, str]
    template_id: str
    params: dict[str, object]

    @property
    def is_vulnerable(self) -> bool:
        return self.label == VULNERABLE

    def rendering(self, form: str) -> str:
        try:
            return self.renderings[form]
        except KeyError:
            raise MissingRenderingError(f"sample {self.id} has no {form} rendering") from None

    def to_json(self) -> str:
        payload = {
            "id": self.id,
            "platform": self.platform,
            "category": self.category,
            "label": self.label,
            "template_id": self.template_id,
            "params": self.params,
            "renderings": self.renderings,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


class MissingRenderingError(Exception):
    pass


@dataclass
class CorpusManifest:
    samples: list[Sample]
    seed: int
    per_class: int
    counts: dict[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.counts:
            self.counts = self._count()

    def _count(self) -> dict[tuple[str, str], int]:
        counts: dict[tuple[str, str], int] = {}
        for s in self.samples:
            key = (s.category, s.label)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def sample_by_id(self, sample_id: str) -> Sample:
        for s in self.samples:
            if s.id == sample_id:
                return s
        raise KeyError(sample_id)

    def subset(self, *, categories: list[str] | None = None, platform: str | None = None) -> "CorpusManifest":
        picked = [
            s for s in self.samples
            if (categories is None or s.category in categories)
            and (platform is None or s.platform == platform)
        ]
        return CorpusManifest(samples=picked, seed=self.seed, per_class=self.per_class)

    def __eq__(self, other):
        if not isinstance(other, CorpusManifest):
            return NotImplemented
        return (
            self.samples == other.samples
            and self.seed == other.seed
            and self.per_class == other.per_class
            and self.counts == other.counts
        )


def write_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    lines = [_HEADER, json.dumps({"seed": manifest.seed, "per_class": manifest.per_class})]
    lines.extend(s.to_json() for s in manifest.samples)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> CorpusManifest:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#corpus-"):
        raise SchemaVersionError("missing #corpus-v1 header")
    if lines[0].strip() != _HEADER:
        raise SchemaVersionError(f"unsupported corpus schema {lines[0].strip()!r}, expected {_HEADER}")
    if len(lines) < 2:
        raise ManifestFormatError(2, "missing manifest metadata line")
    try:
        meta = json.loads(lines[1])
        seed, per_class = int(meta["seed"]), int(meta["per_class"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ManifestFormatError(2, f"bad metadata line: {exc}") from None
    samples = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            samples.append(Sample(
                id=obj["id"],
                platform=obj["platform"],
                category=obj["category"],
                label=obj["label"],
                template_id=obj["template_id"],
                params=obj["params"],
                renderings=obj["renderings"],
            ))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ManifestFormatError(lineno, f"malformed record: {exc}") from None
    return CorpusManifest(samples=samples, seed=seed, per_class=per_class)
