"""Synthetic multi-domain datasets with controllable shift.

Class means sit on a circle in a 2-D latent plane; each domain rotates the
whole circle by its own angle, so "domain" = "rotation" and the held-out
domain is an unseen rotation. Latent points are embedded into the ambient
feature space by a fixed seeded orthonormal map plus small isotropic noise.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DatasetFormatError
from .mathutils import named_stream
from .pools import Sample

DATASET_FORMAT = "ceg-dataset"
DATASET_VERSION = 1


@dataclass(frozen=True)
class DomainSpec:
    """Generation recipe for one multi-domain dataset."""

    num_domains: int
    num_classes: int
    samples_per_domain: int
    rotation_angles_deg: tuple[float, ...]
    class_separation: float = 3.0
    noise_sigma: float = 0.4
    latent_dim: int = 2
    ambient_dim: int = 16
    ambient_noise_sigma: float = 0.1  # std; set 0 to disable ambient noise
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rotation_angles_deg", tuple(float(a) for a in self.rotation_angles_deg))
        if self.num_domains < 2:
            raise ConfigError("invariant violated: num_domains >= 2")
        if self.num_classes < 2:
            raise ConfigError("invariant violated: num_classes >= 2")
        if self.samples_per_domain < self.num_classes:
            raise ConfigError("invariant violated: samples_per_domain >= num_classes")
        if len(self.rotation_angles_deg) != self.num_domains:
            raise ConfigError("invariant violated: one rotation angle per domain")
        if len(set(self.rotation_angles_deg)) != self.num_domains:
            raise ConfigError("invariant violated: rotation angles distinct")
        if self.latent_dim < 2:
            raise ConfigError("invariant violated: latent_dim >= 2")
        if self.ambient_dim < self.latent_dim:
            raise ConfigError("invariant violated: ambient_dim >= latent_dim")
        if self.class_separation <= 0:
            raise ConfigError("invariant violated: class_separation > 0")
        if self.noise_sigma < 0 or self.ambient_noise_sigma < 0:
            raise ConfigError("invariant violated: noise levels >= 0")
        if self.seed < 0:
            raise ConfigError("invariant violated: seed >= 0")

    def to_dict(self) -> dict:
        return asdict(self) | {"rotation_angles_deg": list(self.rotation_angles_deg)}

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        try:
            return cls(**{k: (tuple(v) if k == "rotation_angles_deg" else v) for k, v in d.items()})
        except TypeError as exc:
            raise ConfigError(f"bad dataset spec: {exc}") from exc


@dataclass
class GeneratedDataset:
    samples: list[Sample]
    spec: DomainSpec

    @property
    def n_total(self) -> int:
        return len(self.samples)

    def by_id(self) -> dict[int, Sample]:
        return {s.id: s for s in self.samples}

    def features(self) -> np.ndarray:
        return np.stack([s.features for s in self.samples])


def class_counts(spec: DomainSpec) -> list[int]:
    """Per-class sample counts within one domain; remainder to low classes."""
    base, rem = divmod(spec.samples_per_domain, spec.num_classes)
    return [base + (1 if h < rem else 0) for h in range(spec.num_classes)]


def latent_class_means(spec: DomainSpec) -> np.ndarray:
    """Latent class means per domain, shape (num_domains, num_classes, latent_dim).

    Class h sits at angle 2*pi*h/H on the circle; domain k rotates the
    first two latent coordinates by its angle.
    """
    base_angles = 2.0 * np.pi * np.arange(spec.num_classes) / spec.num_classes
    means = np.zeros((spec.num_domains, spec.num_classes, spec.latent_dim))
    for k, deg in enumerate(spec.rotation_angles_deg):
        theta = np.deg2rad(deg)
        angles = base_angles + theta
        means[k, :, 0] = spec.class_separation * np.cos(angles)
        means[k, :, 1] = spec.class_separation * np.sin(angles)
    return means


def embedding_map(spec: DomainSpec) -> np.ndarray:
    """Seeded orthonormal map (ambient_dim x latent_dim), columns orthonormal."""
    rng = named_stream(spec.seed, "embedding")
    a = rng.standard_normal((spec.ambient_dim, spec.latent_dim))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))  # fix QR sign ambiguity


def generate(spec: DomainSpec) -> GeneratedDataset:
    """Draw the full dataset; identical spec -> identical samples."""
    means = latent_class_means(spec)
    q = embedding_map(spec)
    counts = class_counts(spec)
    samples: list[Sample] = []
    next_id = 0
    for k in range(spec.num_domains):
        rng = named_stream(spec.seed, f"domain-{k}")
        class_idx = np.repeat(np.arange(spec.num_classes), counts)
        latent = means[k][class_idx] + spec.noise_sigma * rng.standard_normal(
            (spec.samples_per_domain, spec.latent_dim)
        )
        ambient = latent @ q.T + spec.ambient_noise_sigma * rng.standard_normal(
            (spec.samples_per_domain, spec.ambient_dim)
        )
        for row in range(spec.samples_per_domain):
            samples.append(
                Sample(
                    id=next_id,
                    features=ambient[row],
                    domain=k,
                    hidden_class=int(class_idx[row]),
                )
            )
            next_id += 1
    return GeneratedDataset(samples, spec)


def leave_one_domain_out(
    dataset: GeneratedDataset, target_index: int
) -> tuple[list[Sample], list[Sample]]:
    """Split off one whole domain as the evaluation target.

    Source samples keep their ids but get contiguous domain indices
    0..K-2 (old index k maps to k if k < target else k - 1).
    """
    k_total = dataset.spec.num_domains
    if not 0 <= target_index < k_total:
        raise ConfigError(f"target index {target_index} outside [0, {k_total})")
    sources, targets = [], []
    for s in dataset.samples:
        if s.domain == target_index:
            targets.append(s)
        else:
            new_domain = s.domain if s.domain < target_index else s.domain - 1
            sources.append(
                Sample(id=s.id, features=s.features, domain=new_domain, hidden_class=s.hidden_class)
            )
    return sources, targets


def save_dataset(path: str | Path, dataset: GeneratedDataset) -> None:
    """JSON-lines dump: header with the spec, then one sample per line."""
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "spec": dataset.spec.to_dict(),
    }
    lines = [json.dumps(header, sort_keys=True)]
    for s in dataset.samples:
        lines.append(
            json.dumps(
                {"id": s.id, "domain": s.domain, "class": s.hidden_class, "x": s.features.tolist()},
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path: str | Path) -> GeneratedDataset:
    """Parse a saved dataset; any malformed line aborts with its line number."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DatasetFormatError("line 1: missing dataset header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"line 1: bad header: {exc}") from exc
    if header.get("format") != DATASET_FORMAT or header.get("version") != DATASET_VERSION:
        raise DatasetFormatError("line 1: unrecognized dataset format/version")
    spec = DomainSpec.from_dict(header["spec"])

    samples: list[Sample] = []
    seen_ids: set[int] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            sid, domain, cls, x = rec["id"], rec["domain"], rec["class"], rec["x"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DatasetFormatError(f"line {lineno}: {exc}") from exc
        if sid in seen_ids:
            raise DatasetFormatError(f"line {lineno}: duplicate id {sid}")
        if not 0 <= domain < spec.num_domains:
            raise DatasetFormatError(f"line {lineno}: domain {domain} out of range")
        if not 0 <= cls < spec.num_classes:
            raise DatasetFormatError(f"line {lineno}: class {cls} out of range")
        if len(x) != spec.ambient_dim:
            raise DatasetFormatError(
                f"line {lineno}: feature width {len(x)} != ambient_dim {spec.ambient_dim}"
            )
        seen_ids.add(sid)
        samples.append(
            Sample(id=int(sid), features=np.asarray(x, dtype=np.float64), domain=int(domain), hidden_class=int(cls))
        )

    expected = spec.num_domains * spec.samples_per_domain
    if len(samples) != expected:
        raise DatasetFormatError(
            f"line {len(lines)}: truncated dataset: {len(samples)} samples, spec promises {expected}"
        )
    return GeneratedDataset(samples, spec)
