"""Batch image embedding with one of four encoder configurations.

Preprocessing is fixed per backbone family and never varies between runs:

* ResNet50 family (``none``, ``moco``, ``imagenet``): resize shorter side to
  256 (bilinear), center-crop 224, scale to [0, 1], normalize with the
  ImageNet statistics mean=(0.485, 0.456, 0.406), std=(0.229, 0.224, 0.225).
* ``clip``: resize shorter side to 224 (bicubic), center-crop 224, normalize
  with CLIP's statistics mean=(0.48145466, 0.4578275, 0.40821073),
  std=(0.26862954, 0.26130258, 0.27577711).

Backbone ``none`` is a freshly initialized ResNet50 seeded from the run
config, so a fixed seed reproduces the output file byte for byte. The other
backbones load their published checkpoints (``--weights`` for a local file
or model directory). Vectors are stored unnormalized; any normalization is
the classifier's concern.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import models
from torchvision import transforms as T

from .store import write_store

log = logging.getLogger(__name__)

BACKBONES = ("none", "moco", "imagenet", "clip")

_IMAGENET_TRANSFORM = T.Compose([
    T.Resize(256, interpolation=T.InterpolationMode.BILINEAR),
    T.CenterCrop(224),
    T.ToTensor(),
    T.Normalize(mean=(0.485, 0.456, 0.406), std=(0.229, 0.224, 0.225)),
])

_CLIP_TRANSFORM = T.Compose([
    T.Resize(224, interpolation=T.InterpolationMode.BICUBIC),
    T.CenterCrop(224),
    T.ToTensor(),
    T.Normalize(mean=(0.48145466, 0.4578275, 0.40821073),
                std=(0.26862954, 0.26130258, 0.27577711)),
])


class ExtractorError(Exception):
    pass


@dataclass
class ExtractorConfig:
    backbone: str
    image_dir: Path
    id_mapping: Path
    seed: int | None = None
    batch_size: int = 16
    weights: str | None = None

    def __post_init__(self) -> None:
        if self.backbone not in BACKBONES:
            raise ExtractorError(
                f"unknown backbone {self.backbone!r}; one of {BACKBONES}"
            )
        if self.backbone == "none" and self.seed is None:
            raise ExtractorError("backbone 'none' requires an explicit --seed")
        self.image_dir = Path(self.image_dir)
        self.id_mapping = Path(self.id_mapping)


def read_id_mapping(path: Path) -> list[tuple[str, str]]:
    """CSV rows ``image_id,relative_path``; a header row is skipped."""
    rows = []
    with path.open("r", encoding="utf-8", newline="") as fp:
        for lineno, row in enumerate(csv.reader(fp), start=1):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise ExtractorError(
                    f"{path}:{lineno}: expected 2 columns, got {len(row)}"
                )
            if lineno == 1 and row == ["image_id", "relative_path"]:
                continue
            rows.append((row[0].strip(), row[1].strip()))
    if len({r[0] for r in rows}) != len(rows):
        raise ExtractorError(f"{path}: duplicate image ids in mapping")
    return rows


def _resnet_trunk(weights_state: dict | None, seed: int | None) -> torch.nn.Module:
    if seed is not None:
        torch.manual_seed(seed)
    model = models.resnet50(weights=None)
    if weights_state is not None:
        missing, unexpected = model.load_state_dict(weights_state, strict=False)
        missing = [k for k in missing if not k.startswith("fc.")]
        if missing:
            raise ExtractorError(f"checkpoint missing backbone keys: {missing[:5]}")
    model.fc = torch.nn.Identity()
    return model


def _load_moco_state(path: str) -> dict:
    checkpoint = torch.load(path, map_location="cpu", weights_only=True)
    state = checkpoint.get("state_dict", checkpoint)
    cleaned = {}
    for key, value in state.items():
        for prefix in ("module.encoder_q.", "encoder_q.", "module.base_encoder.",
                       "base_encoder.", "module."):
            if key.startswith(prefix):
                key = key[len(prefix):]
                break
        if key.startswith("fc.") or key.startswith("head."):
            continue
        cleaned[key] = value
    return cleaned


def build_encoder(config: ExtractorConfig):
    """Return (module, transform). The module maps a batch to pooled features."""
    if config.backbone == "none":
        return _resnet_trunk(None, config.seed), _IMAGENET_TRANSFORM
    if config.backbone == "imagenet":
        if config.weights:
            state = torch.load(config.weights, map_location="cpu",
                               weights_only=True)
            return _resnet_trunk(state, None), _IMAGENET_TRANSFORM
        try:
            model = models.resnet50(weights=models.ResNet50_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise ExtractorError(
                f"could not obtain ImageNet weights ({exc}); pass --weights"
            ) from exc
        model.fc = torch.nn.Identity()
        return model, _IMAGENET_TRANSFORM
    if config.backbone == "moco":
        if not config.weights:
            raise ExtractorError("backbone 'moco' requires --weights <checkpoint>")
        return _resnet_trunk(_load_moco_state(config.weights), None), _IMAGENET_TRANSFORM
    # clip: vision tower only, text encoder discarded
    try:
        from transformers import CLIPVisionModelWithProjection
    except ImportError as exc:
        raise ExtractorError(
            "backbone 'clip' requires the transformers package"
        ) from exc
    source = config.weights or "openai/clip-vit-base-patch32"
    try:
        clip = CLIPVisionModelWithProjection.from_pretrained(source)
    except Exception as exc:
        raise ExtractorError(
            f"could not load CLIP vision weights from {source!r}: {exc}"
        ) from exc

    class ClipTower(torch.nn.Module):
        def __init__(self, inner):
            super().__init__()
            self.inner = inner

        def forward(self, batch):
            return self.inner(pixel_values=batch).image_embeds

    return ClipTower(clip), _CLIP_TRANSFORM


@dataclass
class ExtractResult:
    n_written: int
    n_skipped: int
    dim: int


def extract(config: ExtractorConfig, out_path: str | Path) -> ExtractResult:
    """Embed every mapped image and write one .cemb file.

    Unreadable images are skipped, logged and counted. The output file is
    written once at the end; no partial file is left on failure.
    """
    mapping = read_id_mapping(config.id_mapping)
    encoder, transform = build_encoder(config)
    encoder.eval()

    # Load and preprocess; collect failures without aborting the run.
    tensors: list[torch.Tensor] = []
    ids: list[str] = []
    n_skipped = 0
    for image_id, rel_path in mapping:
        path = config.image_dir / rel_path
        try:
            with Image.open(path) as img:
                tensor = transform(img.convert("RGB"))
        except (OSError, ValueError) as exc:
            log.warning("skipping unreadable image %s (%s): %s",
                        image_id, path, exc)
            n_skipped += 1
            continue
        ids.append(image_id)
        tensors.append(tensor)

    vectors: dict[str, np.ndarray] = {}
    dim = 0
    with torch.no_grad():
        for start in range(0, len(tensors), config.batch_size):
            batch = torch.stack(tensors[start:start + config.batch_size])
            features = encoder(batch)
            if features.ndim != 2:
                features = features.reshape(features.shape[0], -1)
            dim = int(features.shape[1])
            for offset, image_id in enumerate(
                ids[start:start + config.batch_size]
            ):
                vectors[image_id] = features[offset].numpy().astype(np.float32)

    write_store(vectors, config.backbone, out_path)
    log.info("wrote %s: %d records (dim %d), %d skipped",
             out_path, len(vectors), dim, n_skipped)
    return ExtractResult(n_written=len(vectors), n_skipped=n_skipped, dim=dim)
