"""Declarative augmentation pipelines, canonical hashing and run manifests.

A pipeline config is JSON of the form::

    {
      "master_seed": 7,
      "stages": [
        {"op": "fda", "params": {"theta": 24, "low_freq_size": 50}},
        {"op": "sda", "params": {"n_masks": 12, "mask_len": 120}}
      ]
    }

Each file gets its own generator seeded with ``sub_seed(master_seed, filename)``;
stages draw from that generator in order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .augment_frequency import FdaConfig, MrsfConfig, apr_recombine, fda_augment, mrsf
from .augment_spatial import (
    ChainConfig,
    MixConfig,
    SdaConfig,
    augmix,
    cutflip,
    image_mix,
    l2_perturb,
    mae_mix,
    sda_mask,
)
from .core import InvalidInputError, RgbImage
from .io import read_rgb_png


def _format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise InvalidInputError("non-finite number in canonical JSON")
    return format(x, ".17g")


def canonical_json(obj) -> str:
    """Sorted keys, no whitespace, floats with 17 significant digits."""
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(json.dumps(k) + ":" + canonical_json(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise InvalidInputError(f"cannot canonicalize {type(obj).__name__}")


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


class StageContext:
    """Per-file information a stage may need besides the image and rng."""

    def __init__(self, filename: str, base_dir: str = "."):
        self.filename = filename
        self.base_dir = base_dir

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)


def _only(params: dict, allowed: set, op: str) -> dict:
    extra = set(params) - allowed
    if extra:
        raise InvalidInputError(f"stage {op!r}: unknown parameters {sorted(extra)}")
    return params


def _build_augmix(p):
    p = _only(p, {"k", "depth_range", "dirichlet_alpha", "beta_params", "op_set"}, "augmix")
    cfg = ChainConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in p.items()})
    return lambda img, rng, ctx: augmix(img, cfg, rng)


def _build_cutflip(p):
    p = _only(p, {"probability", "split_row"}, "cutflip")
    prob = float(p.get("probability", 0.5))
    split = p.get("split_row")
    if not 0.0 <= prob <= 1.0:
        raise InvalidInputError("cutflip probability must lie in [0, 1]")
    return lambda img, rng, ctx: cutflip(img, split, rng, prob)


def _build_image_mix(p):
    p = _only(p, {"other", "alpha"}, "image_mix")
    if "other" not in p:
        raise InvalidInputError("image_mix needs an 'other' image path")
    cfg = MixConfig(float(p.get("alpha", 0.3)))
    return lambda img, rng, ctx: image_mix(img, read_rgb_png(ctx.resolve(p["other"])), cfg.alpha)


def _build_mae_mix(p):
    p = _only(p, {"mask_ratio", "patch", "alpha", "reconstruction_dir"}, "mae_mix")
    ratio = float(p.get("mask_ratio", 0.5))
    patch = int(p.get("patch", 16))
    cfg = MixConfig(float(p.get("alpha", 0.3)))
    recon_dir = p.get("reconstruction_dir")

    def run(img, rng, ctx):
        recon = None
        if recon_dir is not None:
            path = os.path.join(ctx.resolve(recon_dir), ctx.filename)
            recon = lambda masked, mask: read_rgb_png(path)  # noqa: E731
        return mae_mix(img, recon, ratio, patch, cfg.alpha, rng)

    return run


def _build_sda(p):
    cfg = SdaConfig(**_only(p, {"n_masks", "mask_len"}, "sda"))
    return lambda img, rng, ctx: sda_mask(img, cfg, rng)[0]


def _build_l2(p):
    p = _only(p, {"epsilon"}, "l2_perturb")
    eps = float(p.get("epsilon", 1.0))
    if not eps > 0:
        raise InvalidInputError("epsilon must be positive")
    return lambda img, rng, ctx: l2_perturb(img, rng.standard_normal(img.data.shape), eps)


def _build_fda(p):
    cfg = FdaConfig(**_only(p, {"theta", "low_freq_size", "highfreq_mask_ratio"}, "fda"))
    return lambda img, rng, ctx: fda_augment(img, cfg, rng)


def _build_apr(p):
    p = _only(p, {"amplitude_source"}, "apr")
    source = p.get("amplitude_source")

    def run(img, rng, ctx):
        if source is None:
            amp = augmix(img, ChainConfig(), rng)
        else:
            amp = read_rgb_png(ctx.resolve(source))
        return apr_recombine(amp, img)

    return run


def _build_mrsf(p):
    p = _only(p, {"rho1", "rho2", "fda", "sda"}, "mrsf")
    cfg = MrsfConfig(
        rho1=float(p.get("rho1", 0.5)),
        rho2=float(p.get("rho2", 0.5)),
        fda=FdaConfig(**p.get("fda", {})),
        sda=SdaConfig(**p.get("sda", {})),
    )
    return lambda img, rng, ctx: mrsf(img, cfg, rng)


STAGE_BUILDERS = {
    "augmix": _build_augmix,
    "cutflip": _build_cutflip,
    "image_mix": _build_image_mix,
    "mae_mix": _build_mae_mix,
    "sda": _build_sda,
    "l2_perturb": _build_l2,
    "fda": _build_fda,
    "apr": _build_apr,
    "mrsf": _build_mrsf,
}


@dataclass(frozen=True)
class Stage:
    op: str
    params: dict
    run: object = field(repr=False, compare=False)


@dataclass(frozen=True)
class PipelineConfig:
    stages: tuple
    master_seed: int = 0
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = ".") -> "PipelineConfig":
        extra = set(d) - {"stages", "master_seed"}
        if extra:
            raise InvalidInputError(f"unknown pipeline keys {sorted(extra)}")
        stages = []
        for i, rec in enumerate(d.get("stages", [])):
            op = rec.get("op")
            if op not in STAGE_BUILDERS:
                raise InvalidInputError(f"stage {i}: unknown op {op!r}")
            params = dict(rec.get("params", {}))
            try:
                run = STAGE_BUILDERS[op](params)
            except TypeError as exc:
                raise InvalidInputError(f"stage {i} ({op}): {exc}") from exc
            stages.append(Stage(op, params, run))
        return cls(tuple(stages), int(d.get("master_seed", 0)), base_dir)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), base_dir=os.path.dirname(os.path.abspath(path)))

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "stages": [{"op": s.op, "params": s.params} for s in self.stages],
        }

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    def apply(self, image: RgbImage, rng: np.random.Generator, filename: str) -> RgbImage:
        ctx = StageContext(filename, self.base_dir)
        for stage in self.stages:
            image = stage.run(image, rng, ctx)
        return image


@dataclass
class RunManifest:
    config_hash: str
    master_seed: int
    files: dict
    started: str
    finished: str
    tool_version: str = __version__

    @property
    def corpus_digest(self) -> str:
        return config_hash({k: v["sha256"] for k, v in self.files.items()})

    def to_dict(self) -> dict:
        return {
            "tool": "rdk",
            "tool_version": self.tool_version,
            "config_hash": self.config_hash,
            "master_seed": self.master_seed,
            "corpus_digest": self.corpus_digest,
            "files": self.files,
            "started": self.started,
            "finished": self.finished,
        }
