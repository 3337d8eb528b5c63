"""Prediction fusion: gated inverse-depth blend, median-normalized mean,
weighted and class-routed averages, and horizontal-flip merging.

Every fuser returns a map valid on the intersection of its inputs' masks.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .core import (
    DegenerateInputError,
    DepthMap,
    DimensionMismatchError,
    DisparityMap,
    EmptyOverlapError,
    InvalidInputError,
    UnknownLabelError,
    check_same_shape,
)

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class GatedParams:
    alpha: float = 2.0 / 3.0
    beta: float = 1.0 / 3.0
    eta: float = 0.45

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise InvalidInputError("alpha and beta must be nonnegative")
        if abs(self.alpha + self.beta - 1.0) > WEIGHT_TOL:
            raise InvalidInputError("alpha + beta must equal 1")
        if not self.eta > 0:
            raise InvalidInputError("eta must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "GatedParams":
        return cls(**{k: float(v) for k, v in d.items() if k in ("alpha", "beta", "eta")})


def _joint_valid(maps) -> np.ndarray:
    check_same_shape(*maps)
    valid = np.logical_and.reduce([m.valid for m in maps])
    if not valid.any():
        raise EmptyOverlapError("inputs share no valid pixel")
    return valid


def gated_fuse(d1: DepthMap, d2: DepthMap, p: GatedParams | None = None, per_image: bool = False) -> DepthMap:
    """Harmonic blend of two depths where their inverse depths agree, else ``d2``.

    The relative inverse-depth gap |1/D1 - 1/D2| / (1/D2) equals |D2/D1 - 1|,
    and with beta = 1 - alpha the blend 1/(alpha/D1 + beta/D2) equals
    D2 / (1 + alpha * (D2/D1 - 1)); this form returns D2 exactly when D1 == D2.
    A gap of exactly ``eta`` selects ``d2``. With ``per_image`` the gate uses
    the mean gap over all co-valid pixels and applies to the whole map.
    """
    p = p or GatedParams()
    valid = _joint_valid([d1, d2])
    a = np.where(valid, d1.values, 1.0)
    b = np.where(valid, d2.values, 1.0)
    r = b / a
    gap = np.abs(r - 1.0)
    blended = b / (1.0 + p.alpha * (r - 1.0))
    # a harmonic blend lies between its arguments; the clip removes last-ulp overshoot
    blended = np.clip(blended, np.minimum(a, b), np.maximum(a, b))
    if per_image:
        use_blend = np.full(valid.shape, gap[valid].mean() < p.eta)
    else:
        use_blend = gap < p.eta
    out = np.where(use_blend, blended, b)
    return DepthMap(np.where(valid, out, 0.0), valid)


def _ordered_sum(stack: np.ndarray) -> np.ndarray:
    # summing per-pixel sorted terms makes the result independent of input order
    return np.sort(stack, axis=0).sum(axis=0)


def median_fuse(maps) -> DepthMap:
    """Mean of the maps after dividing each by its own median over valid pixels."""
    maps = list(maps)
    if not maps:
        raise InvalidInputError("need at least one map")
    valid = _joint_valid(maps)
    normed = []
    for m in maps:
        med = np.median(m.values[m.valid])
        if not med > 0:
            raise DegenerateInputError("map has zero median")
        normed.append(np.where(valid, m.values, 1.0) / med)
    out = _ordered_sum(np.stack(normed)) / len(maps)
    return DepthMap(np.where(valid, out, 0.0), valid)


def _check_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size != n:
        raise DimensionMismatchError(f"{w.size} weights for {n} maps")
    if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise InvalidInputError("weights must be nonnegative and sum to 1")
    return w


def weighted_fuse(maps, weights) -> DepthMap:
    """Pixelwise sum of w_i * D_i for convex weights."""
    maps = list(maps)
    if not maps:
        raise InvalidInputError("need at least one map")
    w = _check_weights(weights, len(maps))
    valid = _joint_valid(maps)
    terms = np.stack([wi * np.where(valid, m.values, 0.0) for wi, m in zip(w, maps)])
    out = _ordered_sum(terms)
    if not np.all(out[valid] > 0):
        raise DegenerateInputError("fused depth is not positive everywhere")
    return DepthMap(np.where(valid, out, 0.0), valid)


@dataclass(frozen=True)
class RoutingTable:
    """Class label -> convex weight vector over the ensemble's models."""

    weights: dict

    def __post_init__(self):
        table = {}
        n = None
        for label, w in dict(self.weights).items():
            w = tuple(float(x) for x in w)
            if n is None:
                n = len(w)
            elif len(w) != n:
                raise InvalidInputError("all weight vectors must have the same length")
            _check_weights(w, len(w))
            table[str(label)] = w
        if not table:
            raise InvalidInputError("routing table is empty")
        object.__setattr__(self, "weights", table)

    def __getitem__(self, label: str) -> tuple:
        try:
            return self.weights[label]
        except KeyError:
            raise UnknownLabelError(label) from None

    @classmethod
    def from_json(cls, path) -> "RoutingTable":
        with open(path) as fh:
            return cls(json.load(fh))


def routed_fuse(maps, label: str, table: RoutingTable) -> DepthMap:
    return weighted_fuse(maps, table[label])


def read_label_csv(path) -> dict:
    """Two-column CSV (filename, class) -> dict; a header row is optional."""
    labels = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if len(row) < 2:
                raise InvalidInputError(f"{path}: malformed row {row}")
            name, label = row[0].strip(), row[1].strip()
            if (name, label) == ("filename", "class"):
                continue
            labels[name] = label
    return labels


def flip_merge(disp: DisparityMap, disp_of_flipped_input: DisparityMap) -> DisparityMap:
    """Average a disparity with the re-flipped disparity of the mirrored input."""
    check_same_shape(disp, disp_of_flipped_input)
    return DisparityMap(0.5 * (disp.values + disp_of_flipped_input.values[:, ::-1]))
