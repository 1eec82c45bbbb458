"""Reconstruction and triplet objectives, triplet mining and the adaptive margin."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import pairwise_distances
from .model import EncoderModel

MARGIN_FLOOR = 1e-6


def _hinge_terms(za, zp, zn, margin):
    dap = np.sqrt(np.sum((za - zp) ** 2, axis=1))
    dan = np.sqrt(np.sum((za - zn) ** 2, axis=1))
    return dap, dan, np.maximum(dap - dan + margin, 0.0)


def triplet_hinge(d_ap, d_an, margin: float) -> np.ndarray:
    """Per-triplet hinge ``max(d(a,p) - d(a,n) + m, 0)`` from precomputed distances."""
    if not margin > 0:
        raise ValueError("triplet margin must be positive")
    return np.maximum(np.asarray(d_ap) - np.asarray(d_an) + margin, 0.0)


def triplet_loss(model: EncoderModel, anchors, positives, negatives, margin: float) -> float:
    """Summed triplet hinge over a batch of (anchor, positive, negative) trajectories."""
    if not margin > 0:
        raise ValueError("triplet margin must be positive")
    za = model.encode(anchors)
    zp = model.encode(positives)
    zn = model.encode(negatives)
    return float(_hinge_terms(np.atleast_2d(za), np.atleast_2d(zp), np.atleast_2d(zn), margin)[2].sum())


def mse_loss_and_grad(model: EncoderModel, x: np.ndarray, theta: np.ndarray | None = None):
    """Mean squared reconstruction error over every trajectory entry, and its gradient."""
    theta = model.params if theta is None else theta
    z, ecache = model._encode(theta, x)
    out, dcache = model._decode(theta, z)
    diff = out - x
    loss = float(np.mean(diff * diff))
    grad = np.zeros_like(theta)
    dz = model._decode_backward(theta, dcache, 2.0 * diff / diff.size, grad)
    model._encode_backward(theta, ecache, dz, grad)
    return loss, grad


def triplet_loss_and_grad(model: EncoderModel, anchors, positives, negatives, margin: float,
                          theta: np.ndarray | None = None):
    """Batch-mean triplet hinge and its gradient.

    The three roles are encoded in one pass; the decoder receives no gradient.
    """
    theta = model.params if theta is None else theta
    n = len(anchors)
    x = np.concatenate([anchors, positives, negatives])
    z, cache = model._encode(theta, x)
    za, zp, zn = z[:n], z[n : 2 * n], z[2 * n :]
    dap, dan, hinge = _hinge_terms(za, zp, zn, margin)
    loss = float(hinge.mean())
    active = (hinge > 0).astype(float)[:, None] / n
    u_ap = np.divide(za - zp, dap[:, None], out=np.zeros_like(za), where=dap[:, None] > 0)
    u_an = np.divide(za - zn, dan[:, None], out=np.zeros_like(za), where=dan[:, None] > 0)
    dz = np.concatenate([active * (u_ap - u_an), -active * u_ap, active * u_an])
    grad = np.zeros_like(theta)
    model._encode_backward(theta, cache, dz, grad)
    return loss, grad


# ---------------------------------------------------------------- mining


@dataclass
class TripletSet:
    """Index triples into a repertoire, one per anchor."""

    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray

    def __len__(self):
        return len(self.anchor)

    def gather(self, trajectories: np.ndarray):
        return trajectories[self.anchor], trajectories[self.positive], trajectories[self.negative]


def mine_triplets(fitness, rng: np.random.Generator) -> TripletSet:
    """Every member is an anchor once; from two other members drawn at random,
    the one closer in fitness is the positive (the first drawn on ties)."""
    f = np.asarray(fitness, dtype=float)
    n = len(f)
    if n < 3:
        raise ValueError("triplet mining needs at least 3 solutions")
    anchors = np.arange(n)
    # two distinct draws among the n-1 non-anchors, then skip over the anchor
    first = rng.integers(0, n - 1, n)
    second = rng.integers(0, n - 2, n)
    second = second + (second >= first)
    first = first + (first >= anchors)
    second = second + (second >= anchors)
    closer_first = np.abs(f[first] - f) <= np.abs(f[second] - f)
    pos = np.where(closer_first, first, second)
    neg = np.where(closer_first, second, first)
    return TripletSet(anchors, pos, neg)


def adaptive_margin(features, latent_dim: int | None = None, scaled: bool = True,
                    floor: float = MARGIN_FLOOR) -> float:
    """Smallest pairwise feature distance, times ``latent_dim`` when ``scaled``."""
    feats = np.asarray(features, dtype=float)
    if len(feats) < 2:
        raise ValueError("adaptive margin needs at least 2 solutions")
    d = pairwise_distances(feats)
    d_min = float(d[np.triu_indices(len(feats), k=1)].min())
    if d_min <= 0.0:
        return floor
    if scaled:
        latent_dim = feats.shape[1] if latent_dim is None else latent_dim
        return latent_dim * d_min
    return d_min
