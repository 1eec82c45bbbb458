"""Latent-space structure metrics and a labelled synthetic trajectory set."""

from __future__ import annotations

import numpy as np
from sklearn.metrics import silhouette_score

from .model import EncoderModel


def silhouette(features, labels) -> float:
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    uniq, counts = np.unique(labels, return_counts=True)
    if len(uniq) < 2 or counts.min() < 2:
        raise ValueError("silhouette needs >= 2 labels with >= 2 samples each")
    if np.ptp(features, axis=0).max() == 0.0:
        return 0.0
    return float(silhouette_score(features, labels, metric="euclidean"))


def latent_diagnostics(model: EncoderModel, trajectories, labels) -> dict:
    """Silhouette of the encoded trajectories under ``labels`` and, per label,
    the mean distance of its members to their centroid."""
    z = model.encode(np.asarray(trajectories))
    labels = np.asarray(labels)
    spread = {}
    for lab in np.unique(labels):
        zl = z[labels == lab]
        spread[lab.item() if hasattr(lab, "item") else lab] = float(
            np.linalg.norm(zl - zl.mean(axis=0), axis=1).mean()
        )
    return {"silhouette": silhouette(z, labels), "spread": spread}


def clustered_trajectories(rng: np.random.Generator, n_clusters: int = 4, per_cluster: int = 64,
                           shape=(50, 5), signal: float = 0.15, nuisance: float = 0.35,
                           noise: float = 0.02):
    """Trajectories whose fitness cluster is carried by a small per-cluster
    signature, buried under larger cluster-independent smooth variation.

    Returns ``(trajectories, fitness, labels)``; fitness of cluster ``c`` is
    ``-c`` plus a little jitter.
    """
    t_len, dims = shape
    time = np.linspace(0.0, 1.0, t_len)[:, None]

    def smooth_curves(n, amplitude):
        freq = rng.uniform(0.5, 2.0, (n, 1, dims))
        phase = rng.uniform(0.0, 2 * np.pi, (n, 1, dims))
        return amplitude * np.sin(2 * np.pi * freq * time[None] + phase)

    prototypes = smooth_curves(n_clusters, signal)
    labels = np.repeat(np.arange(n_clusters), per_cluster)
    x = (
        0.5
        + prototypes[labels]
        + smooth_curves(len(labels), nuisance)
        + noise * rng.standard_normal((len(labels), t_len, dims))
    )
    fitness = -labels.astype(float) + 0.05 * rng.standard_normal(len(labels))
    return x, fitness, labels
