from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PolicyNet:
    """Fully connected tanh controller whose weights live in a flat genotype.

    Each layer contributes ``n_in * n_out`` weights (row-major, input-major)
    followed by ``n_out`` biases.
    """

    layer_sizes: tuple = (5, 5, 2)

    def __post_init__(self):
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"bad layer sizes {self.layer_sizes}")

    @property
    def n_params(self) -> int:
        s = self.layer_sizes
        return sum(s[i] * s[i + 1] + s[i + 1] for i in range(len(s) - 1))

    @property
    def sizes_array(self) -> np.ndarray:
        return np.asarray(self.layer_sizes, dtype=np.int64)

    def unpack(self, params):
        params = np.asarray(params, dtype=float)
        if params.shape[-1] != self.n_params:
            raise ValueError(f"genotype has {params.shape[-1]} entries, policy needs {self.n_params}")
        layers = []
        off = 0
        s = self.layer_sizes
        for i in range(len(s) - 1):
            w = params[..., off : off + s[i] * s[i + 1]].reshape(*params.shape[:-1], s[i], s[i + 1])
            off += s[i] * s[i + 1]
            b = params[..., off : off + s[i + 1]]
            off += s[i + 1]
            layers.append((w, b))
        return layers

    def forward(self, params, obs) -> np.ndarray:
        h = np.asarray(obs, dtype=float)
        for w, b in self.unpack(params):
            h = np.tanh(h @ w + b)
        return h
