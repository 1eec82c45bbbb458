"""Trajectory auto-encoder with hand-written backpropagation.

Two architectures share one interface:

* ``mlp``  -- flattened trajectory -> tanh hidden -> linear latent, mirrored decoder.
* ``lstm`` -- single-layer LSTM over time, last hidden state -> linear latent;
  the decoder feeds the latent at every step into a second LSTM and maps
  each hidden state back to an observation.

Parameters live in one flat float64 vector so optimisers and finite
difference checks can treat the model as ``f(theta)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def param_layout(arch: dict) -> list[tuple[str, tuple]]:
    t, d = arch["input_shape"]
    h = arch["latent_dim"]
    k = arch["hidden"]
    if arch["kind"] == "mlp":
        n_in = t * d
        return [
            ("enc_w1", (n_in, k)), ("enc_b1", (k,)),
            ("enc_w2", (k, h)), ("enc_b2", (h,)),
            ("dec_w1", (h, k)), ("dec_b1", (k,)),
            ("dec_w2", (k, n_in)), ("dec_b2", (n_in,)),
        ]
    if arch["kind"] == "lstm":
        return [
            ("enc_wx", (d, 4 * k)), ("enc_wh", (k, 4 * k)), ("enc_b", (4 * k,)),
            ("enc_wz", (k, h)), ("enc_bz", (h,)),
            ("dec_wx", (h, 4 * k)), ("dec_wh", (k, 4 * k)), ("dec_b", (4 * k,)),
            ("dec_wo", (k, d)), ("dec_bo", (d,)),
        ]
    raise ValueError(f"unknown encoder kind {arch['kind']!r}")


def _views(arch, theta):
    out = {}
    off = 0
    for name, shape in param_layout(arch):
        n = int(np.prod(shape))
        out[name] = theta[off : off + n].reshape(shape)
        off += n
    return out


def n_params(arch: dict) -> int:
    return sum(int(np.prod(s)) for _, s in param_layout(arch))


# ------------------------------------------------------------------ LSTM


def _lstm_forward(x, wx, wh, b):
    """x: (n, T, d_in) -> hidden states (n, T, k) plus cache."""
    n, t_len, _ = x.shape
    k = wh.shape[0]
    h = np.zeros((n, k))
    c = np.zeros((n, k))
    hs = np.empty((n, t_len, k))
    cache = []
    for t in range(t_len):
        a = x[:, t] @ wx + h @ wh + b
        i = _sigmoid(a[:, :k])
        f = _sigmoid(a[:, k : 2 * k])
        o = _sigmoid(a[:, 2 * k : 3 * k])
        g = np.tanh(a[:, 3 * k :])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[:, t] = h
        cache.append((i, f, o, g, c_prev, h_prev, tc))
    return hs, cache


def _lstm_backward(x, wx, wh, cache, dhs):
    """Backprop through time; dhs: (n, T, k) upstream grads on every hidden state."""
    n, t_len, _ = x.shape
    k = wh.shape[0]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * k)
    dx = np.zeros_like(x)
    dh_next = np.zeros((n, k))
    dc_next = np.zeros((n, k))
    for t in reversed(range(t_len)):
        i, f, o, g, c_prev, h_prev, tc = cache[t]
        dh = dhs[:, t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc_next = dc * f
        da = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=1
        )
        dwx += x[:, t].T @ da
        dwh += h_prev.T @ da
        db += da.sum(axis=0)
        dx[:, t] = da @ wx.T
        dh_next = da @ wh.T
    return dwx, dwh, db, dx


# ----------------------------------------------------------------- model


@dataclass
class EncoderModel:
    arch: dict
    params: np.ndarray

    @classmethod
    def create(cls, input_shape, latent_dim: int = 10, hidden: int = 64, kind: str = "mlp",
               rng: np.random.Generator | None = None) -> "EncoderModel":
        rng = rng if rng is not None else np.random.default_rng(0)
        arch = {
            "kind": kind,
            "input_shape": [int(input_shape[0]), int(input_shape[1])],
            "latent_dim": int(latent_dim),
            "hidden": int(hidden),
        }
        chunks = []
        k = arch["hidden"]
        for name, shape in param_layout(arch):
            if len(shape) == 2:
                lim = np.sqrt(6.0 / (shape[0] + shape[1]))
                chunks.append(rng.uniform(-lim, lim, shape).ravel())
            elif name in ("enc_b", "dec_b"):
                b = np.zeros(shape)
                b[k : 2 * k] = 1.0  # forget-gate bias
                chunks.append(b)
            else:
                chunks.append(np.zeros(shape))
        return cls(arch, np.concatenate(chunks))

    @property
    def latent_dim(self) -> int:
        return self.arch["latent_dim"]

    @property
    def input_shape(self) -> tuple:
        return tuple(self.arch["input_shape"])

    def copy(self) -> "EncoderModel":
        return EncoderModel(dict(self.arch), self.params.copy())

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 2
        if single:
            x = x[None]
        if x.ndim != 3 or x.shape[1:] != self.input_shape:
            raise ValueError(f"trajectory shape {x.shape[-2:]} != encoder input {self.input_shape}")
        return x, single

    # forward passes return (output, cache); backward passes consume the cache

    def _encode(self, theta, x):
        p = _views(self.arch, theta)
        if self.arch["kind"] == "mlp":
            flat = x.reshape(len(x), -1)
            a = np.tanh(flat @ p["enc_w1"] + p["enc_b1"])
            z = a @ p["enc_w2"] + p["enc_b2"]
            return z, (flat, a)
        hs, lc = _lstm_forward(x, p["enc_wx"], p["enc_wh"], p["enc_b"])
        z = hs[:, -1] @ p["enc_wz"] + p["enc_bz"]
        return z, (x, hs, lc)

    def _encode_backward(self, theta, cache, dz, grad):
        p = _views(self.arch, theta)
        g = _views(self.arch, grad)
        if self.arch["kind"] == "mlp":
            flat, a = cache
            g["enc_w2"] += a.T @ dz
            g["enc_b2"] += dz.sum(axis=0)
            da = (dz @ p["enc_w2"].T) * (1 - a * a)
            g["enc_w1"] += flat.T @ da
            g["enc_b1"] += da.sum(axis=0)
            return
        x, hs, lc = cache
        g["enc_wz"] += hs[:, -1].T @ dz
        g["enc_bz"] += dz.sum(axis=0)
        dhs = np.zeros_like(hs)
        dhs[:, -1] = dz @ p["enc_wz"].T
        dwx, dwh, db, _ = _lstm_backward(x, p["enc_wx"], p["enc_wh"], lc, dhs)
        g["enc_wx"] += dwx
        g["enc_wh"] += dwh
        g["enc_b"] += db

    def _decode(self, theta, z):
        p = _views(self.arch, theta)
        t, d = self.input_shape
        if self.arch["kind"] == "mlp":
            a = np.tanh(z @ p["dec_w1"] + p["dec_b1"])
            out = a @ p["dec_w2"] + p["dec_b2"]
            return out.reshape(len(z), t, d), (z, a)
        zin = np.repeat(z[:, None, :], t, axis=1)
        hs, lc = _lstm_forward(zin, p["dec_wx"], p["dec_wh"], p["dec_b"])
        out = hs @ p["dec_wo"] + p["dec_bo"]
        return out, (zin, hs, lc)

    def _decode_backward(self, theta, cache, dout, grad):
        """Accumulate decoder grads into ``grad``; returns dL/dz."""
        p = _views(self.arch, theta)
        g = _views(self.arch, grad)
        n = len(dout)
        if self.arch["kind"] == "mlp":
            z, a = cache
            dflat = dout.reshape(n, -1)
            g["dec_w2"] += a.T @ dflat
            g["dec_b2"] += dflat.sum(axis=0)
            da = (dflat @ p["dec_w2"].T) * (1 - a * a)
            g["dec_w1"] += z.T @ da
            g["dec_b1"] += da.sum(axis=0)
            return da @ p["dec_w1"].T
        zin, hs, lc = cache
        k = hs.shape[2]
        g["dec_wo"] += hs.reshape(-1, k).T @ dout.reshape(-1, dout.shape[2])
        g["dec_bo"] += dout.sum(axis=(0, 1))
        dhs = dout @ p["dec_wo"].T
        dwx, dwh, db, dzin = _lstm_backward(zin, p["dec_wx"], p["dec_wh"], lc, dhs)
        g["dec_wx"] += dwx
        g["dec_wh"] += dwh
        g["dec_b"] += db
        return dzin.sum(axis=1)

    # public API

    def encode(self, trajectories) -> np.ndarray:
        x, single = self._check(trajectories)
        z, _ = self._encode(self.params, x)
        return z[0] if single else z

    def reconstruct(self, trajectories) -> np.ndarray:
        x, single = self._check(trajectories)
        z, _ = self._encode(self.params, x)
        out, _ = self._decode(self.params, z)
        return out[0] if single else out

    # checkpoint

    def save(self, path) -> None:
        with open(Path(path), "wb") as fh:
            np.savez(
                fh,
                version=np.array(CHECKPOINT_VERSION),
                arch=np.array(json.dumps(self.arch)),
                params=self.params,
            )

    @classmethod
    def load(cls, path) -> "EncoderModel":
        with np.load(Path(path)) as z:
            version = int(z["version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            arch = json.loads(str(z["arch"]))
            params = z["params"].copy()
        if len(params) != n_params(arch):
            raise ValueError("checkpoint parameter count does not match its architecture")
        return cls(arch, params)


def encode(model: EncoderModel, trajectory) -> np.ndarray:
    return model.encode(trajectory)
