"""Federated-learning substrate: synthetic imaging data, non-IID shards, a small MLP and FedAvg."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.special import log_softmax

from .rng import Rng

LAYERS = (784, 128, 64, 4)
N_PARAMS = 108_996
# He-uniform bound sqrt(6 / fan_in) for ReLU layers
INIT_GAIN = 6.0 ** 0.5
DATASET_MAGIC = b"ZKDS"
DATASET_VERSION = 1


# -- data -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: bytes = b""

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def train(self):
        return self.features[self.train_idx], self.labels[self.train_idx]

    def test(self):
        return self.features[self.test_idx], self.labels[self.test_idx]

    def to_bytes(self) -> bytes:
        n, f = self.features.shape
        head = DATASET_MAGIC + struct.pack("<HIII", DATASET_VERSION, n, f, len(self.train_idx))
        seed = self.seed.ljust(32, b"\0")[:32]
        return b"".join([
            head, seed,
            self.features.astype("<f8").tobytes(),
            self.labels.astype("<u1").tobytes(),
            self.train_idx.astype("<u4").tobytes(),
            self.test_idx.astype("<u4").tobytes(),
        ])

    @classmethod
    def from_bytes(cls, data: bytes) -> "Dataset":
        if not data.startswith(DATASET_MAGIC):
            raise ValueError("not a dataset file")
        pos = len(DATASET_MAGIC)
        version, n, f, n_train = struct.unpack_from("<HIII", data, pos)
        if version != DATASET_VERSION:
            raise ValueError(f"unsupported dataset version {version}")
        pos += struct.calcsize("<HIII")
        seed = data[pos:pos + 32]
        pos += 32
        expect = pos + 8 * n * f + n + 4 * n
        if len(data) != expect:
            raise ValueError(f"expected {expect} bytes, got {len(data)}")
        X = np.frombuffer(data, "<f8", n * f, pos).reshape(n, f).copy()
        pos += 8 * n * f
        y = np.frombuffer(data, "<u1", n, pos).astype(np.int64)
        pos += n
        idx = np.frombuffer(data, "<u4", n, pos).astype(np.int64)
        return cls(X, y, idx[:n_train], idx[n_train:], seed)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Dataset":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _smooth_field(gen: np.random.Generator, count: int, side: int, sigma: float) -> np.ndarray:
    """``count`` white-noise images smoothed by a 2-D Gaussian kernel, rescaled to unit pixel variance."""
    raw = gen.standard_normal((count, side, side))
    sm = gaussian_filter(raw, sigma=(0, sigma, sigma), mode="wrap")
    sm /= sm.std(axis=(1, 2), keepdims=True)
    return sm.reshape(count, side * side)


def generate_dataset(seed=0, n_samples: int = 1000, n_classes: int = 4, side: int = 28,
                     mean_scale: float = 8.0, noise_scale: float = 4.0,
                     mean_smoothing: float = 3.0, noise_smoothing: float = 1.5,
                     test_fraction: float = 0.2) -> Dataset:
    """Class-conditional Gaussian images with spatially smooth means and correlated noise.

    Each class mean is a smoothed random field of amplitude ``mean_scale``;
    samples add an independent smoothed noise field of amplitude
    ``noise_scale``.  The split is stratified by class.
    """
    rng = Rng(seed)
    gen = rng.spawn("dataset").numpy_generator()
    means = mean_scale * _smooth_field(gen, n_classes, side, mean_smoothing)
    labels = gen.integers(0, n_classes, size=n_samples)
    noise = noise_scale * _smooth_field(gen, n_samples, side, noise_smoothing)
    X = means[labels] + noise

    train, test = [], []
    for k in range(n_classes):
        idx = np.flatnonzero(labels == k)
        gen.shuffle(idx)
        n_test = int(round(test_fraction * len(idx)))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return Dataset(X, labels.astype(np.int64), np.sort(np.concatenate(train)),
                   np.sort(np.concatenate(test)), rng.seed)


@dataclass(frozen=True)
class ClientShard:
    client_id: int
    indices: np.ndarray = field(compare=False)


def partition_dirichlet(dataset: Dataset, n_clients: int = 5, alpha: float = 0.5, seed=0,
                        max_tries: int = 1000) -> list[ClientShard]:
    """Split the training set so each class is spread over clients by Dirichlet(alpha) proportions."""
    if n_clients < 1:
        raise ValueError("need at least one client")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    gen = Rng(seed).spawn("partition").numpy_generator()
    train = dataset.train_idx
    y = dataset.labels[train]
    if len(train) < n_clients:
        raise ValueError("fewer training samples than clients")
    for _ in range(max_tries):
        parts = [[] for _ in range(n_clients)]
        for k in np.unique(y):
            idx = train[y == k].copy()
            gen.shuffle(idx)
            p = gen.dirichlet(np.full(n_clients, alpha))
            cuts = (np.cumsum(p)[:-1] * len(idx)).round().astype(int)
            for i, chunk in enumerate(np.split(idx, cuts)):
                parts[i].append(chunk)
        shards = [np.sort(np.concatenate(p)) for p in parts]
        # degenerate draw: some client got nothing, resample
        if all(len(s) for s in shards):
            return [ClientShard(i + 1, s) for i, s in enumerate(shards)]
    raise RuntimeError("could not draw a partition with non-empty shards")


# -- model ------------------------------------------------------------------


def _layer_shapes(layers: Sequence[int]):
    return [((a, b), (b,)) for a, b in zip(layers[:-1], layers[1:])]


def param_count(layers: Sequence[int] = LAYERS) -> int:
    return sum(a * b + b for a, b in zip(layers[:-1], layers[1:]))


class MlpModel:
    """ReLU MLP with a softmax output; parameters live in one flat float64 vector.

    Flat order is ``W1, b1, W2, b2, W3, b3`` with each ``W`` stored
    (fan_in, fan_out) row-major.
    """

    def __init__(self, params: np.ndarray, layers: Sequence[int] = LAYERS):
        self.layers = tuple(layers)
        params = np.array(params, dtype=np.float64)
        if params.shape != (param_count(self.layers),):
            raise ValueError(f"expected {param_count(self.layers)} parameters, got {params.shape}")
        if self.layers == LAYERS:
            assert len(params) == N_PARAMS
        params.setflags(write=False)
        self.params = params

    @classmethod
    def init(cls, rng: Rng, layers: Sequence[int] = LAYERS, gain: float = INIT_GAIN) -> "MlpModel":
        """Uniform(-gain / sqrt(fan_in), gain / sqrt(fan_in)) weights and biases."""
        gen = rng.numpy_generator()
        chunks = []
        for (wshape, bshape) in _layer_shapes(layers):
            bound = gain / np.sqrt(wshape[0])
            chunks.append(gen.uniform(-bound, bound, size=wshape).ravel())
            chunks.append(gen.uniform(-bound, bound, size=bshape))
        return cls(np.concatenate(chunks), layers)

    @property
    def n_params(self) -> int:
        return len(self.params)

    def unpack(self, flat: np.ndarray | None = None):
        flat = self.params if flat is None else flat
        out, pos = [], 0
        for wshape, bshape in _layer_shapes(self.layers):
            size = wshape[0] * wshape[1]
            out.append((flat[pos:pos + size].reshape(wshape), flat[pos + size:pos + size + bshape[0]]))
            pos += size + bshape[0]
        return out

    def logits(self, X: np.ndarray) -> np.ndarray:
        h = X
        layers = self.unpack()
        for i, (W, b) in enumerate(layers):
            h = h @ W + b
            if i < len(layers) - 1:
                h = np.maximum(h, 0.0)
        return h

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.logits(X).argmax(axis=1)

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        lp = log_softmax(self.logits(X), axis=1)
        return float(-lp[np.arange(len(y)), y].mean())

    def loss_and_grad(self, X: np.ndarray, y: np.ndarray, params: np.ndarray | None = None):
        """Mean cross-entropy and its gradient with respect to the flat parameters."""
        layers = self.unpack(params)
        acts = [X]
        h = X
        for i, (W, b) in enumerate(layers):
            h = h @ W + b
            if i < len(layers) - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        lp = log_softmax(h, axis=1)
        n = len(y)
        loss = float(-lp[np.arange(n), y].mean())

        delta = np.exp(lp)
        delta[np.arange(n), y] -= 1.0
        delta /= n
        grads = []
        for i in range(len(layers) - 1, -1, -1):
            W, _ = layers[i]
            grads.append((acts[i].T @ delta, delta.sum(axis=0)))
            if i:
                delta = (delta @ W.T) * (acts[i] > 0)
        grads.reverse()
        return loss, np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])

    def with_params(self, params: np.ndarray) -> "MlpModel":
        return MlpModel(params, self.layers)


@dataclass(frozen=True, eq=False)
class GradientUpdate:
    delta: np.ndarray
    client_id: int = 0
    round: int = 0

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.delta))


def local_sgd(model: MlpModel, dataset: Dataset, shard: ClientShard, rng: np.random.Generator,
              epochs: int = 3, lr: float = 0.01, batch: int = 32, round: int = 0) -> GradientUpdate:
    """Run mini-batch SGD on the shard and return ``w_after - w_before``; ``model`` is untouched."""
    if len(shard.indices) == 0:
        raise ValueError(f"client {shard.client_id} has an empty shard")
    X = dataset.features[shard.indices]
    y = dataset.labels[shard.indices]
    w = model.params.copy()
    for _ in range(epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), batch):
            sel = order[start:start + batch]
            _, g = model.loss_and_grad(X[sel], y[sel], w)
            w -= lr * g
    return GradientUpdate(w - model.params, shard.client_id, round)


def apply_update(model: MlpModel, delta, eta: float = 1.0) -> MlpModel:
    d = delta.delta if isinstance(delta, GradientUpdate) else np.asarray(delta, dtype=np.float64)
    if d.shape != model.params.shape:
        raise ValueError(f"update length {d.shape} does not match model {model.params.shape}")
    return model.with_params(model.params + eta * d)


def fedavg(updates: Sequence) -> np.ndarray:
    """Unweighted mean of client deltas."""
    if not updates:
        raise ValueError("nothing to average")
    stack = [u.delta if isinstance(u, GradientUpdate) else np.asarray(u, dtype=np.float64) for u in updates]
    return np.mean(stack, axis=0)


def evaluate(model: MlpModel, dataset: Dataset, split: str = "test") -> tuple[float, float]:
    X, y = dataset.test() if split == "test" else dataset.train()
    logits = model.logits(X)
    lp = log_softmax(logits, axis=1)
    acc = float((logits.argmax(axis=1) == y).mean())
    return acc, float(-lp[np.arange(len(y)), y].mean())
