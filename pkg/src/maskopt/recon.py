"""Small residual CNN for de-aliasing undersampled magnitude images.

The network maps a single-channel image to a single-channel residual:
depth - 1 hidden layers of 3x3 convolutions (16 channels, ReLU, zero
padded to "same"), then a linear 1x1 projection back to one channel.  The
reconstruction is the input plus the residual, so a zero-parameter network
is exactly the identity.

Forward and backward passes are written against the `_kernels` conv2d
primitives and an explicit activation tape; gradients are exact, which the
tests verify against finite differences.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

_NET_MAGIC = b"RNC1"


@dataclass
class ActivationTape:
    """Per-layer inputs and ReLU gates captured during one forward pass.

    Tapes are invalidated by parameter updates (the stamp no longer
    matches), which guards against computing gradients with stale
    activations.
    """

    stamp: int
    inputs: list = field(default_factory=list)
    relu_gates: list = field(default_factory=list)


class ReconNet:
    """Residual network with explicit parameters and manual gradients."""

    def __init__(self, depth, channels=16, seed=0):
        """He-uniform hidden layers from `seed`, zero final fusion layer, so
        a fresh network is exactly the identity map (zero residual); training
        then only ever moves away from the identity when it reduces the loss.
        `seed=None` zeroes every layer instead."""
        if depth < 2:
            raise ValueError(f"depth must be >= 2, got {depth}")
        if channels < 1:
            raise ValueError(f"channels must be >= 1, got {channels}")
        self.depth = depth
        self.channels = channels
        self._stamp = 0
        shapes = []
        c_in = 1
        for _ in range(depth - 1):
            shapes.append(((channels, c_in, 3, 3), (channels,)))
            c_in = channels
        shapes.append(((1, c_in, 1, 1), (1,)))
        rng = None if seed is None else np.random.default_rng(seed)
        self.layers = []
        for i, (w_shape, b_shape) in enumerate(shapes):
            if rng is None or i == len(shapes) - 1:
                w = np.zeros(w_shape)
            else:
                fan_in = w_shape[1] * w_shape[2] * w_shape[3]
                bound = np.sqrt(6.0 / fan_in)
                w = rng.uniform(-bound, bound, size=w_shape)
            self.layers.append([w, np.zeros(b_shape)])

    def parameters(self):
        """Live parameter arrays in a stable order: w0, b0, w1, b1, ..."""
        out = []
        for w, b in self.layers:
            out.extend([w, b])
        return out

    def set_parameters(self, arrays):
        """Replace parameters from a flat list (shapes must match)."""
        if len(arrays) != 2 * len(self.layers):
            raise ValueError("wrong number of parameter arrays")
        for i, layer in enumerate(self.layers):
            for j in range(2):
                src = np.asarray(arrays[2 * i + j], dtype=np.float64)
                if src.shape != layer[j].shape:
                    raise ValueError(f"parameter {2 * i + j} has shape {src.shape}, "
                                     f"expected {layer[j].shape}")
                layer[j] = src.copy()
        self._stamp += 1

    def mark_updated(self):
        """Invalidate existing tapes after in-place parameter updates."""
        self._stamp += 1

    def forward(self, x):
        """Residual for image x of shape (m, n).  Returns (residual, tape)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError(f"expected a 2-d image, got shape {x.shape}")
        a = np.ascontiguousarray(x[None])
        tape = ActivationTape(stamp=self._stamp)
        last = len(self.layers) - 1
        for l, (w, b) in enumerate(self.layers):
            tape.inputs.append(a)
            y = _kernels.conv2d_forward(a, w, b)
            if l < last:
                gate = y > 0.0
                tape.relu_gates.append(gate)
                y = y * gate
            a = y
        return a[0], tape

    def backward(self, tape, grad_residual):
        """Gradients from one forward pass.

        Returns (param_grads, grad_x) where param_grads matches the layout
        of `parameters()` and grad_x is the gradient at the network input.
        """
        if tape.stamp != self._stamp:
            raise ValueError("tape is stale: parameters changed since forward")
        if len(tape.inputs) != len(self.layers):
            raise ValueError("tape does not match network depth")
        g = np.ascontiguousarray(np.asarray(grad_residual, dtype=np.float64)[None])
        last = len(self.layers) - 1
        param_grads = [None] * (2 * len(self.layers))
        for l in range(last, -1, -1):
            if l < last:
                g = np.ascontiguousarray(g * tape.relu_gates[l])
            gx, gw, gb = _kernels.conv2d_backward(tape.inputs[l], self.layers[l][0], g)
            param_grads[2 * l] = gw
            param_grads[2 * l + 1] = gb
            g = gx
        return param_grads, g[0]


def euclidean_loss(a, b):
    """Half squared Frobenius distance and its gradient with respect to a."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return 0.5 * float(np.sum(diff * diff)), diff


@dataclass
class AdamState:
    """First and second moment accumulators plus the shared step count."""

    step: int
    m: list
    v: list


def adam_init(params) -> AdamState:
    return AdamState(step=0,
                     m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params])


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999,
              eps=1e-8, weight_decay=0.0):
    """One Adam update, applied to `params` in place.

    Weight decay is decoupled (applied directly to the parameters, not
    through the moments).  Non-finite gradients are rejected so a diverging
    run fails loudly instead of poisoning the moments.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and state must have matching layouts")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + eps)
        if weight_decay:
            update = update + weight_decay * p
        p -= lr * update


def save_network(path, net: ReconNet):
    """Binary network checkpoint; round-trips bit-exactly."""
    with open(path, "wb") as fh:
        fh.write(_NET_MAGIC)
        fh.write(struct.pack("<III", 1, net.depth, net.channels))
        for p in net.parameters():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_network(path) -> ReconNet:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _NET_MAGIC:
            raise ValueError(f"not a network checkpoint: bad magic {magic!r}")
        version, depth, channels = struct.unpack("<III", fh.read(12))
        if version != 1:
            raise ValueError(f"unsupported checkpoint version {version}")
        net = ReconNet(depth, channels=channels, seed=None)
        arrays = []
        for p in net.parameters():
            buf = fh.read(8 * p.size)
            if len(buf) != 8 * p.size:
                raise ValueError("truncated network checkpoint")
            arrays.append(np.frombuffer(buf, dtype="<f8").reshape(p.shape))
        net.set_parameters(arrays)
    return net
