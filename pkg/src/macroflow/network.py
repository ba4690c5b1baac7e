"""Graph velocity-field network.

Predicts one 2-d velocity per macro from the current positions, the time and
the netlist graph. Blocks alternate an edge-aware graph-attention layer
(local connectivity) with dense multi-head self-attention (global context);
time enters through a sinusoidal embedding concatenated to the node features.
Size-agnostic over the macro count. Runs on the tape in `autodiff`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .core import PlacementInstance

_CKPT_MAGIC = b"MACROFLOW-CKPT\n"
_CKPT_VERSION = 1


def time_embed(t: float, dim: int, max_freq: float = 100.0) -> np.ndarray:
    """Interleaved sin/cos of t at geometric frequencies from 1 to max_freq."""
    if dim % 2 != 0 or dim < 2:
        raise ValueError(f"embedding dim must be even and >= 2, got {dim}")
    half = dim // 2
    if half == 1:
        freqs = np.array([1.0])
    else:
        freqs = max_freq ** (np.arange(half) / (half - 1))
    out = np.empty(dim)
    out[0::2] = np.sin(t * freqs)
    out[1::2] = np.cos(t * freqs)
    return out


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 64
    num_blocks: int = 3
    num_heads: int = 4
    time_dim: int = 32
    max_time_freq: float = 100.0
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError("hidden_dim must be divisible by num_heads")


def _graph_arrays(instance: PlacementInstance) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Directed (src, dst) index arrays and per-direction edge features.

    Each undirected pin connection yields two directed edges; the 4-vector is
    ordered (destination pin offset, source pin offset) so both directions see
    a consistent relational encoding.
    """
    edges = instance.netlist.edges
    offs = instance.edge_pin_offsets
    if len(edges) == 0:
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty, np.zeros((0, 4))
    src = np.concatenate([edges[:, 0], edges[:, 2]])
    dst = np.concatenate([edges[:, 2], edges[:, 0]])
    feat = np.concatenate(
        [
            np.concatenate([offs[:, 2:4], offs[:, 0:2]], axis=1),
            np.concatenate([offs[:, 0:2], offs[:, 2:4]], axis=1),
        ],
        axis=0,
    )
    return src.astype(np.intp), dst.astype(np.intp), feat


def _layer_norm(x: Tensor, scale: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / (var + eps).sqrt() * scale + bias


class VelocityModel:
    """Parameterized velocity field over macro positions, conditioned on the graph."""

    EDGE_DIM = 4

    def __init__(self, config: ModelConfig = ModelConfig(), seed: int = 0):
        self.config = config
        self.params: dict[str, Tensor] = {}
        self._init_params(np.random.default_rng(seed))

    # -- parameters -------------------------------------------------------------

    def _add(self, name: str, array: np.ndarray) -> None:
        self.params[name] = Tensor(array, requires_grad=True)

    def _linear_init(self, rng, fan_in: int, shape) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    def _init_params(self, rng: np.random.Generator) -> None:
        cfg = self.config
        d, heads = cfg.hidden_dim, cfg.num_heads
        dh = d // heads
        in_dim = 2 + 2 + cfg.time_dim  # normalized dims, position, time embedding

        self._add("enc.w", self._linear_init(rng, in_dim, (in_dim, d)))
        self._add("enc.b", np.zeros(d))

        for b in range(cfg.num_blocks):
            p = f"block{b}."
            self._add(p + "gat.ln.scale", np.ones(d))
            self._add(p + "gat.ln.bias", np.zeros(d))
            comb_in = 2 * d + self.EDGE_DIM
            self._add(p + "gat.w_comb", self._linear_init(rng, comb_in, (comb_in, d)))
            self._add(p + "gat.b_comb", np.zeros(d))
            self._add(p + "gat.attn", self._linear_init(rng, dh, (heads, dh)))
            self._add(p + "gat.w_val", self._linear_init(rng, d, (d, d)))
            self._add(p + "gat.w_out", self._linear_init(rng, d, (d, d)))

            self._add(p + "attn.ln.scale", np.ones(d))
            self._add(p + "attn.ln.bias", np.zeros(d))
            for name in ("w_q", "w_k", "w_v"):
                self._add(p + f"attn.{name}", self._linear_init(rng, d, (d, d)))
            self._add(p + "attn.w_out", self._linear_init(rng, d, (d, d)))

        self._add("dec.ln.scale", np.ones(d))
        self._add("dec.ln.bias", np.zeros(d))
        self._add("dec.w1", self._linear_init(rng, d, (d, d)))
        self._add("dec.b1", np.zeros(d))
        # zero-initialized output layer: the untrained field is the zero velocity
        self._add("dec.w2", np.zeros((d, 2)))
        self._add("dec.b2", np.zeros(2))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def num_params(self) -> int:
        return sum(p.data.size for p in self.params.values())

    # -- forward ------------------------------------------------------------------

    def _gat_layer(self, h: Tensor, prefix: str, src, dst, efeat: np.ndarray, n: int) -> Tensor:
        """Edge-aware attention aggregation with residual; no-op on edge-free graphs."""
        cfg = self.config
        heads, dh = cfg.num_heads, cfg.hidden_dim // cfg.num_heads
        P = self.params
        hn = _layer_norm(h, P[prefix + "ln.scale"], P[prefix + "ln.bias"])

        h_dst = ad.gather_rows(hn, dst)
        h_src = ad.gather_rows(hn, src)
        z = ad.concat([h_dst, h_src, Tensor(efeat)], axis=1) @ P[prefix + "w_comb"] + P[prefix + "b_comb"]
        z = z.leaky_relu(cfg.leaky_slope).reshape(-1, heads, dh)
        logits = (z * P[prefix + "attn"]).sum(axis=-1)          # (E, heads)
        alpha = ad.segment_softmax(logits, dst, n)

        values = (hn @ P[prefix + "w_val"]).reshape(-1, heads, dh)
        msg = ad.gather_rows(values, src) * alpha.reshape(-1, heads, 1)
        agg = ad.segment_sum(msg, dst, n).reshape(n, heads * dh)
        return h + agg @ P[prefix + "w_out"]

    def _self_attention(self, h: Tensor, prefix: str, n: int) -> Tensor:
        cfg = self.config
        heads, dh = cfg.num_heads, cfg.hidden_dim // cfg.num_heads
        P = self.params
        hn = _layer_norm(h, P[prefix + "ln.scale"], P[prefix + "ln.bias"])

        def split(t: Tensor) -> Tensor:
            return t.reshape(n, heads, dh).transpose((1, 0, 2))  # (heads, N, dh)

        q = split(hn @ P[prefix + "w_q"])
        k = split(hn @ P[prefix + "w_k"])
        v = split(hn @ P[prefix + "w_v"])
        scores = (q @ k.transpose((0, 2, 1))) * (1.0 / np.sqrt(dh))
        mixed = scores.softmax(axis=-1) @ v                      # (heads, N, dh)
        merged = mixed.transpose((1, 0, 2)).reshape(n, heads * dh)
        return h + merged @ P[prefix + "w_out"]

    def forward(self, positions: np.ndarray, t: float, instance: PlacementInstance) -> Tensor:
        """Tape-recorded forward pass; returns the (N, 2) velocity tensor."""
        positions = np.asarray(positions, dtype=np.float64)
        n = instance.num_macros
        if positions.shape != (n, 2):
            raise ValueError(f"positions shape {positions.shape} != ({n}, 2)")
        if not np.all(np.isfinite(positions)):
            raise ValueError("positions contain non-finite values")
        cfg = self.config
        P = self.params
        src, dst, efeat = _graph_arrays(instance)

        temb = np.broadcast_to(time_embed(t, cfg.time_dim, cfg.max_time_freq), (n, cfg.time_dim))
        node_in = Tensor(np.concatenate([instance.norm_sizes, positions, temb], axis=1))
        h = (node_in @ P["enc.w"] + P["enc.b"]).leaky_relu(cfg.leaky_slope)

        for b in range(cfg.num_blocks):
            h = self._gat_layer(h, f"block{b}.gat.", src, dst, efeat, n)
            h = self._self_attention(h, f"block{b}.attn.", n)

        h = _layer_norm(h, P["dec.ln.scale"], P["dec.ln.bias"])
        h = (h @ P["dec.w1"] + P["dec.b1"]).leaky_relu(cfg.leaky_slope)
        out = h @ P["dec.w2"] + P["dec.b2"]
        if not np.all(np.isfinite(out.data)):
            raise FloatingPointError("non-finite velocity in forward pass")
        return out

    def velocity(self, positions: np.ndarray, t: float, instance: PlacementInstance) -> np.ndarray:
        """Inference forward pass without tape recording."""
        with ad.no_grad():
            return self.forward(positions, t, instance).data

    # -- checkpoint I/O --------------------------------------------------------------

    def save(self, path) -> None:
        """Versioned binary checkpoint: JSON header + little-endian float32 tensors."""
        names = list(self.params)
        header = {
            "model": asdict(self.config),
            "dtype": "<f4",
            "tensors": [{"name": k, "shape": list(self.params[k].data.shape)} for k in names],
        }
        blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        with open(path, "wb") as f:
            f.write(_CKPT_MAGIC)
            f.write(struct.pack("<IQ", _CKPT_VERSION, len(blob)))
            f.write(blob)
            for k in names:
                f.write(np.ascontiguousarray(self.params[k].data, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path) -> "VelocityModel":
        with open(path, "rb") as f:
            magic = f.read(len(_CKPT_MAGIC))
            if magic != _CKPT_MAGIC:
                raise ValueError(f"{path}: not a model checkpoint (bad magic)")
            version, hlen = struct.unpack("<IQ", f.read(12))
            if version != _CKPT_VERSION:
                raise ValueError(f"{path}: unsupported checkpoint version {version}")
            header = json.loads(f.read(hlen).decode())
            model = cls(ModelConfig(**header["model"]))
            for spec in header["tensors"]:
                shape = tuple(spec["shape"])
                count = int(np.prod(shape)) if shape else 1
                raw = f.read(count * 4)
                if spec["name"] not in model.params:
                    raise ValueError(f"{path}: unknown tensor {spec['name']!r}")
                arr = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
                if arr.shape != model.params[spec["name"]].data.shape:
                    raise ValueError(f"{path}: shape mismatch for {spec['name']!r}")
                model.params[spec["name"]] = Tensor(arr, requires_grad=True)
        return model
