"""Paired-feature-point transformer forward pass.

One encoder layer (self-attention, feed-forward) and one decoder layer
(self-attention, co-attention, feed-forward), four attention heads, no
normalization layers and no inner residuals. The only residual is the
outer pairing one: l_st = l_s + T(l_s, l_d). Encoder and decoder share
the self-attention projections and the whole bundle is reused for both
orderings of the pair.

Positional encoding is additive sinusoid applied at model width before
any projection; `positional=False` disables it where permutation
equivariance is wanted.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InvalidInputError, ShapeError
from .images import ImageBuffer

HEADS = 4
MODEL_DIM = 1024

_MAGIC = b"PFPW1\n"


def _as_matrix(x, name: str) -> np.ndarray:
    arr = np.asarray(getattr(x, "values", x), dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class EmbeddingMatrix:
    """N x dim real matrix of per-feature embeddings."""

    values: np.ndarray

    def __post_init__(self):
        v = _as_matrix(self.values, "embedding")
        if v.shape[0] < 1:
            raise ShapeError("embedding needs at least one row")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class AttnBlock:
    """Per-head Q/K/V projections plus the concat output projection."""

    wq: np.ndarray  # (HEADS, dim, head_dim)
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray  # (dim, dim)

    def __post_init__(self):
        for name in ("wq", "wk", "wv", "wo"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        dim = self.wo.shape[0] if self.wo.ndim == 2 else -1
        head_dim = dim // HEADS if dim > 0 else -1
        for name in ("wq", "wk", "wv"):
            if getattr(self, name).shape != (HEADS, dim, head_dim):
                raise ShapeError(
                    f"{name} must be ({HEADS}, {dim}, {head_dim}), got {getattr(self, name).shape}"
                )
        if self.wo.ndim != 2 or self.wo.shape != (dim, dim) or dim % HEADS != 0:
            raise ShapeError(f"wo must be square with dim divisible by {HEADS}, got {self.wo.shape}")

    @property
    def dim(self) -> int:
        return self.wo.shape[0]


@dataclass(frozen=True)
class FeedForward:
    """Two-layer ReLU feed-forward: relu(x w1 + b1) w2 + b2."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for name in ("w1", "b1", "w2", "b2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        dim, hidden = self.w1.shape if self.w1.ndim == 2 else (-1, -1)
        if self.b1.shape != (hidden,) or self.w2.shape != (hidden, dim) or self.b2.shape != (dim,):
            raise ShapeError(
                f"feed-forward shapes inconsistent: w1 {self.w1.shape}, b1 {self.b1.shape}, "
                f"w2 {self.w2.shape}, b2 {self.b2.shape}"
            )

    @property
    def dim(self) -> int:
        return self.w1.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x @ self.w1 + self.b1, 0.0) @ self.w2 + self.b2


@dataclass(frozen=True)
class WeightBundle:
    """Shared self-attention block, co-attention block, and the two FFs."""

    self_attn: AttnBlock
    co_attn: AttnBlock
    encoder_ff: FeedForward
    decoder_ff: FeedForward

    def __post_init__(self):
        dim = self.self_attn.dim
        if self.co_attn.dim != dim or self.encoder_ff.dim != dim or self.decoder_ff.dim != dim:
            raise ShapeError("all bundle blocks must agree on model dim")

    @property
    def dim(self) -> int:
        return self.self_attn.dim


@dataclass(frozen=True)
class AttentionOutput:
    """Attention result plus the row-stochastic per-head attention maps."""

    values: np.ndarray
    attention_rows: np.ndarray  # (heads, n_q, n_k)

    def __post_init__(self):
        rows = np.asarray(self.attention_rows, dtype=np.float64)
        if rows.ndim != 3:
            raise ShapeError(f"attention_rows must be (heads, n_q, n_k), got {rows.shape}")
        if rows.min() < -1e-12 or rows.max() > 1.0 + 1e-9:
            raise InvalidInputError("attention entries must lie in [0, 1]")
        if np.any(np.abs(rows.sum(axis=2) - 1.0) > 1e-6):
            raise InvalidInputError("every attention row must sum to 1 within 1e-6")


def positional_encoding(length: int, dim: int) -> np.ndarray:
    """Sinusoid table: entry(pos, 2i)=sin(pos/10000^(2i/dim)), odd cols cos."""
    if dim % 2 != 0:
        raise ShapeError(f"positional encoding dim must be even, got {dim}")
    if length < 0:
        raise InvalidInputError(f"length must be nonnegative, got {length}")
    pos = np.arange(length, dtype=np.float64)[:, None]
    freq = np.power(10000.0, -np.arange(0, dim, 2, dtype=np.float64) / dim)
    angle = pos * freq[None, :]
    enc = np.empty((length, dim), dtype=np.float64)
    enc[:, 0::2] = np.sin(angle)
    enc[:, 1::2] = np.cos(angle)
    return enc


def _encode(x: np.ndarray, positional: bool) -> np.ndarray:
    if not positional:
        return x
    return x + positional_encoding(x.shape[0], x.shape[1])


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _attention_core(q: np.ndarray, k: np.ndarray, v: np.ndarray, d_k: int):
    rows = _softmax_rows(q @ k.T / np.sqrt(float(d_k)))
    return rows @ v, rows


def scaled_dot_attention(q, k, v, d_k: int, positional: bool = True) -> AttentionOutput:
    """softmax(P(q) P(k)^T / sqrt(d_k)) P(v) with single-map attention rows."""
    q = _as_matrix(q, "q")
    k = _as_matrix(k, "k")
    v = _as_matrix(v, "v")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"q dim {q.shape[1]} != k dim {k.shape[1]}")
    if k.shape[1] != d_k:
        raise ShapeError(f"d_k {d_k} does not match key dim {k.shape[1]}")
    if v.shape[0] != k.shape[0]:
        raise ShapeError(f"k rows {k.shape[0]} != v rows {v.shape[0]}")
    out, rows = _attention_core(_encode(q, positional), _encode(k, positional), _encode(v, positional), d_k)
    return AttentionOutput(values=out, attention_rows=rows[None, :, :])


def _mha(q: np.ndarray, k: np.ndarray, v: np.ndarray, block: AttnBlock, positional: bool) -> np.ndarray:
    dim = block.dim
    for name, mat in (("q", q), ("k", k), ("v", v)):
        if mat.shape[1] != dim:
            raise ShapeError(f"{name} dim {mat.shape[1]} does not match bundle dim {dim}")
    if k.shape[0] != v.shape[0]:
        raise ShapeError(f"k rows {k.shape[0]} != v rows {v.shape[0]}")
    qp = _encode(q, positional)
    kp = _encode(k, positional)
    vp = _encode(v, positional)
    head_dim = dim // HEADS
    parts = []
    for h in range(HEADS):
        out, _ = _attention_core(qp @ block.wq[h], kp @ block.wk[h], vp @ block.wv[h], head_dim)
        parts.append(out)
    return np.concatenate(parts, axis=1) @ block.wo


def multi_head_attention(q, k, v, w: WeightBundle, positional: bool = True) -> np.ndarray:
    """Four projected attention heads, concatenated and output-projected."""
    return _mha(_as_matrix(q, "q"), _as_matrix(k, "k"), _as_matrix(v, "v"), w.self_attn, positional)


def _pair_delta(base: np.ndarray, other: np.ndarray, w: WeightBundle, positional: bool) -> np.ndarray:
    """T(base, other): encoder consumes base, decoder queries come from other."""
    memory = w.encoder_ff.apply(_mha(base, base, base, w.self_attn, positional))
    queries = _mha(other, other, other, w.self_attn, positional)
    cross = _mha(queries, memory, memory, w.co_attn, positional)
    return w.decoder_ff.apply(cross)


def pair_transform(l_s, l_d, w: WeightBundle, positional: bool = True):
    """Residual pair update: l_st = l_s + T(l_s, l_d), l_dt = l_d + T(l_d, l_s)."""
    ls = _as_matrix(l_s, "l_s")
    ld = _as_matrix(l_d, "l_d")
    if ls.shape != ld.shape:
        raise ShapeError(f"l_s shape {ls.shape} != l_d shape {ld.shape}")
    if ls.shape[1] != w.dim:
        raise ShapeError(f"embedding dim {ls.shape[1]} does not match bundle dim {w.dim}")
    l_st = ls + _pair_delta(ls, ld, w, positional)
    l_dt = ld + _pair_delta(ld, ls, w, positional)
    return EmbeddingMatrix(values=l_st), EmbeddingMatrix(values=l_dt)


def stub_embedder(image, n: int = 10, dim: int = MODEL_DIM) -> EmbeddingMatrix:
    """Deterministic per-strip image statistics tiled out to dim columns."""
    if n < 1 or dim < 1:
        raise InvalidInputError(f"n and dim must be positive, got n={n}, dim={dim}")
    px = image.pixels if isinstance(image, ImageBuffer) else np.asarray(image, dtype=np.float64)
    if px.size == 0:
        raise InvalidInputError("image is empty")
    if px.ndim == 2:
        px = px[:, :, None]
    height = px.shape[0]
    bounds = np.round(np.linspace(0, height, n + 1)).astype(int)
    rows = []
    for i in range(n):
        lo = min(bounds[i], height - 1)
        hi = max(bounds[i + 1], lo + 1)
        strip = px[lo:hi]
        gx = float(np.abs(np.diff(strip, axis=1)).mean()) if strip.shape[1] > 1 else 0.0
        gy = float(np.abs(np.diff(strip, axis=0)).mean()) if strip.shape[0] > 1 else 0.0
        stats = [float(strip.mean()), float(strip.var()), gx, gy, (i + 0.5) / n]
        stats.extend(float(strip[:, :, c].mean()) for c in range(strip.shape[2]))
        rows.append(np.resize(np.asarray(stats, dtype=np.float64), dim))
    return EmbeddingMatrix(values=np.stack(rows))


# ---------------------------------------------------------------- bundles

def _bundle_fields(dim: int, hidden: int):
    head_dim = dim // HEADS
    return [
        ("self_attn.wq", (HEADS, dim, head_dim)),
        ("self_attn.wk", (HEADS, dim, head_dim)),
        ("self_attn.wv", (HEADS, dim, head_dim)),
        ("self_attn.wo", (dim, dim)),
        ("co_attn.wq", (HEADS, dim, head_dim)),
        ("co_attn.wk", (HEADS, dim, head_dim)),
        ("co_attn.wv", (HEADS, dim, head_dim)),
        ("co_attn.wo", (dim, dim)),
        ("encoder_ff.w1", (dim, hidden)),
        ("encoder_ff.b1", (hidden,)),
        ("encoder_ff.w2", (hidden, dim)),
        ("encoder_ff.b2", (dim,)),
        ("decoder_ff.w1", (dim, hidden)),
        ("decoder_ff.b1", (hidden,)),
        ("decoder_ff.w2", (hidden, dim)),
        ("decoder_ff.b2", (dim,)),
    ]


def _bundle_from_tensors(tensors: dict) -> WeightBundle:
    def block(prefix):
        return AttnBlock(
            wq=tensors[f"{prefix}.wq"],
            wk=tensors[f"{prefix}.wk"],
            wv=tensors[f"{prefix}.wv"],
            wo=tensors[f"{prefix}.wo"],
        )

    def ff(prefix):
        return FeedForward(
            w1=tensors[f"{prefix}.w1"],
            b1=tensors[f"{prefix}.b1"],
            w2=tensors[f"{prefix}.w2"],
            b2=tensors[f"{prefix}.b2"],
        )

    return WeightBundle(
        self_attn=block("self_attn"),
        co_attn=block("co_attn"),
        encoder_ff=ff("encoder_ff"),
        decoder_ff=ff("decoder_ff"),
    )


def zero_bundle(dim: int = MODEL_DIM, hidden: int | None = None) -> WeightBundle:
    if dim % HEADS != 0:
        raise ShapeError(f"dim must be divisible by {HEADS}, got {dim}")
    hidden = dim if hidden is None else hidden
    tensors = {name: np.zeros(shape) for name, shape in _bundle_fields(dim, hidden)}
    return _bundle_from_tensors(tensors)


def stub_bundle(dim: int = MODEL_DIM, hidden: int | None = None, seed: int = 0) -> WeightBundle:
    """Fixed-seed random bundle; values are float32-representable so weight
    files round trip bit-exactly."""
    if dim % HEADS != 0:
        raise ShapeError(f"dim must be divisible by {HEADS}, got {dim}")
    hidden = dim if hidden is None else hidden
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(dim)
    tensors = {}
    for name, shape in _bundle_fields(dim, hidden):
        values = rng.normal(0.0, scale, shape)
        tensors[name] = values.astype(np.float32).astype(np.float64)
    return _bundle_from_tensors(tensors)


# ---------------------------------------------------------------- weight files

def save_weights(bundle: WeightBundle, path) -> None:
    """PFPW1 file: magic, text header (heads, shape table, crc32), f32 payload.

    Values are stored as little-endian float32; a bundle whose entries are
    not float32-representable is quantized on save.
    """
    hidden = bundle.encoder_ff.w1.shape[1]
    names = _bundle_fields(bundle.dim, hidden)
    tensors = {
        "self_attn.wq": bundle.self_attn.wq,
        "self_attn.wk": bundle.self_attn.wk,
        "self_attn.wv": bundle.self_attn.wv,
        "self_attn.wo": bundle.self_attn.wo,
        "co_attn.wq": bundle.co_attn.wq,
        "co_attn.wk": bundle.co_attn.wk,
        "co_attn.wv": bundle.co_attn.wv,
        "co_attn.wo": bundle.co_attn.wo,
        "encoder_ff.w1": bundle.encoder_ff.w1,
        "encoder_ff.b1": bundle.encoder_ff.b1,
        "encoder_ff.w2": bundle.encoder_ff.w2,
        "encoder_ff.b2": bundle.encoder_ff.b2,
        "decoder_ff.w1": bundle.decoder_ff.w1,
        "decoder_ff.b1": bundle.decoder_ff.b1,
        "decoder_ff.w2": bundle.decoder_ff.w2,
        "decoder_ff.b2": bundle.decoder_ff.b2,
    }
    payload = b"".join(
        np.ascontiguousarray(tensors[name], dtype="<f4").tobytes() for name, _ in names
    )
    lines = [f"heads {HEADS}"]
    for name, _ in names:
        shape = " ".join(str(s) for s in tensors[name].shape)
        lines.append(f"tensor {name} {shape}")
    lines.append(f"crc32 {zlib.crc32(payload)}")
    lines.append("end")
    header = "\n".join(lines) + "\n"
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.encode("ascii"))
        fh.write(payload)


def load_weights(path) -> WeightBundle:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(_MAGIC):
        raise FormatError("bad magic string", field="magic")
    rest = blob[len(_MAGIC):]
    end_marker = b"end\n"
    end = rest.find(end_marker)
    if end < 0:
        raise FormatError("header missing end marker", field="end")
    header = rest[:end].decode("ascii", errors="replace")
    payload = rest[end + len(end_marker):]

    heads = None
    declared = []  # (name, shape)
    crc_expected = None
    for line in header.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "heads":
            try:
                heads = int(parts[1])
            except (IndexError, ValueError):
                raise FormatError("unreadable heads declaration", field="heads")
        elif parts[0] == "tensor":
            if len(parts) < 3:
                raise FormatError(f"malformed tensor line: {line!r}", field="tensor")
            try:
                shape = tuple(int(p) for p in parts[2:])
            except ValueError:
                raise FormatError(f"non-integer shape for {parts[1]}", field=parts[1])
            declared.append((parts[1], shape))
        elif parts[0] == "crc32":
            try:
                crc_expected = int(parts[1])
            except (IndexError, ValueError):
                raise FormatError("unreadable checksum", field="crc32")
        else:
            raise FormatError(f"unknown header line: {line!r}", field=parts[0])
    if heads is None:
        raise FormatError("header missing heads declaration", field="heads")
    if heads != HEADS:
        raise FormatError(f"engine requires {HEADS} heads, file declares {heads}", field="heads")
    if crc_expected is None:
        raise FormatError("header missing checksum", field="crc32")

    total = sum(int(np.prod(shape)) for _, shape in declared)
    if len(payload) != total * 4:
        raise FormatError(
            f"payload holds {len(payload)} bytes, header shapes need {total * 4}", field="payload"
        )
    if zlib.crc32(payload) != crc_expected:
        raise FormatError("payload checksum mismatch", field="crc32")

    tensors = {}
    offset = 0
    for name, shape in declared:
        count = int(np.prod(shape))
        chunk = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        tensors[name] = chunk.astype(np.float64).reshape(shape)
        offset += count * 4
    try:
        bundle = _bundle_from_tensors(tensors)
    except KeyError as exc:
        raise FormatError(f"header missing tensor {exc.args[0]}", field=str(exc.args[0]))
    except (ShapeError, InvalidInputError) as exc:
        raise FormatError(f"inconsistent tensor shapes: {exc}", field="tensor")
    return bundle
