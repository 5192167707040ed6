"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every operation needed by the pyramid-attention layer, the toy backbone
and the training objective lives here, together with a central-difference
gradient checker. Forward functions record onto the active ``Tape`` (when
one is open) so a single ``tape.backward(loss)`` fills the ``grad`` buffer
of every tensor reachable from the loss.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, ParameterError

__all__ = [
    "Tensor",
    "Tape",
    "matmul",
    "transpose2d",
    "add",
    "sub",
    "mul",
    "mul_const",
    "neg",
    "reshape",
    "sum_all",
    "square",
    "sqrt_clamped",
    "relu",
    "affine",
    "add_col_bias",
    "add_channel_bias",
    "softmax_rows",
    "l2_normalize_rows",
    "elementwise_combine",
    "adaptive_max_pool2d",
    "conv2d",
    "cross_entropy_logits",
    "cross_entropy_rows",
    "permute",
    "bmm",
    "sum_rows",
    "slice_axis0",
    "grad_check",
]


class Tensor:
    """A contiguous row-major float64 buffer with an optional gradient buffer."""

    __slots__ = ("data", "grad", "name", "degenerate_rows", "no_grad")

    def __init__(self, data, name: str | None = None, no_grad: bool = False):
        # note: np.ascontiguousarray would promote 0-d scalars to 1-d
        self.data = np.asarray(data, dtype=np.float64, order="C")
        self.grad: np.ndarray | None = None
        self.name = name
        self.degenerate_rows: np.ndarray | None = None
        # leaves flagged no_grad let expensive ops skip their input gradient
        self.no_grad = no_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape})"


_ACTIVE_TAPE: "Tape | None" = None


class Tape:
    """Ordered record of executed operations with their backward rules.

    ``backward`` replays the record in reverse, accumulating gradients
    additively into each tensor's ``grad``. Running backward twice without
    resetting gradients therefore doubles them.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        self._previous = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc) -> None:
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._previous

    def __len__(self) -> int:
        return len(self._records)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Callable) -> None:
        self._records.append((out, inputs, backward))

    def backward(self, loss: Tensor) -> None:
        if loss.data.shape != ():
            raise ContractError(
                f"backward requires a scalar loss, got shape {loss.data.shape}"
            )
        tensors: dict[int, Tensor] = {id(loss): loss}
        reachable: set[int] = {id(loss)}
        for out, inputs, _ in reversed(self._records):
            if id(out) in reachable:
                for t in inputs:
                    reachable.add(id(t))
                    tensors[id(t)] = t
        # Per-pass flow buffers keep replay independent of prior passes, so
        # repeated backward calls add one full gradient each time.
        flows: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
        for out, inputs, backward in reversed(self._records):
            if id(out) not in reachable:
                continue
            g = flows.get(id(out))
            if g is None:
                continue
            for t, gi in zip(inputs, backward(g)):
                if gi is None:
                    continue
                acc = flows.get(id(t))
                flows[id(t)] = gi if acc is None else acc + gi
        for tid, g in flows.items():
            t = tensors[tid]
            t.grad = np.array(g, dtype=np.float64) if t.grad is None else t.grad + g


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward: Callable) -> Tensor:
    if _ACTIVE_TAPE is not None:
        _ACTIVE_TAPE.record(out, inputs, backward)
    return out


def _as2d(x: Tensor, op: str) -> np.ndarray:
    if x.data.ndim != 2:
        raise DimensionError(f"{op} expects a 2-d tensor, got shape {x.shape}")
    return x.data


# ---------------------------------------------------------------------------
# elementary arithmetic


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = _as2d(a, "matmul"), _as2d(b, "matmul")
    if ad.shape[1] != bd.shape[0]:
        raise DimensionError(f"matmul inner extents differ: {ad.shape} vs {bd.shape}")
    out = Tensor(ad @ bd)

    def backward(g):
        return g @ bd.T, ad.T @ g

    return _record(out, (a, b), backward)


def transpose2d(x: Tensor) -> Tensor:
    xd = _as2d(x, "transpose2d")
    out = Tensor(xd.T)

    def backward(g):
        return (g.T,)

    return _record(out, (x,), backward)


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op} shape mismatch: {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    out = Tensor(a.data + b.data)
    return _record(out, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    out = Tensor(a.data - b.data)
    return _record(out, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    out = Tensor(ad * bd)
    return _record(out, (a, b), lambda g: (g * bd, g * ad))


def mul_const(x: Tensor, c) -> Tensor:
    c = np.asarray(c, dtype=np.float64)
    out = Tensor(x.data * c)
    return _record(out, (x,), lambda g: (g * c,))


def neg(x: Tensor) -> Tensor:
    out = Tensor(-x.data)
    return _record(out, (x,), lambda g: (-g,))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if math.prod(shape) != x.data.size:
        raise DimensionError(f"cannot reshape {x.shape} into {shape}")
    old = x.data.shape
    out = Tensor(x.data.reshape(shape))
    return _record(out, (x,), lambda g: (g.reshape(old),))


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(x.data.ndim)):
        raise DimensionError(f"permute axes {axes} invalid for shape {x.shape}")
    inverse = tuple(np.argsort(axes))
    out = Tensor(x.data.transpose(axes))
    return _record(out, (x,), lambda g: (g.transpose(inverse),))


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched matmul: (B, m, k) @ (B, k, n) -> (B, m, n)."""
    ad, bd = a.data, b.data
    if ad.ndim != 3 or bd.ndim != 3 or ad.shape[0] != bd.shape[0] or ad.shape[2] != bd.shape[1]:
        raise DimensionError(f"bmm shapes incompatible: {ad.shape} vs {bd.shape}")
    out = Tensor(ad @ bd)

    def backward(g):
        return g @ bd.swapaxes(1, 2), ad.swapaxes(1, 2) @ g

    return _record(out, (a, b), backward)


def sum_rows(x: Tensor) -> Tensor:
    """Row sums of a 2-d tensor -> shape (m,)."""
    xd = _as2d(x, "sum_rows")
    out = Tensor(xd.sum(axis=1))
    cols = xd.shape[1]
    return _record(out, (x,), lambda g: (np.repeat(g[:, None], cols, axis=1),))


def slice_axis0(x: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice along the leading axis."""
    if not 0 <= start < stop <= x.data.shape[0]:
        raise DimensionError(
            f"slice [{start}:{stop}] out of range for extent {x.data.shape[0]}"
        )
    out = Tensor(x.data[start:stop].copy())

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[start:stop] = g
        return (gx,)

    return _record(out, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum())
    shape = x.data.shape
    return _record(out, (x,), lambda g: (np.broadcast_to(g, shape).copy() * 1.0,))


def square(x: Tensor) -> Tensor:
    xd = x.data
    out = Tensor(xd * xd)
    return _record(out, (x,), lambda g: (2.0 * xd * g,))


def sqrt_clamped(x: Tensor) -> Tensor:
    """Elementwise sqrt(max(x, 0)); gradient is zero on the clamped region."""
    xd = x.data
    y = np.sqrt(np.maximum(xd, 0.0))
    out = Tensor(y)

    def backward(g):
        with np.errstate(divide="ignore"):
            gx = np.where(xd > 0.0, 0.5 * g / np.where(y > 0.0, y, 1.0), 0.0)
        return (gx,)

    return _record(out, (x,), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0
    out = Tensor(np.where(mask, x.data, 0.0))
    return _record(out, (x,), lambda g: (g * mask,))


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    xd, wd = _as2d(x, "affine"), _as2d(w, "affine")
    bd = b.data
    if xd.shape[1] != wd.shape[0] or bd.shape != (wd.shape[1],):
        raise DimensionError(
            f"affine shapes do not conform: x={xd.shape} w={wd.shape} b={bd.shape}"
        )
    out = Tensor(xd @ wd + bd)

    def backward(g):
        return g @ wd.T, xd.T @ g, g.sum(axis=0)

    return _record(out, (x, w, b), backward)


def add_col_bias(m: Tensor, b: Tensor) -> Tensor:
    """Add bias vector b to every column of the 2-d tensor m."""
    md = _as2d(m, "add_col_bias")
    bd = b.data.reshape(-1)
    if bd.shape[0] != md.shape[0]:
        raise DimensionError(f"bias length {bd.shape[0]} != row count {md.shape[0]}")
    bshape = b.data.shape
    out = Tensor(md + bd[:, None])
    return _record(out, (m, b), lambda g: (g, g.sum(axis=1).reshape(bshape)))


def add_channel_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add bias vector b along the trailing (channel) axis of x."""
    bd = b.data
    if bd.ndim != 1 or x.data.shape[-1] != bd.shape[0]:
        raise DimensionError(
            f"channel bias {bd.shape} does not match input {x.shape}"
        )
    out = Tensor(x.data + bd)
    axes = tuple(range(x.data.ndim - 1))
    return _record(out, (x, b), lambda g: (g, g.sum(axis=axes)))


# ---------------------------------------------------------------------------
# normalizations


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax with max-subtraction for stability."""
    xd = _as2d(x, "softmax_rows")
    shifted = xd - xd.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)
    out = Tensor(s)

    def backward(g):
        dot = (g * s).sum(axis=1, keepdims=True)
        return (s * (g - dot),)

    return _record(out, (x,), backward)


def l2_normalize_rows(x: Tensor, epsilon: float = 1e-12) -> Tensor:
    """Scale each row to unit Euclidean norm.

    Rows with norm below ``epsilon`` pass through unchanged and are flagged
    on the output's ``degenerate_rows`` mask.
    """
    xd = _as2d(x, "l2_normalize_rows")
    norms = np.sqrt((xd * xd).sum(axis=1, keepdims=True))
    degenerate = norms[:, 0] < epsilon
    safe = np.where(degenerate[:, None], 1.0, norms)
    y = xd / safe
    out = Tensor(y)
    out.degenerate_rows = degenerate

    def backward(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        gx = (g - y * dot) / safe
        return (np.where(degenerate[:, None], g, gx),)

    return _record(out, (x,), backward)


# ---------------------------------------------------------------------------
# structural ops


def elementwise_combine(kind: str, xs: Sequence[Tensor]) -> Tensor:
    """Pointwise fold of same-shape tensors under maximum, sum or multiplication.

    Maximum routes gradient to the first maximal operand on ties.
    """
    xs = list(xs)
    if not xs:
        raise ContractError("elementwise_combine needs at least one tensor")
    shape = xs[0].shape
    for t in xs[1:]:
        if t.shape != shape:
            raise DimensionError(
                f"elementwise_combine shape mismatch: {shape} vs {t.shape}"
            )
    datas = [t.data for t in xs]
    if kind == "sum":
        out = Tensor(np.sum(datas, axis=0))
        return _record(out, tuple(xs), lambda g: tuple(g for _ in xs))
    if kind == "multiplication":
        out = Tensor(np.prod(datas, axis=0))

        def backward(g):
            grads = []
            for i in range(len(datas)):
                rest = g
                for j, dj in enumerate(datas):
                    if j != i:
                        rest = rest * dj
                grads.append(rest)
            return tuple(grads)

        return _record(out, tuple(xs), backward)
    if kind == "maximum":
        stacked = np.stack(datas, axis=0)
        winner = stacked.argmax(axis=0)  # first index on ties
        out = Tensor(stacked.max(axis=0))

        def backward(g):
            return tuple(g * (winner == i) for i in range(len(datas)))

        return _record(out, tuple(xs), backward)
    raise ParameterError(f"unknown combine kind {kind!r}")


def _pool_bounds(m: int, size: int, target: int) -> tuple[int, int]:
    return (m * size) // target, -((-(m + 1) * size) // target)


def adaptive_max_pool2d(x: Tensor, target: tuple[int, int]) -> Tensor:
    """Adaptive max pooling over the two spatial axes of a (K, W, H, C) tensor.

    Output cell (m, n) covers input rows [floor(m*W/W'), ceil((m+1)*W/W'))
    and the analogous columns; gradient flows to each window's first argmax
    in row-major order.
    """
    if x.data.ndim != 4:
        raise DimensionError(f"adaptive_max_pool2d expects 4-d input, got {x.shape}")
    K, W, H, C = x.data.shape
    Wp, Hp = int(target[0]), int(target[1])
    if Wp > W or Hp > H or Wp < 1 or Hp < 1:
        raise DimensionError(f"pool target {(Wp, Hp)} exceeds source extent {(W, H)}")
    xd = x.data
    if W % Wp == 0 and H % Hp == 0:
        wr, hr = W // Wp, H // Hp
        windows = (
            xd.reshape(K, Wp, wr, Hp, hr, C)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(K, Wp, Hp, C, wr * hr)
        )
        arg = windows.argmax(axis=-1)
        out = Tensor(np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0])
        dw, dh = np.divmod(arg, hr)
        k_i, m_i, n_i, c_i = np.ogrid[:K, :Wp, :Hp, :C]
        flat = (
            k_i * (W * H * C)
            + (m_i * wr + dw) * (H * C)
            + (n_i * hr + dh) * C
            + c_i
        )

        def backward(g):
            # windows are disjoint, so argmax targets are unique: plain
            # assignment instead of a scatter-add
            gx = np.zeros(K * W * H * C)
            gx[flat.ravel()] = g.ravel()
            return (gx.reshape(K, W, H, C),)

        return _record(out, (x,), backward)

    # general floor/ceil windows, cell by cell
    out_data = np.empty((K, Wp, Hp, C))
    arginfo = []
    for m in range(Wp):
        r0, r1 = _pool_bounds(m, W, Wp)
        for n in range(Hp):
            c0, c1 = _pool_bounds(n, H, Hp)
            win = xd[:, r0:r1, c0:c1, :].reshape(K, -1, C)
            arg = win.argmax(axis=1)
            out_data[:, m, n, :] = np.take_along_axis(win, arg[:, None, :], axis=1)[:, 0, :]
            arginfo.append((m, n, r0, c0, c1 - c0, arg))
    out = Tensor(out_data)

    def backward(g):
        gx = np.zeros((K, W, H, C))
        k_i, c_i = np.ogrid[:K, :C]
        for m, n, r0, c0, hlen, arg in arginfo:
            dw, dh = np.divmod(arg, hlen)
            np.add.at(gx, (k_i, r0 + dw, c0 + dh, c_i), g[:, m, n, :])
        return (gx,)

    return _record(out, (x,), backward)


_COL_INDEX_CACHE: dict[tuple, np.ndarray] = {}


def _col_index(Wp: int, Hp: int, kh: int, kw: int, stride: int, Wout: int, Hout: int) -> np.ndarray:
    key = (Wp, Hp, kh, kw, stride, Wout, Hout)
    idx = _COL_INDEX_CACHE.get(key)
    if idx is None:
        w0 = np.arange(Wout) * stride
        h0 = np.arange(Hout) * stride
        rows = w0[:, None, None, None] + np.arange(kh)[None, None, :, None]
        cols = h0[None, :, None, None] + np.arange(kw)[None, None, None, :]
        idx = (rows * Hp + cols).reshape(Wout * Hout, kh * kw)
        _COL_INDEX_CACHE[key] = idx
    return idx


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: str = "same") -> Tensor:
    """Cross-correlation of (K, W, H, Cin) frames with a (kh, kw, Cin, Cout) kernel."""
    if not isinstance(stride, int) or stride < 1:
        raise ParameterError(f"conv2d stride must be a positive int, got {stride!r}")
    if padding not in ("same", "valid"):
        raise ParameterError(f"conv2d padding must be 'same' or 'valid', got {padding!r}")
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise DimensionError(
            f"conv2d expects 4-d input and kernel, got {x.shape} and {kernel.shape}"
        )
    K, W, H, Cin = x.data.shape
    kh, kw, kcin, Cout = kernel.data.shape
    if kcin != Cin:
        raise DimensionError(f"kernel channels {kcin} != input channels {Cin}")
    if padding == "same":
        Wout, Hout = -(-W // stride), -(-H // stride)
        pw = max((Wout - 1) * stride + kh - W, 0)
        ph = max((Hout - 1) * stride + kw - H, 0)
        pads = (pw // 2, pw - pw // 2, ph // 2, ph - ph // 2)
    else:
        pads = (0, 0, 0, 0)
        if kh > W or kw > H:
            raise DimensionError(f"kernel {(kh, kw)} larger than input {(W, H)}")
        Wout, Hout = (W - kh) // stride + 1, (H - kw) // stride + 1
    Wp, Hp = W + pads[0] + pads[1], H + pads[2] + pads[3]
    if kh > Wp or kw > Hp:
        raise DimensionError(f"kernel {(kh, kw)} larger than padded input {(Wp, Hp)}")
    xp = np.pad(x.data, ((0, 0), (pads[0], pads[1]), (pads[2], pads[3]), (0, 0)))
    idx = _col_index(Wp, Hp, kh, kw, stride, Wout, Hout)
    cols = xp.reshape(K, Wp * Hp, Cin)[:, idx, :].reshape(K * Wout * Hout, kh * kw * Cin)
    wmat = kernel.data.reshape(kh * kw * Cin, Cout)
    out = Tensor((cols @ wmat).reshape(K, Wout, Hout, Cout))

    def backward(g):
        gflat = g.reshape(K * Wout * Hout, Cout)
        dkernel = (cols.T @ gflat).reshape(kh, kw, Cin, Cout)
        if x.no_grad:
            return None, dkernel
        if stride == 1:
            # input gradient as a full correlation with the flipped kernel
            gp = np.pad(g, ((0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1), (0, 0)))
            gw, gh = gp.shape[1], gp.shape[2]
            idx2 = _col_index(gw, gh, kh, kw, 1, Wp, Hp)
            cols2 = gp.reshape(K, gw * gh, Cout)[:, idx2, :].reshape(
                K * Wp * Hp, kh * kw * Cout
            )
            wrot = np.ascontiguousarray(
                kernel.data[::-1, ::-1].transpose(0, 1, 3, 2)
            ).reshape(kh * kw * Cout, Cin)
            dxp = (cols2 @ wrot).reshape(K, Wp, Hp, Cin)
        else:
            dcols = (gflat @ wmat.T).reshape(K, Wout * Hout * kh * kw, Cin)
            dxp = np.zeros((K, Wp * Hp, Cin))
            np.add.at(dxp, (slice(None), idx.reshape(-1)), dcols)
            dxp = dxp.reshape(K, Wp, Hp, Cin)
        dx = dxp[:, pads[0] : Wp - pads[1], pads[2] : Hp - pads[3], :]
        return dx, dkernel

    return _record(out, (x, kernel), backward)


# ---------------------------------------------------------------------------
# classification loss primitive


def cross_entropy_logits(logits: Tensor, label: int) -> Tensor:
    """Stable -log softmax(logits)[label] via log-sum-exp."""
    ld = logits.data
    if ld.ndim != 1 or ld.shape[0] < 2:
        raise ContractError(f"logits must be 1-d with >= 2 classes, got {logits.shape}")
    if not 0 <= int(label) < ld.shape[0]:
        raise ContractError(f"label {label} out of range for {ld.shape[0]} classes")
    label = int(label)
    m = ld.max()
    lse = m + math.log(np.exp(ld - m).sum())
    out = Tensor(lse - ld[label])
    p = np.exp(ld - lse)

    def backward(g):
        grad = p.copy()
        grad[label] -= 1.0
        return (grad * g,)

    return _record(out, (logits,), backward)


def cross_entropy_rows(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Per-row cross-entropy for (B, c) logits -> (B,) losses."""
    ld = _as2d(logits, "cross_entropy_rows")
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (ld.shape[0],):
        raise ContractError(f"need one label per row, got {labels.shape} for {ld.shape}")
    if labels.min() < 0 or labels.max() >= ld.shape[1]:
        raise ContractError(f"labels out of range for {ld.shape[1]} classes")
    m = ld.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(ld - m).sum(axis=1))
    rows = np.arange(ld.shape[0])
    out = Tensor(lse - ld[rows, labels])
    p = np.exp(ld - lse[:, None])

    def backward(g):
        grad = p.copy()
        grad[rows, labels] -= 1.0
        return (grad * g[:, None],)

    return _record(out, (logits,), backward)


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(
    f: Callable[..., Tensor],
    xs: "Tensor | Sequence[Tensor]",
    h: float = 1e-5,
    sample_per_tensor: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare reverse-mode gradients of the scalar program f against central
    differences with step h.

    Returns the max over checked coordinates of
    |analytic - numeric| / max(1, |analytic|, |numeric|). When
    ``sample_per_tensor`` is given, only that many randomly chosen
    coordinates per input tensor are checked (for large programs).
    """
    tensors = [xs] if isinstance(xs, Tensor) else list(xs)
    for t in tensors:
        t.zero_grad()
    with Tape() as tape:
        loss = f(*tensors)
    tape.backward(loss)

    worst = 0.0
    rng = rng or np.random.default_rng(0)
    for t in tensors:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        aflat = analytic.reshape(-1)
        n = flat.size
        if sample_per_tensor is not None and sample_per_tensor < n:
            coords = rng.choice(n, size=sample_per_tensor, replace=False)
        else:
            coords = range(n)
        for i in coords:
            keep = flat[i]
            flat[i] = keep + h
            up = f(*tensors).item()
            flat[i] = keep - h
            down = f(*tensors).item()
            flat[i] = keep
            numeric = (up - down) / (2.0 * h)
            a = aflat[i]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, err)
    return worst
