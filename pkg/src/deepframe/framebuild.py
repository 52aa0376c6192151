"""Construction of global synthesis operators from architecture specs.

The induced operator is block lower triangular over (row group, layer)
pairs: diagonal blocks enter with a positive sign, off-diagonal blocks are
stored in their natural orientation and enter negated and transposed.
Storage is block sparse (one dense array per structural block); a full
dense matrix is materialized on demand only for small operators.

Convolution blocks are linear operators that place every filter at every
output grid position (zero padding, "same"-style, window t starts at
t*stride - (f-1)//2). Column order is filter-major then position; row
order is channel-major then pixel. Applying the operator synthesizes a
signal from coefficient maps; applying its transpose correlates the
filters with a signal.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .archspec import ArchitectureSpec, BlockDef, LayerSpec, block_table

MATERIALIZE_COL_LIMIT = 4096


class FrameBuildError(ValueError):
    """Raised for parameter/shape problems while assembling an operator."""


# ---------------------------------------------------------------------------
# convolution operators


@functools.lru_cache(maxsize=256)
def conv_operator_entries(channels: int, filters: int, spatial: int,
                          filter_size: int, stride: int, ndim: int):
    """Index triplets (rows, cols, taps) of the synthesis conv matrix.

    The matrix has shape (channels * spatial**ndim, filters * q**ndim) with
    q = ceil(spatial / stride), and entry (rows[i], cols[i]) equals
    filter_bank.flat[taps[i]]. Window positions falling outside the grid
    are dropped (zero padding). Results are cached per geometry and shared;
    callers must not modify the returned arrays.
    """
    p, f, s = spatial, filter_size, stride
    q = -(-p // s)
    pad = (f - 1) // 2
    rows, cols, taps = [], [], []
    if ndim == 1:
        for c in range(filters):
            for t in range(q):
                col = c * q + t
                base = t * s - pad
                for ch in range(channels):
                    for fx in range(f):
                        x = base + fx
                        if 0 <= x < p:
                            rows.append(ch * p + x)
                            cols.append(col)
                            taps.append((c * channels + ch) * f + fx)
    elif ndim == 2:
        for c in range(filters):
            for ty in range(q):
                for tx in range(q):
                    col = (c * q + ty) * q + tx
                    by = ty * s - pad
                    bx = tx * s - pad
                    for ch in range(channels):
                        for fy in range(f):
                            y = by + fy
                            if not 0 <= y < p:
                                continue
                            for fx in range(f):
                                x = bx + fx
                                if 0 <= x < p:
                                    rows.append((ch * p + y) * p + x)
                                    cols.append(col)
                                    taps.append(((c * channels + ch) * f + fy) * f + fx)
    else:
        raise ValueError(f"ndim must be 1 or 2, got {ndim}")
    shape = (channels * p ** ndim, filters * q ** ndim)
    return (np.asarray(rows, dtype=np.intp),
            np.asarray(cols, dtype=np.intp),
            np.asarray(taps, dtype=np.intp),
            shape)


def conv_matrix_from_entries(entries, filter_bank: np.ndarray) -> np.ndarray:
    rows, cols, taps, shape = entries
    mat = np.zeros(shape)
    mat[rows, cols] = filter_bank.reshape(-1)[taps]
    return mat


def materialize_conv_operator(layer: LayerSpec, filter_bank: np.ndarray) -> np.ndarray:
    """Dense synthesis matrix of a convolutional layer.

    ``filter_bank`` has shape (width, channels, f) for 1-D layers or
    (width, channels, f, f) for 2-D ones. The result maps coefficient maps
    to the layer's input space; its transpose maps a signal to per-filter
    correlation maps.
    """
    if not layer.is_conv:
        raise FrameBuildError("materialize_conv_operator needs a convolutional layer")
    nd = layer.ndim
    expected = (layer.width, layer.channels) + (layer.filter_size,) * nd
    filter_bank = np.asarray(filter_bank, dtype=np.float64)
    if filter_bank.shape != expected:
        raise FrameBuildError(
            f"filter bank shape {filter_bank.shape} does not match layer "
            f"(expected {expected})"
        )
    entries = conv_operator_entries(layer.channels, layer.width, layer.spatial,
                                    layer.filter_size, layer.stride, nd)
    return conv_matrix_from_entries(entries, filter_bank)


def conv_gram_nonzeros(layer: LayerSpec) -> int:
    """Structural off-diagonal count of a single 2-D conv layer's Gram.

    Counts ordered column pairs whose placed supports can overlap: with
    q = ceil(p/s) output positions per axis and o = ceil(f/s) overlapping
    windows, each axis admits a = o(2q - o + 1) - q ordered position pairs,
    and the full count is k(k a^2 - q^2).
    """
    if not layer.is_conv or layer.ndim != 2:
        raise ValueError("structural count formula applies to 2-D convolutional layers")
    p, f, s, k = layer.spatial, layer.filter_size, layer.stride, layer.width
    q = -(-p // s)
    o = -(-f // s)
    a = o * (2 * q - o + 1) - q
    return k * (k * a * a - q * q)


# ---------------------------------------------------------------------------
# the global operator


@dataclass
class GlobalFrame:
    """A built global operator.

    ``params`` maps learnable block positions to their stored parameter
    arrays; ``placed`` maps every structural block position to the actual
    (signed) dense submatrix of the operator; ``support`` holds the 0/1
    structural pattern of each placed block (parameter values do not affect
    it). ``normalized`` marks frames produced by :func:`normalize`, whose
    placed columns have unit norm and whose ``params`` are empty.
    """

    spec: ArchitectureSpec
    blocks: tuple[BlockDef, ...]
    params: dict[tuple[int, int], np.ndarray]
    placed: dict[tuple[int, int], np.ndarray]
    support: dict[tuple[int, int], np.ndarray]
    normalized: bool = False

    @property
    def row_dims(self) -> tuple[int, ...]:
        return self.spec.row_dims

    @property
    def col_dims(self) -> tuple[int, ...]:
        return self.spec.col_dims

    @property
    def shape(self) -> tuple[int, int]:
        return (sum(self.row_dims), sum(self.col_dims))

    @property
    def depth(self) -> int:
        return self.spec.depth

    def row_offset(self, i: int) -> int:
        return sum(self.row_dims[:i])

    def col_offset(self, j: int) -> int:
        return sum(self.col_dims[:j])

    def rows_for_col(self, j: int) -> list[int]:
        return sorted(i for (i, jj) in self.placed if jj == j)

    def cols_for_row(self, i: int) -> list[int]:
        return sorted(j for (ii, j) in self.placed if ii == i)

    def materialize(self, max_cols: int = MATERIALIZE_COL_LIMIT) -> np.ndarray:
        """Dense global matrix; refuses operators wider than ``max_cols``."""
        n_rows, n_cols = self.shape
        if n_cols > max_cols:
            raise FrameBuildError(
                f"refusing to materialize a {n_rows}x{n_cols} operator "
                f"(limit {max_cols} columns); use the block interfaces"
            )
        out = np.zeros((n_rows, n_cols))
        for (i, j), blk in self.placed.items():
            r0, c0 = self.row_offset(i), self.col_offset(j)
            out[r0:r0 + blk.shape[0], c0:c0 + blk.shape[1]] = blk
        return out

    def column_block(self, j: int) -> np.ndarray:
        """The stacked placed blocks of column group j (for operator norms)."""
        return np.vstack([self.placed[(i, j)] for i in self.rows_for_col(j)])

    def column_norms(self, j: int) -> np.ndarray:
        """Norms of the global columns of group j."""
        total = np.zeros(self.col_dims[j])
        for i in self.rows_for_col(j):
            blk = self.placed[(i, j)]
            total += np.einsum("ij,ij->j", blk, blk)
        return np.sqrt(total)


def _init_block(b: BlockDef, rng: np.random.Generator) -> np.ndarray:
    if b.form == "conv":
        fan_in = b.conv["channels"] * b.conv["filter"] ** b.conv["ndim"]
    else:
        fan_in = b.shape[0]
    return rng.standard_normal(b.shape) / math.sqrt(fan_in)


def _conv_entries_for(b: BlockDef, entries_cache: dict):
    key = tuple(sorted(b.conv.items()))
    if key not in entries_cache:
        entries_cache[key] = conv_operator_entries(
            channels=b.conv["channels"],
            filters=b.conv["filters"],
            spatial=b.conv["spatial"],
            filter_size=b.conv["filter"],
            stride=b.conv["stride"],
            ndim=b.conv["ndim"],
        )
    return entries_cache[key]


def _place(b: BlockDef, stored: np.ndarray, entries_cache: dict) -> np.ndarray:
    """Turn a stored parameter array into the signed global submatrix."""
    if b.form == "conv":
        mat = conv_matrix_from_entries(_conv_entries_for(b, entries_cache), stored)
        return mat if b.is_diagonal else -mat.T
    return stored if b.is_diagonal else -stored.T


def _support_pattern(b: BlockDef, entries_cache: dict) -> np.ndarray:
    """Structural 0/1 pattern of the placed block (values play no part)."""
    if b.role == "identity":
        return np.eye(b.placed_shape[0])
    if b.form == "conv":
        ones = np.ones(b.shape)
        pat = _place(b, ones, entries_cache)
        return np.abs(pat)
    return np.ones(b.placed_shape)


def build_global_frame(spec: ArchitectureSpec,
                       params: dict[tuple[int, int], np.ndarray] | None = None,
                       seed: int | None = None) -> GlobalFrame:
    """Assemble the global operator for a spec.

    Either pass ``params`` (one array per learnable block, keyed by (j, k),
    stored orientation as in :func:`deepframe.archspec.block_table`) or a
    ``seed`` for Gaussian initialization with per-block scale 1/sqrt(fan-in).
    """
    blocks = tuple(block_table(spec))
    learnable = [b for b in blocks if b.role == "learnable"]
    entries_cache: dict = {}

    if params is None:
        if seed is None:
            raise FrameBuildError("random initialization needs an explicit seed")
        rng = np.random.default_rng(seed)
        params = {(b.row, b.col): _init_block(b, rng) for b in learnable}
    else:
        errors = []
        want = {(b.row, b.col): b.shape for b in learnable}
        for key in sorted(want):
            if key not in params:
                errors.append(f"block {key}: missing parameters")
            else:
                got = np.asarray(params[key]).shape
                if got != want[key]:
                    errors.append(f"block {key}: expected shape {want[key]}, got {got}")
        for key in sorted(set(params) - set(want)):
            errors.append(f"block {key}: spec has no learnable block there")
        if errors:
            raise FrameBuildError("; ".join(errors))
        params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    placed: dict[tuple[int, int], np.ndarray] = {}
    support: dict[tuple[int, int], np.ndarray] = {}
    for b in blocks:
        key = (b.row, b.col)
        if b.role == "identity":
            eye = np.eye(b.placed_shape[0])
            placed[key] = eye if b.is_diagonal else -eye
        else:
            placed[key] = _place(b, params[key], entries_cache)
        support[key] = _support_pattern(b, entries_cache)

    for b in blocks:
        if b.is_diagonal:
            diag = placed[(b.row, b.col)]
            norms = np.linalg.norm(diag, axis=0)
            dead = np.nonzero(norms == 0.0)[0]
            if dead.size:
                raise FrameBuildError(
                    f"diagonal block ({b.row}, {b.col}) has zero columns at "
                    f"{dead.tolist()}"
                )

    return GlobalFrame(spec=spec, blocks=blocks, params=params,
                       placed=placed, support=support)


# ---------------------------------------------------------------------------
# normalization


class NormalizationError(ValueError):
    """A global column had zero norm and cannot be normalized."""


@dataclass
class NormalizationState:
    """Column-magnitude bookkeeping of a frame.

    ``block_norms[(i, j)]`` holds the per-column norms of the placed block
    at (i, j); ``col_norms[j]`` the global column norms of group j, so that
    col_norms[j]**2 == sum_i block_norms[(i, j)]**2.
    """

    block_norms: dict[tuple[int, int], np.ndarray]
    col_norms: dict[int, np.ndarray]


def normalize(frame: GlobalFrame) -> tuple[GlobalFrame, NormalizationState]:
    """Column-normalize the global operator.

    Returns a value-only frame (empty ``params``) whose placed blocks carry
    unit global column norms, together with the per-block magnitude state.
    """
    block_norms: dict[tuple[int, int], np.ndarray] = {}
    col_norms: dict[int, np.ndarray] = {}
    for j in range(frame.depth):
        total = np.zeros(frame.col_dims[j])
        for i in frame.rows_for_col(j):
            blk = frame.placed[(i, j)]
            sq = np.einsum("ij,ij->j", blk, blk)
            block_norms[(i, j)] = np.sqrt(sq)
            total += sq
        norms = np.sqrt(total)
        dead = np.nonzero(norms == 0.0)[0]
        if dead.size:
            raise NormalizationError(
                f"layer {j}: columns {dead.tolist()} of the global operator "
                f"have zero norm"
            )
        col_norms[j] = norms

    placed = {
        (i, j): frame.placed[(i, j)] / col_norms[j]
        for (i, j) in frame.placed
    }
    normalized = GlobalFrame(
        spec=frame.spec,
        blocks=frame.blocks,
        params={},
        placed=placed,
        support=dict(frame.support),
        normalized=True,
    )
    return normalized, NormalizationState(block_norms=block_norms, col_norms=col_norms)


# ---------------------------------------------------------------------------
# Gram structure


@dataclass
class GramStructure:
    """Block representation of G = B^T B.

    ``blocks`` holds the upper block triangle (j <= j'); pairs of column
    groups sharing no row group are structural zero blocks and are simply
    absent. ``offdiag_count`` is the number of structurally nonzero
    off-diagonal entries of G (support overlap, independent of parameter
    values); ``trace`` is Tr(G).
    """

    blocks: dict[tuple[int, int], np.ndarray]
    col_dims: tuple[int, ...]
    trace: float
    offdiag_count: int

    @property
    def total_cols(self) -> int:
        return sum(self.col_dims)

    def full(self) -> np.ndarray:
        n = self.total_cols
        offs = np.concatenate(([0], np.cumsum(self.col_dims))).astype(int)
        out = np.zeros((n, n))
        for (j, k), blk in self.blocks.items():
            out[offs[j]:offs[j + 1], offs[k]:offs[k + 1]] = blk
            if j != k:
                out[offs[k]:offs[k + 1], offs[j]:offs[j + 1]] = blk.T
        return out

    def frobenius_sq(self) -> float:
        total = 0.0
        for (j, k), blk in self.blocks.items():
            contrib = float(np.sum(blk * blk))
            total += contrib if j == k else 2.0 * contrib
        return total


def gram(frame: GlobalFrame) -> GramStructure:
    """G = B^T B computed block-pair-wise, without materializing B."""
    depth = frame.depth
    rows_of = {j: frame.rows_for_col(j) for j in range(depth)}
    blocks: dict[tuple[int, int], np.ndarray] = {}
    offdiag = 0
    trace = 0.0
    for j in range(depth):
        for k in range(j, depth):
            shared = sorted(set(rows_of[j]) & set(rows_of[k]))
            if not shared:
                continue
            acc = np.zeros((frame.col_dims[j], frame.col_dims[k]))
            pattern = np.zeros_like(acc, dtype=bool)
            for i in shared:
                acc += frame.placed[(i, j)].T @ frame.placed[(i, k)]
                pattern |= (frame.support[(i, j)].T @ frame.support[(i, k)]) > 0
            blocks[(j, k)] = acc
            if j == k:
                trace += float(np.trace(acc))
                offdiag += int(pattern.sum()) - int(np.diagonal(pattern).sum())
            else:
                offdiag += 2 * int(pattern.sum())
    return GramStructure(blocks=blocks, col_dims=frame.col_dims,
                         trace=trace, offdiag_count=offdiag)


def chain_gram_closed_form(frame: GlobalFrame) -> dict[tuple[int, int], np.ndarray]:
    """Closed-form Gram blocks of a normalized chain operator.

    For a chain with diagonal blocks B_j (column magnitudes C_j) and
    identity couplings, the normalized Gram has

        G_jj     = D_j (B_j^T B_j + I) D_j          (last layer: no +I)
        G_j,j+1  = -D_j B_{j+1} D_{j+1}

    with D_j = diag(1 / n_j) and n_j the global column norms. Only defined
    for unnormalized chain frames built from parameters; used as a
    cross-check of :func:`gram`.
    """
    if not frame.spec.is_chain:
        raise ValueError("closed-form Gram blocks apply to chain frames only")
    depth = frame.depth
    out: dict[tuple[int, int], np.ndarray] = {}
    n = {j: frame.column_norms(j) for j in range(depth)}
    for j in range(depth):
        b = frame.placed[(j, j)]
        inner = b.T @ b
        if j + 1 < depth:
            inner = inner + np.eye(inner.shape[0])
        out[(j, j)] = inner / np.outer(n[j], n[j])
        if j + 1 < depth:
            b_next = frame.placed[(j + 1, j + 1)]
            out[(j, j + 1)] = -b_next / np.outer(n[j], n[j + 1])
    return out


__all__ = [
    "FrameBuildError",
    "GlobalFrame",
    "GramStructure",
    "MATERIALIZE_COL_LIMIT",
    "NormalizationError",
    "NormalizationState",
    "build_global_frame",
    "chain_gram_closed_form",
    "conv_gram_nonzeros",
    "conv_matrix_from_entries",
    "conv_operator_entries",
    "gram",
    "materialize_conv_operator",
    "normalize",
]
