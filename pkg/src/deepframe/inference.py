"""Sparse inference over global operators.

Four ways to produce per-layer codes for an input signal, from cheapest to
most exact: a single thresholded forward pass, per-layer sparse coding
down a chain, proximal gradient descent on a single shallow problem, and
block coordinate descent on the global objective

    1/2 ||x - B_00 w_0||^2
        + sum_{j>=1} 1/2 ||B_jj w_j - sum_{k<j} B_jk^T w_k||^2
        + sum_j lam_j * sum(w_j),   codes constrained nonnegative.

The forward pass and the first block-descent sweep from zero coincide: the
sweep evaluates each layer's own row at the codes updated so far within
the sweep, and rows below it at the sweep's starting state. Later sweeps
use full partial gradients, so with automatic step sizes every recorded
objective value decreases from the first one on.
"""

from __future__ import annotations

import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .framebuild import GlobalFrame


class UnsupportedMethodError(ValueError):
    """The requested inference method does not apply to this structure."""


class DivergenceError(RuntimeError):
    """An iterate went non-finite; the message names the failing cycle."""


def prox_nonneg_soft_threshold(v: np.ndarray, lam: float) -> np.ndarray:
    """Nonnegative soft thresholding: elementwise max(v - lam, 0).

    This is the proximal operator of lam * sum(w) plus the nonnegativity
    indicator, the penalty used throughout this module.
    """
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    return np.maximum(np.asarray(v, dtype=np.float64) - lam, 0.0)


def largest_sq_singular_value(mat: np.ndarray, tol: float = 1e-13,
                              max_iters: int = 300) -> float:
    """Largest eigenvalue of mat^T mat by power iteration.

    Deterministic start (ones vector, then a fixed perturbation if that
    lands in a null space). The estimate converges from below for the
    dominant eigenvalue, so callers that need a guaranteed bound should
    inflate it slightly; see :func:`safe_step`.
    """
    mat = np.asarray(mat, dtype=np.float64)
    n = mat.shape[1]
    if n == 0:
        return 0.0
    v = np.ones(n) / math.sqrt(n)
    prev = 0.0
    for it in range(max_iters):
        w = mat.T @ (mat @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            if it == 0:
                v = np.arange(1.0, n + 1.0)
                v /= np.linalg.norm(v)
                continue
            return 0.0
        v = w / norm
        est = float(v @ (mat.T @ (mat @ v)))
        if abs(est - prev) <= tol * max(est, 1.0):
            return est
        prev = est
    return prev


STEP_MARGIN = 1.0 + 1e-6


def safe_step(mat: np.ndarray) -> float:
    """A step size certainly below 1/L for gradients of 1/2||mat w - y||^2."""
    lip = largest_sq_singular_value(mat)
    if lip == 0.0:
        return 1.0
    return 1.0 / (lip * STEP_MARGIN)


@dataclass
class InferenceResult:
    """Codes plus bookkeeping from one inference run.

    ``objectives`` records the global objective after every cycle (or
    iteration, for the shallow solver); ``sparsity`` is the fraction of
    exactly-zero entries per layer.
    """

    codes: list[np.ndarray]
    objectives: list[float]
    sparsity: list[float]
    wall_clock: float
    method: str

    @property
    def final_objective(self) -> float:
        return self.objectives[-1]


@dataclass
class IstaResult:
    """Output of the shallow solver; ``step`` is the step size used."""

    codes: np.ndarray
    objectives: list[float]
    step: float
    objective_increased: bool = False


def _shallow_objective(B: np.ndarray, x: np.ndarray, w: np.ndarray, lam: float) -> float:
    if np.any(w < 0):
        return math.inf
    with np.errstate(over="ignore", invalid="ignore"):
        r = B @ w - x
        return 0.5 * float(r @ r) + lam * float(np.sum(w))


def shallow_ista(x: np.ndarray, B: np.ndarray, lam: float,
                 gamma: float | None = None, iters: int = 100) -> IstaResult:
    """Proximal gradient descent on one nonnegative sparse coding problem.

    Minimizes 1/2||x - B w||^2 + lam*sum(w) over w >= 0 from w = 0. With
    ``gamma`` unset, a step just under 1/L is computed automatically and
    the objective never increases. An explicit oversized step is allowed
    (one iteration with gamma=1 is the classic thresholding pursuit) but
    any objective increase is flagged on the result.
    """
    B = np.asarray(B, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if iters < 1:
        raise ValueError("iteration budget must be at least 1")
    if x.shape != (B.shape[0],):
        raise ValueError(f"input has shape {x.shape}, operator rows {B.shape[0]}")
    step = safe_step(B) if gamma is None else float(gamma)
    w = np.zeros(B.shape[1])
    objectives: list[float] = []
    increased = False
    prev = _shallow_objective(B, x, w, lam)
    for _ in range(iters):
        grad = B.T @ (B @ w - x)
        w = prox_nonneg_soft_threshold(w - step * grad, step * lam)
        obj = _shallow_objective(B, x, w, lam)
        if obj > prev:
            increased = True
        objectives.append(obj)
        prev = obj
    return IstaResult(codes=w, objectives=objectives, step=step,
                      objective_increased=increased)


# ---------------------------------------------------------------------------
# global problems


def _per_layer(value, depth: int, what: str) -> list[float]:
    if np.isscalar(value):
        vals = [float(value)] * depth
    else:
        vals = [float(v) for v in value]
        if len(vals) != depth:
            raise ValueError(f"expected {depth} {what}, got {len(vals)}")
    for v in vals:
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{what} must be finite and nonnegative")
    return vals


def _check_input(frame: GlobalFrame, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != frame.row_dims[0]:
        raise ValueError(
            f"input has dimension {x.shape[0]}, frame expects {frame.row_dims[0]}"
        )
    return x


def _upstream_drive(frame: GlobalFrame, j: int, codes: list[np.ndarray],
                    x: np.ndarray) -> np.ndarray:
    """The signal row j's diagonal block should reconstruct.

    Row 0 reconstructs the input itself; row j >= 1 reconstructs the
    accumulated couplings from earlier layers. Shared by the forward pass,
    the objective, and block descent so they agree bitwise.
    """
    if j == 0:
        return x
    acc = np.zeros(frame.row_dims[j])
    for k in frame.cols_for_row(j):
        if k < j:
            acc -= frame.placed[(j, k)] @ codes[k]
    return acc


def _row_residual(frame: GlobalFrame, i: int, codes: list[np.ndarray],
                  x: np.ndarray) -> np.ndarray:
    return frame.placed[(i, i)] @ codes[i] - _upstream_drive(frame, i, codes, x)


def objective_value(codes: list[np.ndarray], frame: GlobalFrame,
                    x: np.ndarray, lam) -> float:
    """The global objective at the given codes; inf if any entry is negative."""
    x = _check_input(frame, x)
    lams = _per_layer(lam, frame.depth, "penalty weights")
    if len(codes) != frame.depth:
        raise ValueError(f"expected {frame.depth} code vectors, got {len(codes)}")
    total = 0.0
    for j, w in enumerate(codes):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (frame.col_dims[j],):
            raise ValueError(
                f"layer {j}: code has shape {w.shape}, expected ({frame.col_dims[j]},)"
            )
        if np.any(w < 0):
            return math.inf
        total += lams[j] * float(np.sum(w))
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(frame.depth):
            r = _row_residual(frame, i, codes, x)
            total += 0.5 * float(r @ r)
    return total


def _sparsity(codes: list[np.ndarray]) -> list[float]:
    return [float(np.mean(w == 0.0)) for w in codes]


def feed_forward(x: np.ndarray, frame: GlobalFrame, lam) -> InferenceResult:
    """One thresholded forward pass through the architecture.

    Layer by layer, w_j = prox(B_jj^T u_j, lam_j) where u_j collects the
    couplings from already-computed codes (u_0 is the input). On a chain
    this is w_j = prox(B_j^T w_{j-1}); skip structures accumulate their
    extra couplings into u_j first.
    """
    start = time.perf_counter()
    x = _check_input(frame, x)
    lams = _per_layer(lam, frame.depth, "penalty weights")
    codes: list[np.ndarray] = []
    for j in range(frame.depth):
        u = _upstream_drive(frame, j, codes, x)
        t = frame.placed[(j, j)].T @ u
        codes.append(prox_nonneg_soft_threshold(t, lams[j]))
    obj = objective_value(codes, frame, x, lams)
    return InferenceResult(codes=codes, objectives=[obj],
                           sparsity=_sparsity(codes),
                           wall_clock=time.perf_counter() - start,
                           method="feed_forward")


def layered_basis_pursuit(x: np.ndarray, frame: GlobalFrame, lam,
                          budget: int = 100) -> InferenceResult:
    """Solve a chain layer by layer, each to its own optimum.

    Layer j's codes solve the shallow problem with the previous layer's
    codes as the target signal, using :func:`shallow_ista` for ``budget``
    iterations. Only defined for chain connectivity.
    """
    start = time.perf_counter()
    if not frame.spec.is_chain:
        raise UnsupportedMethodError(
            "layered basis pursuit is defined layer-by-layer on chains; "
            f"this spec has {frame.spec.connectivity.kind!r} connectivity"
        )
    x = _check_input(frame, x)
    lams = _per_layer(lam, frame.depth, "penalty weights")
    codes: list[np.ndarray] = []
    target = x
    for j in range(frame.depth):
        res = shallow_ista(target, frame.placed[(j, j)], lams[j], iters=budget)
        codes.append(res.codes)
        target = res.codes
    obj = objective_value(codes, frame, x, lams)
    return InferenceResult(codes=codes, objectives=[obj],
                           sparsity=_sparsity(codes),
                           wall_clock=time.perf_counter() - start,
                           method="layered_bp")


def block_step_sizes(frame: GlobalFrame) -> list[float]:
    """Automatic per-layer steps, just under 1/L_j of each column block."""
    return [safe_step(frame.column_block(j)) for j in range(frame.depth)]


def bcd_inference(x: np.ndarray, frame: GlobalFrame, lam, cycles: int = 100,
                  gamma="auto", momentum: float = 0.0,
                  init: Sequence[np.ndarray] | None = None) -> InferenceResult:
    """Block coordinate descent on the global objective.

    Cycles sweep the layers in ascending order. The first sweep evaluates
    each layer's feedback rows (rows below its own) at the sweep's
    starting state, which makes a single sweep from zero codes with
    gamma=1 coincide exactly with :func:`feed_forward`; subsequent sweeps
    use full partial gradients. ``gamma`` is ``"auto"`` (per-layer steps
    just under 1/L_j), a scalar, or a per-layer sequence. ``momentum``
    adds extrapolation against the previous cycle's codes (off by
    default; monotonicity is only guaranteed without it). ``init``
    replaces the default all-zero starting codes with per-layer arrays;
    a custom start uses fresh residuals from the first sweep onward.
    """
    start = time.perf_counter()
    x = _check_input(frame, x)
    depth = frame.depth
    lams = _per_layer(lam, depth, "penalty weights")
    if cycles < 1:
        raise ValueError("cycle budget must be at least 1")
    if isinstance(gamma, str):
        if gamma != "auto":
            raise ValueError(f"unknown step mode {gamma!r}")
        steps = block_step_sizes(frame)
    else:
        steps = _per_layer(gamma, depth, "step sizes")

    if init is None:
        codes = [np.zeros(frame.col_dims[j]) for j in range(depth)]
    else:
        if len(init) != depth:
            raise ValueError(f"expected {depth} initial code blocks, got {len(init)}")
        codes = []
        for j, block in enumerate(init):
            arr = np.asarray(block, dtype=float).reshape(-1)
            if arr.shape[0] != frame.col_dims[j]:
                raise ValueError(
                    f"initial codes for layer {j} have length {arr.shape[0]}, "
                    f"expected {frame.col_dims[j]}"
                )
            if np.any(arr < 0):
                raise ValueError(f"initial codes for layer {j} must be nonnegative")
            codes.append(arr.copy())
    prev_codes = [c.copy() for c in codes]
    rows_below = {j: [i for i in frame.rows_for_col(j) if i > j] for j in range(depth)}
    objectives: list[float] = []
    first_sweep_stale = init is None

    for cycle in range(cycles):
        if cycle == 0 and first_sweep_stale:
            stale = {i: _row_residual(frame, i, codes, x) for i in range(1, depth)}
        for j in range(depth):
            if momentum != 0.0 and cycle > 0:
                point = [c.copy() for c in codes]
                point[j] = codes[j] + momentum * (codes[j] - prev_codes[j])
            else:
                point = codes
            grad = frame.placed[(j, j)].T @ _row_residual(frame, j, point, x)
            for i in rows_below[j]:
                if cycle == 0 and first_sweep_stale:
                    r_i = stale[i]
                else:
                    r_i = _row_residual(frame, i, point, x)
                grad += frame.placed[(i, j)].T @ r_i
            if momentum != 0.0 and cycle > 0:
                prev_codes[j] = codes[j]
                base = point[j]
            else:
                base = codes[j]
            codes[j] = prox_nonneg_soft_threshold(base - steps[j] * grad,
                                                  steps[j] * lams[j])
        obj = objective_value(codes, frame, x, lams)
        if not math.isfinite(obj) or any(not np.all(np.isfinite(c)) for c in codes):
            raise DivergenceError(f"iterates went non-finite at cycle {cycle + 1}")
        objectives.append(obj)

    return InferenceResult(codes=codes, objectives=objectives,
                           sparsity=_sparsity(codes),
                           wall_clock=time.perf_counter() - start,
                           method="bcd")


__all__ = [
    "DivergenceError",
    "InferenceResult",
    "IstaResult",
    "UnsupportedMethodError",
    "bcd_inference",
    "block_step_sizes",
    "feed_forward",
    "largest_sq_singular_value",
    "layered_basis_pursuit",
    "objective_value",
    "prox_nonneg_soft_threshold",
    "safe_step",
]
