"""Exact and multiresolution (FastDTW) dynamic time warping on 1-D series.

Local distance is the absolute difference, steps are {(+1,0), (0,+1), (+1,+1)}
and indexes are zero-based. The backtrace breaks cost ties deterministically:
diagonal first, then the step that advanced the sample index, then the step
that advanced the reference index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from dtwsoh.errors import EmptySeries, InvalidConfig, NonFiniteValue


@dataclass(frozen=True, eq=False)
class WarpPath:
    """Ordered ``(k_r, k_s)`` index pairs plus the accumulated distance."""

    pairs: np.ndarray  # (Q, 2) int64
    cost: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        arr.setflags(write=False)
        object.__setattr__(self, "pairs", arr)
        object.__setattr__(self, "cost", float(self.cost))

    def __len__(self) -> int:
        return int(self.pairs.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WarpPath):
            return NotImplemented
        return self.cost == other.cost and np.array_equal(self.pairs, other.pairs)

    __hash__ = None  # type: ignore[assignment]

    @property
    def ref_idx(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def sample_idx(self) -> np.ndarray:
        return self.pairs[:, 1]

    def as_tuples(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a, b in self.pairs]

    def transpose(self) -> "WarpPath":
        return WarpPath(self.pairs[:, ::-1].copy(), self.cost)


@dataclass(frozen=True)
class FastDtwConfig:
    radius: int = 10
    min_size: int = 16

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise InvalidConfig(f"radius must be >= 0, got {self.radius}")
        if self.min_size < 2:
            raise InvalidConfig(f"min_size must be >= 2, got {self.min_size}")


@dataclass(frozen=True)
class Violation:
    kind: str  # BoundaryViolation | ContinuityViolation | MonotonicityViolation | CoverageViolation | LengthViolation
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


# --------------------------------------------------------------------------
# kernels

@njit(cache=True)
def _accumulate(x, y, lo, hi):
    # cells outside the per-row column band [lo[i], hi[i]] stay +inf
    m, n = x.shape[0], y.shape[0]
    acc = np.full((m, n), np.inf)
    for i in range(m):
        for j in range(lo[i], hi[i] + 1):
            d = abs(x[i] - y[j])
            if i == 0 and j == 0:
                acc[0, 0] = d
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = acc[i - 1, j - 1]
            if j > 0 and acc[i, j - 1] < best:
                best = acc[i, j - 1]
            if i > 0 and acc[i - 1, j] < best:
                best = acc[i - 1, j]
            acc[i, j] = best + d
    return acc


@njit(cache=True)
def _backtrace(acc):
    m, n = acc.shape
    out = np.empty((m + n - 1, 2), dtype=np.int64)
    i, j = m - 1, n - 1
    q = 0
    out[q, 0] = i
    out[q, 1] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = acc[i - 1, j - 1]
            left = acc[i, j - 1]
            up = acc[i - 1, j]
            if diag <= left and diag <= up:
                i -= 1
                j -= 1
            elif left <= up:
                j -= 1
            else:
                i -= 1
        q += 1
        out[q, 0] = i
        out[q, 1] = j
    return out[: q + 1][::-1].copy()


def _as_series(values, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64).ravel())
    if arr.size == 0:
        raise EmptySeries(f"{name} series is empty")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} series has non-finite value at index {int(np.flatnonzero(~np.isfinite(arr))[0])}")
    return arr


def _solve(x: np.ndarray, y: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> WarpPath:
    acc = _accumulate(x, y, lo, hi)
    return WarpPath(_backtrace(acc), acc[-1, -1])


def dtw_exact(reference, sample) -> WarpPath:
    """Full O(M*N) dynamic program; returns the minimum-cost warping path."""
    x = _as_series(reference, "reference")
    y = _as_series(sample, "sample")
    m, n = x.size, y.size
    return _solve(x, y, np.zeros(m, dtype=np.int64), np.full(m, n - 1, dtype=np.int64))


def coarsen(series: np.ndarray) -> np.ndarray:
    """Halve resolution by averaging adjacent pairs; an odd tail element is kept as is."""
    n = series.shape[0]
    half = (series[0 : n - 1 : 2] + series[1:n:2]) / 2.0
    if n % 2:
        half = np.append(half, series[-1])
    return half


def expand_window(coarse_pairs: np.ndarray, m: int, n: int, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Project a coarse path onto the (m, n) grid, widened by ``radius`` coarse cells.

    Returns per-row inclusive column bounds ``(lo, hi)``.
    """
    cm = (m + 1) // 2
    cn = (n + 1) // 2
    rows = coarse_pairs[:, 0]
    cols = coarse_pairs[:, 1]
    pmin = np.full(cm, cn, dtype=np.int64)
    pmax = np.full(cm, -1, dtype=np.int64)
    np.minimum.at(pmin, rows, cols)
    np.maximum.at(pmax, rows, cols)

    r = min(radius, cm)
    clo = pmin.copy()
    chi = pmax.copy()
    for d in range(1, r + 1):
        clo[d:] = np.minimum(clo[d:], pmin[:-d])
        clo[:-d] = np.minimum(clo[:-d], pmin[d:])
        chi[d:] = np.maximum(chi[d:], pmax[:-d])
        chi[:-d] = np.maximum(chi[:-d], pmax[d:])
    clo = np.clip(clo - radius, 0, cn - 1)
    chi = np.clip(chi + radius, 0, cn - 1)

    coarse_row = np.arange(m) // 2
    lo = 2 * clo[coarse_row]
    hi = np.minimum(2 * chi[coarse_row] + 1, n - 1)
    return lo.astype(np.int64), hi.astype(np.int64)


def _fastdtw(x: np.ndarray, y: np.ndarray, radius: int, min_size: int) -> WarpPath:
    m, n = x.size, y.size
    if min(m, n) < min_size or max(m, n) <= radius + 2:
        return _solve(x, y, np.zeros(m, dtype=np.int64), np.full(m, n - 1, dtype=np.int64))
    coarse = _fastdtw(coarsen(x), coarsen(y), radius, min_size)
    lo, hi = expand_window(coarse.pairs, m, n, radius)
    return _solve(x, y, lo, hi)


def fastdtw(reference, sample, config: FastDtwConfig | None = None) -> WarpPath:
    """Approximate DTW: coarsen, solve, project the path up, refine inside the corridor.

    Series shorter than ``config.min_size`` are aligned exactly.
    """
    cfg = config or FastDtwConfig()
    x = _as_series(reference, "reference")
    y = _as_series(sample, "sample")
    return _fastdtw(x, y, cfg.radius, cfg.min_size)


def path_cost(reference, sample, pairs) -> float:
    """Sum of |reference[k_r] - sample[k_s]| along ``pairs``."""
    x = np.asarray(reference, dtype=np.float64)
    y = np.asarray(sample, dtype=np.float64)
    p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    total = 0.0
    for a, b in p:
        total += abs(x[a] - y[b])
    return total


def validate_path(path: WarpPath | np.ndarray, m: int, n: int) -> list[Violation]:
    """List every broken warping-path invariant for a (m, n) alignment; empty when valid.

    Coverage and length are consequences of the boundary, continuity and
    monotonicity rules, so they are only checked once those hold.
    """
    pairs = path.pairs if isinstance(path, WarpPath) else np.asarray(path, dtype=np.int64).reshape(-1, 2)
    out: list[Violation] = []
    if pairs.shape[0] == 0:
        return [Violation("BoundaryViolation", "path is empty")]

    first = tuple(int(v) for v in pairs[0])
    last = tuple(int(v) for v in pairs[-1])
    if first != (0, 0):
        out.append(Violation("BoundaryViolation", f"path starts at {first}, expected (0, 0)"))
    if last != (m - 1, n - 1):
        out.append(Violation("BoundaryViolation", f"path ends at {last}, expected {(m - 1, n - 1)}"))
    oob = np.flatnonzero((pairs[:, 0] < 0) | (pairs[:, 0] >= m) | (pairs[:, 1] < 0) | (pairs[:, 1] >= n))
    if oob.size:
        out.append(Violation("BoundaryViolation",
                             f"pair {int(oob[0])} {tuple(int(v) for v in pairs[oob[0]])} outside {m}x{n} grid"))

    steps = np.diff(pairs, axis=0)
    back = np.flatnonzero((steps < 0).any(axis=1))
    if back.size:
        q = int(back[0])
        out.append(Violation("MonotonicityViolation",
                             f"step {q}->{q + 1} moves backwards by {tuple(int(v) for v in steps[q])}"))
    bad = np.flatnonzero(((steps > 1).any(axis=1)) | ((steps == 0).all(axis=1)))
    if bad.size:
        q = int(bad[0])
        out.append(Violation("ContinuityViolation",
                             f"step {q}->{q + 1} is {tuple(int(v) for v in steps[q])}, "
                             "allowed steps are (1,0), (0,1), (1,1)"))
    if out:
        return out

    missing_r = np.setdiff1d(np.arange(m), pairs[:, 0])
    missing_s = np.setdiff1d(np.arange(n), pairs[:, 1])
    if missing_r.size or missing_s.size:
        out.append(Violation("CoverageViolation",
                             f"unused indexes: reference {missing_r[:5].tolist()}, sample {missing_s[:5].tolist()}"))
    q = pairs.shape[0]
    if not max(m, n) <= q <= m + n - 1:
        out.append(Violation("LengthViolation", f"path length {q} outside [{max(m, n)}, {m + n - 1}]"))
    return out
