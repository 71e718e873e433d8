"""Independent reference computations used to derive and check expected values.

Nothing here imports the package's numeric code paths.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


def enumerate_paths(m: int, n: int):
    """Every monotone, continuous warping path from (0,0) to (m-1,n-1)."""
    def rec(i, j):
        if (i, j) == (m - 1, n - 1):
            yield [(i, j)]
            return
        for di, dj in ((1, 1), (0, 1), (1, 0)):
            a, b = i + di, j + dj
            if a < m and b < n:
                for tail in rec(a, b):
                    yield [(i, j)] + tail
    yield from rec(0, 0)


def brute_force_dtw(x, y):
    """Minimum cost and all minimum-cost paths by exhaustive enumeration."""
    best, winners = math.inf, []
    for path in enumerate_paths(len(x), len(y)):
        cost = sum(abs(x[i] - y[j]) for i, j in path)
        if cost < best:
            best, winners = cost, [path]
        elif cost == best:
            winners.append(path)
    return best, winners


def memo_dtw_cost(x, y) -> float:
    """Top-down recursion with memoization over the three-step pattern."""
    x = tuple(float(v) for v in x)
    y = tuple(float(v) for v in y)

    @lru_cache(maxsize=None)
    def cost(i, j):
        d = abs(x[i] - y[j])
        if i == 0 and j == 0:
            return d
        options = []
        if i > 0 and j > 0:
            options.append(cost(i - 1, j - 1))
        if i > 0:
            options.append(cost(i - 1, j))
        if j > 0:
            options.append(cost(i, j - 1))
        return d + min(options)

    return cost(len(x) - 1, len(y) - 1)


def groupby_mean(pairs, m: int) -> list[float]:
    groups: dict[int, list[int]] = {}
    for kr, ks in pairs:
        groups.setdefault(int(kr), []).append(int(ks))
    return [sum(groups[k]) / len(groups[k]) for k in range(m)]


def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def reference_cell(Wf, Wi, Wc, Wo, Uf, Ui, Uc, Uo, bf, bi, bc, bo, x, h, c):
    """Scalar-loop LSTM step with separate gate matrices (W: in x H, U: H x H)."""
    H = len(h)
    nin = len(x)

    def pre(W, U, b, k):
        return sum(x[a] * W[a][k] for a in range(nin)) + sum(h[a] * U[a][k] for a in range(H)) + b[k]

    h_new, c_new = [], []
    for k in range(H):
        f = _sig(pre(Wf, Uf, bf, k))
        i = _sig(pre(Wi, Ui, bi, k))
        g = math.tanh(pre(Wc, Uc, bc, k))
        o = _sig(pre(Wo, Uo, bo, k))
        ck = f * c[k] + i * g
        c_new.append(ck)
        h_new.append(o * math.tanh(ck))
    return h_new, c_new


def _split(W, U, b):
    H = U.shape[0]
    return ([W[:, k * H:(k + 1) * H].tolist() for k in range(4)]
            + [U[:, k * H:(k + 1) * H].tolist() for k in range(4)]
            + [b[k * H:(k + 1) * H].tolist() for k in range(4)])


def reference_model_forward(params: dict[str, np.ndarray], X) -> float:
    """Whole-network forward pass built on :func:`reference_cell`."""
    layers = []
    for tag in ("l1", "l2"):
        layers.append(_split(params[f"{tag}.W"], params[f"{tag}.U"], params[f"{tag}.b"]))
    seq = [list(map(float, row)) for row in np.asarray(X)]
    for mats in layers:
        H = len(mats[8])
        h, c = [0.0] * H, [0.0] * H
        out = []
        for x in seq:
            h, c = reference_cell(*mats, x, h, c)
            out.append(h)
        seq = out
    last = seq[-1]
    Wd, bd = params["dense.W"], params["dense.b"]
    act = [max(0.0, sum(last[a] * Wd[a, k] for a in range(len(last))) + bd[k]) for k in range(len(bd))]
    Wh, bh = params["head.W"], params["head.b"]
    return sum(act[k] * Wh[k, 0] for k in range(len(act))) + float(bh[0])
