"""Slow, obviously-correct reference implementations used only by the tests."""

import math

import numpy as np


def ranks_oracle(dists):
    # pure-python: sort pivot indices by (distance, index), assign 1-based ranks
    order = sorted(range(len(dists)), key=lambda i: (dists[i], i))
    ranks = [0] * len(dists)
    for r, i in enumerate(order, 1):
        ranks[i] = r
    return ranks


def hamming_oracle(bits_x, bits_y):
    return sum(1 for u, v in zip(bits_x, bits_y) if bool(u) != bool(v))


def levenshtein_oracle(x: str, y: str) -> int:
    # full quadratic table
    n, m = len(x), len(y)
    t = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        t[i][0] = i
    for j in range(m + 1):
        t[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            t[i][j] = min(t[i - 1][j] + 1, t[i][j - 1] + 1, t[i - 1][j - 1] + (x[i - 1] != y[j - 1]))
    return t[n][m]


def norm_lev_oracle(x, y):
    if not x and not y:
        return 0.0
    return levenshtein_oracle(x, y) / max(len(x), len(y))


def cosine_oracle(x: dict, y: dict, dim: int):
    u = np.zeros(dim)
    v = np.zeros(dim)
    for i, a in x.items():
        u[i] = a
    for i, a in y.items():
        v[i] = a
    return 1.0 - float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))


def sqfd_oracle(cx, wx, cy, wy, alpha=1.0):
    reps = np.vstack([cx, cy])
    w = np.concatenate([wx, -np.asarray(wy)])
    k = len(reps)
    A = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            A[i, j] = 1.0 / (alpha + math.sqrt(float(((reps[i] - reps[j]) ** 2).sum())))
    return math.sqrt(max(float(w @ A @ w), 0.0))


def kl_oracle(x, y):
    return sum(a * math.log(a / b) for a, b in zip(x, y))


def js_oracle(x, y):
    return 0.5 * sum(a * math.log(a) + b * math.log(b) - (a + b) * math.log((a + b) / 2) for a, b in zip(x, y))


def knn_oracle(data: np.ndarray, q: np.ndarray, k: int):
    d = np.sqrt(((data - q) ** 2).sum(axis=1))
    order = sorted(range(len(d)), key=lambda i: (d[i], i))[:k]
    return np.array(order), d[order]
