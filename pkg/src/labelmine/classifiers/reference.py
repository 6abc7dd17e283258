"""Pure-numpy training kernels: the fallback backend.

These implement exactly the same training protocols as the compiled
extension in `_speedups`.  The random-forest builder follows a shared
deterministic protocol (counter-based splitmix64 draws, preorder
depth-first construction, exact integer split comparisons), so forests are
bit-identical across backends; the gradient-trained models use the same
operation order and float32 arithmetic, so they agree up to BLAS rounding.
"""

from __future__ import annotations

import math

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1

# The exact int64 split comparison (and the float128 prefilter) need room
# for n**5/16; keep node sizes small.  Training sets here are ~200 rows.
MAX_RF_ROWS = 2000


# ---------------------------------------------------------------------------
# multilayer perceptron: full-batch gradient descent on softmax cross-entropy
# ---------------------------------------------------------------------------

def mlp_loss_and_grads(X, y, W1, b1, W2, b2):
    """Mean cross-entropy loss and its exact gradients (dtype-generic)."""
    n = X.shape[0]
    rows = np.arange(n)
    Z1 = X @ W1 + b1
    H = np.maximum(Z1, 0)
    S = H @ W2 + b2
    S = S - S.max(axis=1, keepdims=True)
    P = np.exp(S)
    P /= P.sum(axis=1, keepdims=True)
    loss = -float(np.mean(np.log(P[rows, y])))
    G = P.copy()
    G[rows, y] -= 1
    G *= np.asarray(1.0 / n, dtype=X.dtype)
    dW2 = H.T @ G
    db2 = G.sum(axis=0)
    dH = G @ W2.T
    dH[Z1 <= 0] = 0
    dW1 = X.T @ dH
    db1 = dH.sum(axis=0)
    return loss, dW1, db1, dW2, db2


def mlp_train(X, y, W1, b1, W2, b2, epochs: int, lr: float):
    """Train in place for `epochs` full-batch gradient steps."""
    n = X.shape[0]
    rows = np.arange(n)
    lr = np.asarray(lr, dtype=X.dtype)
    inv_n = np.asarray(1.0 / n, dtype=X.dtype)
    for _ in range(epochs):
        Z1 = X @ W1 + b1
        H = np.maximum(Z1, 0)
        S = H @ W2 + b2
        S -= S.max(axis=1, keepdims=True)
        P = np.exp(S)
        P /= P.sum(axis=1, keepdims=True)
        P[rows, y] -= 1
        P *= inv_n
        dW2 = H.T @ P
        db2 = P.sum(axis=0)
        dH = P @ W2.T
        dH[Z1 <= 0] = 0
        dW1 = X.T @ dH
        db1 = dH.sum(axis=0)
        W1 -= lr * dW1
        b1 -= lr * db1
        W2 -= lr * dW2
        b2 -= lr * db2


# ---------------------------------------------------------------------------
# linear SVM: one-vs-rest hinge, full-batch subgradient descent
# ---------------------------------------------------------------------------

def svm_train(X, y, W, b, epochs: int, lr: float, l2: float):
    """Train in place; mean hinge subgradient plus L2 penalty each epoch.

    Batch (not per-sample) steps make training invariant to duplicating
    every row, which is part of the classifier contract.
    """
    n = X.shape[0]
    T = np.full((n, W.shape[1]), -1.0, dtype=X.dtype)
    T[np.arange(n), y] = 1.0
    lr = np.asarray(lr, dtype=X.dtype)
    l2 = np.asarray(l2, dtype=X.dtype)
    inv_n = np.asarray(1.0 / n, dtype=X.dtype)
    for _ in range(epochs):
        S = X @ W + b
        viol = (T * S) < 1.0
        G = np.where(viol, -T, 0.0).astype(X.dtype, copy=False)
        G *= inv_n
        dW = X.T @ G
        dW += l2 * W
        db = G.sum(axis=0)
        W -= lr * dW
        b -= lr * db


# ---------------------------------------------------------------------------
# random forest: shared deterministic protocol
# ---------------------------------------------------------------------------

class _SplitMix:
    """Counter-based splitmix64 stream; draw k yields mix(seed + k*golden)."""

    __slots__ = ("seed", "counter")

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self.counter = 0

    def draw_block(self, k: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + k + 1, dtype=np.uint64)
        self.counter += k
        x = np.uint64(self.seed) + idx * np.uint64(_GOLDEN)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIX1)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIX2)
        return x ^ (x >> np.uint64(31))


def _leaf_class(counts: np.ndarray) -> int:
    return int(np.argmax(counts))  # first max: ties go to the lowest class


def rf_build(
    X: np.ndarray,
    y: np.ndarray,
    num_classes: int,
    n_trees: int,
    max_depth: int,
    mtry: int,
    bootstrap: bool,
    seeds: np.ndarray,
    Xq: np.ndarray | None = None,
):
    """Grow a forest; returns packed node arrays (see rf_predict).

    `Xq` (byte-quantized features) is accepted for signature compatibility
    with the compiled kernel, which uses it as a counting-sort fast path;
    the chosen splits are identical either way, so it is ignored here.
    """
    n, d = X.shape
    if n > MAX_RF_ROWS:
        raise ValueError(f"random forest kernel supports at most {MAX_RF_ROWS} rows, got {n}")
    cap = 2 * n + 1
    if max_depth < 60:
        cap = min(cap, 2 ** (max_depth + 1) + 1)
    feature = np.full((n_trees, cap), -1, dtype=np.int32)
    thresh = np.zeros((n_trees, cap), dtype=np.float32)
    left = np.full((n_trees, cap), -1, dtype=np.int32)
    right = np.full((n_trees, cap), -1, dtype=np.int32)
    klass = np.full((n_trees, cap), -1, dtype=np.int32)
    node_count = np.zeros(n_trees, dtype=np.int32)

    for t in range(n_trees):
        stream = _SplitMix(int(seeds[t]))
        if bootstrap:
            samp = (stream.draw_block(n) % np.uint64(n)).astype(np.int64)
        else:
            samp = np.arange(n, dtype=np.int64)
        count = 0
        # stack entries: (sample indices, depth, parent node id, is_left)
        stack = [(samp, 0, -1, False)]
        while stack:
            node_samples, depth, parent, is_left = stack.pop()
            node_id = count
            count += 1
            if parent >= 0:
                if is_left:
                    left[t, parent] = node_id
                else:
                    right[t, parent] = node_id
            counts = np.bincount(y[node_samples], minlength=num_classes)
            n_node = node_samples.shape[0]
            if depth >= max_depth or n_node < 2 or int(counts.max()) == n_node:
                klass[t, node_id] = _leaf_class(counts)
                continue

            feats = _draw_features(stream, d, mtry)
            best = _best_split(X, y, node_samples, feats, num_classes)
            if best is None:
                klass[t, node_id] = _leaf_class(counts)
                continue
            f, thr = best
            feature[t, node_id] = f
            thresh[t, node_id] = thr
            mask = X[node_samples, f] <= thr
            # push right first so the left child is visited (numbered) first
            stack.append((node_samples[~mask], depth + 1, node_id, False))
            stack.append((node_samples[mask], depth + 1, node_id, True))
        node_count[t] = count

    return {
        "feature": feature,
        "thresh": thresh,
        "left": left,
        "right": right,
        "klass": klass,
        "node_count": node_count,
    }


def _draw_features(stream: _SplitMix, d: int, mtry: int) -> np.ndarray:
    """Partial Fisher-Yates: mtry distinct feature indices, order significant."""
    draws = stream.draw_block(mtry)
    pool = np.arange(d)
    out = np.empty(mtry, dtype=np.int64)
    for i in range(mtry):
        j = i + int(draws[i] % np.uint64(d - i))
        pool[i], pool[j] = pool[j], pool[i]
        out[i] = pool[i]
    return out


def _best_split(X, y, node_samples, feats, num_classes):
    """Best (feature, threshold) by Gini, with exact deterministic ordering.

    Split quality is the fraction (sum_c nL_c^2 * nR + sum_c nR_c^2 * nL)
    over (nL * nR); fractions are compared exactly via integer
    cross-multiplication, ties resolved toward the earlier boundary and the
    earlier drawn feature.  The threshold is the left edge of the boundary
    (rule: x <= thr goes left), which keeps partitions float-exact.
    """
    vals = X[node_samples][:, feats]
    order = np.argsort(vals, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(vals, order, axis=0)
    cls = y[node_samples]
    n_node = cls.shape[0]
    sorted_cls = cls[order]  # (n_node, mtry)
    onehot = np.zeros((n_node, feats.shape[0], num_classes), dtype=np.int64)
    np.put_along_axis(onehot, sorted_cls[:, :, None], 1, axis=2)
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]

    nL = np.arange(1, n_node, dtype=np.int64)
    nR = n_node - nL
    best_num = -1
    best_den = 1
    best_feat_pos = -1
    best_thr = 0.0
    for fpos in range(feats.shape[0]):
        boundary = sorted_vals[:-1, fpos] < sorted_vals[1:, fpos]
        if not boundary.any():
            continue
        cumL = cum[:-1, fpos, :]
        sL2 = np.einsum("ic,ic->i", cumL, cumL)
        cumR = total[fpos] - cumL
        sR2 = np.einsum("ic,ic->i", cumR, cumR)
        num = sL2 * nR + sR2 * nL
        den = nL * nR
        q = num.astype(np.longdouble) / den
        q[~boundary] = -1.0
        i = int(np.argmax(q))  # first max: earliest boundary on ties
        if not boundary[i]:
            continue
        cand_num, cand_den = int(num[i]), int(den[i])
        if cand_num * best_den > best_num * cand_den:
            best_num, best_den = cand_num, cand_den
            best_feat_pos = fpos
            best_thr = float(sorted_vals[i, fpos])
    if best_feat_pos < 0:
        return None
    return int(feats[best_feat_pos]), best_thr


def rf_predict(forest, X) -> np.ndarray:
    """Majority vote over the forest; ties go to the lowest class index."""
    n = X.shape[0]
    n_trees = forest["feature"].shape[0]
    num_classes = int(forest["klass"].max()) + 1
    votes = np.zeros((n, num_classes), dtype=np.int32)
    rows = np.arange(n)
    for t in range(n_trees):
        feature = forest["feature"][t]
        thresh = forest["thresh"][t]
        left = forest["left"][t]
        right = forest["right"][t]
        klass = forest["klass"][t]
        node = np.zeros(n, dtype=np.int32)
        while True:
            f = feature[node]
            live = f >= 0
            if not live.any():
                break
            idx = rows[live]
            fl = f[live]
            go_left = X[idx, fl] <= thresh[node[live]]
            node[idx] = np.where(go_left, left[node[live]], right[node[live]])
        votes[rows, klass[node]] += 1
    return np.argmax(votes, axis=1).astype(np.int64)
