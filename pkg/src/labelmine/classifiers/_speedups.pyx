# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training kernels (hot path).

Same training protocols as `reference`: the random-forest builder follows
the shared splitmix64/preorder/integer-comparison protocol bit for bit; the
gradient kernels use float32 BLAS like the numpy fallback and agree with it
up to rounding.
"""

import numpy as np

from libc.math cimport expf
from libc.string cimport memset
from scipy.linalg.cython_blas cimport sgemm

ctypedef unsigned long long u64

cdef u64 GOLDEN = 0x9E3779B97F4A7C15ULL
cdef u64 MIX1 = 0xBF58476D1CE4E5B9ULL
cdef u64 MIX2 = 0x94D049BB133111EBULL

MAX_RF_ROWS = 2000


cdef inline u64 _mix64(u64 z) nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


# Row-major GEMM helpers on top of Fortran sgemm: C(m,n) = op(A) @ op(B).

cdef void _gemm_nn(const float[:, ::1] A, const float[:, ::1] B, float[:, ::1] C) noexcept nogil:
    # C (m,n) = A (m,k) @ B (k,n)
    cdef int m = A.shape[0], k = A.shape[1], n = B.shape[1]
    cdef float alpha = 1.0, beta = 0.0
    cdef char tn = c'N'
    sgemm(&tn, &tn, &n, &m, &k, &alpha, <float*> &B[0, 0], &n, <float*> &A[0, 0], &k, &beta, &C[0, 0], &n)


cdef void _gemm_tn(const float[:, ::1] A, const float[:, ::1] B, float[:, ::1] C) noexcept nogil:
    # C (m,n) = A.T @ B with A (k,m), B (k,n)
    cdef int k = A.shape[0], m = A.shape[1], n = B.shape[1]
    cdef float alpha = 1.0, beta = 0.0
    cdef char tn = c'N', tt = c'T'
    sgemm(&tn, &tt, &n, &m, &k, &alpha, <float*> &B[0, 0], &n, <float*> &A[0, 0], &m, &beta, &C[0, 0], &n)


cdef void _gemm_nt(const float[:, ::1] A, const float[:, ::1] B, float[:, ::1] C) noexcept nogil:
    # C (m,n) = A @ B.T with A (m,k), B (n,k)
    cdef int m = A.shape[0], k = A.shape[1], n = B.shape[0]
    cdef float alpha = 1.0, beta = 0.0
    cdef char tn = c'N', tt = c'T'
    sgemm(&tt, &tn, &n, &m, &k, &alpha, <float*> &B[0, 0], &k, <float*> &A[0, 0], &k, &beta, &C[0, 0], &n)


def mlp_train(const float[:, ::1] X, const int[::1] y, float[:, ::1] W1, float[::1] b1,
              float[:, ::1] W2, float[::1] b2, int epochs, double lr):
    """In-place full-batch gradient descent on softmax cross-entropy."""
    cdef int n = X.shape[0], d = X.shape[1], h = W1.shape[1], c = W2.shape[1]
    cdef float lrf = <float> lr, invn = <float> (1.0 / n)
    H_ = np.empty((n, h), dtype=np.float32)
    P_ = np.empty((n, c), dtype=np.float32)
    dH_ = np.empty((n, h), dtype=np.float32)
    dW1_ = np.empty((d, h), dtype=np.float32)
    dW2_ = np.empty((h, c), dtype=np.float32)
    db1_ = np.empty(h, dtype=np.float32)
    db2_ = np.empty(c, dtype=np.float32)
    cdef float[:, ::1] H = H_, P = P_, dH = dH_, dW1 = dW1_, dW2 = dW2_
    cdef float[::1] db1 = db1_, db2 = db2_
    cdef int ep, i, j
    cdef float v, m, s

    with nogil:
        for ep in range(epochs):
            _gemm_nn(X, W1, H)
            for i in range(n):
                for j in range(h):
                    v = H[i, j] + b1[j]
                    H[i, j] = v if v > 0.0 else 0.0
            _gemm_nn(H, W2, P)
            for i in range(n):
                m = P[i, 0] + b2[0]
                for j in range(1, c):
                    v = P[i, j] + b2[j]
                    if v > m:
                        m = v
                s = 0.0
                for j in range(c):
                    v = expf(P[i, j] + b2[j] - m)
                    P[i, j] = v
                    s += v
                for j in range(c):
                    P[i, j] /= s
                P[i, y[i]] -= 1.0
                for j in range(c):
                    P[i, j] *= invn
            _gemm_tn(H, P, dW2)
            for j in range(c):
                s = 0.0
                for i in range(n):
                    s += P[i, j]
                db2[j] = s
            _gemm_nt(P, W2, dH)
            for i in range(n):
                for j in range(h):
                    if H[i, j] == 0.0:
                        dH[i, j] = 0.0
            _gemm_tn(X, dH, dW1)
            for j in range(h):
                s = 0.0
                for i in range(n):
                    s += dH[i, j]
                db1[j] = s
            for i in range(d):
                for j in range(h):
                    W1[i, j] -= lrf * dW1[i, j]
            for j in range(h):
                b1[j] -= lrf * db1[j]
            for i in range(h):
                for j in range(c):
                    W2[i, j] -= lrf * dW2[i, j]
            for j in range(c):
                b2[j] -= lrf * db2[j]


def svm_train(const float[:, ::1] X, const int[::1] y, float[:, ::1] W, float[::1] b,
              int epochs, double lr, double l2):
    """In-place batch subgradient descent on one-vs-rest mean hinge + L2."""
    cdef int n = X.shape[0], d = X.shape[1], c = W.shape[1]
    cdef float lrf = <float> lr, l2f = <float> l2, invn = <float> (1.0 / n)
    S_ = np.empty((n, c), dtype=np.float32)
    dW_ = np.empty((d, c), dtype=np.float32)
    db_ = np.empty(c, dtype=np.float32)
    cdef float[:, ::1] S = S_, dW = dW_
    cdef float[::1] db = db_
    cdef int ep, i, j
    cdef float t, s

    with nogil:
        for ep in range(epochs):
            _gemm_nn(X, W, S)
            for i in range(n):
                for j in range(c):
                    t = 1.0 if y[i] == j else -1.0
                    if t * (S[i, j] + b[j]) < 1.0:
                        S[i, j] = -t * invn
                    else:
                        S[i, j] = 0.0
            _gemm_tn(X, S, dW)
            for j in range(c):
                s = 0.0
                for i in range(n):
                    s += S[i, j]
                db[j] = s
            for i in range(d):
                for j in range(c):
                    W[i, j] -= lrf * (dW[i, j] + l2f * W[i, j])
            for j in range(c):
                b[j] -= lrf * db[j]


cdef void _sort_pairs(float* v, int* c, long lo, long hi) noexcept nogil:
    """Quicksort of values with class tags along; tie order is irrelevant."""
    cdef long i, j, mid
    cdef float pivot, tv
    cdef int tc
    while hi - lo > 15:
        mid = lo + (hi - lo) // 2
        # median of three -> pivot at v[mid]
        if v[mid] < v[lo]:
            tv = v[mid]; v[mid] = v[lo]; v[lo] = tv
            tc = c[mid]; c[mid] = c[lo]; c[lo] = tc
        if v[hi] < v[lo]:
            tv = v[hi]; v[hi] = v[lo]; v[lo] = tv
            tc = c[hi]; c[hi] = c[lo]; c[lo] = tc
        if v[hi] < v[mid]:
            tv = v[hi]; v[hi] = v[mid]; v[mid] = tv
            tc = c[hi]; c[hi] = c[mid]; c[mid] = tc
        pivot = v[mid]
        i = lo
        j = hi
        while i <= j:
            while v[i] < pivot:
                i += 1
            while v[j] > pivot:
                j -= 1
            if i <= j:
                tv = v[i]; v[i] = v[j]; v[j] = tv
                tc = c[i]; c[i] = c[j]; c[j] = tc
                i += 1
                j -= 1
        # recurse on the smaller side, loop on the larger
        if j - lo < hi - i:
            if lo < j:
                _sort_pairs(v, c, lo, j)
            lo = i
        else:
            if i < hi:
                _sort_pairs(v, c, i, hi)
            hi = j
    # insertion sort for the remainder
    for i in range(lo + 1, hi + 1):
        tv = v[i]
        tc = c[i]
        j = i - 1
        while j >= lo and v[j] > tv:
            v[j + 1] = v[j]
            c[j + 1] = c[j]
            j -= 1
        v[j + 1] = tv
        c[j + 1] = tc


cdef inline int _argmax_first(long long* counts, int k) noexcept nogil:
    cdef int best = 0, j
    for j in range(1, k):
        if counts[j] > counts[best]:
            best = j
    return best


def rf_build(const float[:, ::1] X, const int[::1] y, int num_classes, int n_trees,
             int max_depth, int mtry, bint bootstrap, unsigned long long[::1] seeds,
             Xq=None):
    """Grow a forest; packed node arrays, protocol-identical to reference.

    `Xq` may hold the features as exact uint8 levels (value == level/255);
    split search then uses counting sort over the 256 levels instead of
    comparison sort.  Both paths pick identical splits.
    """
    cdef long n = X.shape[0], d = X.shape[1]
    if n > MAX_RF_ROWS:
        raise ValueError(f"random forest kernel supports at most {MAX_RF_ROWS} rows, got {n}")
    cap_py = 2 * int(n) + 1
    if max_depth < 60:
        cap_py = min(cap_py, 2 ** (max_depth + 1) + 1)
    cdef long cap = cap_py

    cdef bint use_bytes = Xq is not None
    cdef const unsigned char[:, ::1] Xb
    if use_bytes:
        Xb = Xq
    else:
        Xb = np.empty((1, 1), dtype=np.uint8)

    feature_ = np.full((n_trees, cap), -1, dtype=np.int32)
    thresh_ = np.zeros((n_trees, cap), dtype=np.float32)
    left_ = np.full((n_trees, cap), -1, dtype=np.int32)
    right_ = np.full((n_trees, cap), -1, dtype=np.int32)
    klass_ = np.full((n_trees, cap), -1, dtype=np.int32)
    node_count_ = np.zeros(n_trees, dtype=np.int32)
    cdef int[:, ::1] feature = feature_, left = left_, right = right_, klass = klass_
    cdef float[:, ::1] thresh = thresh_
    cdef int[::1] node_count = node_count_

    idx_ = np.empty(n, dtype=np.int64)
    pool_ = np.empty(d, dtype=np.int64)
    feats_ = np.empty(mtry, dtype=np.int64)
    vals_ = np.empty(n, dtype=np.float32)
    cls_ = np.empty(n, dtype=np.int32)
    bins_ = np.empty(n, dtype=np.uint8)
    sorted_cls_ = np.empty(n, dtype=np.int32)
    bincnt_ = np.empty(256, dtype=np.int32)
    counts_ = np.empty(num_classes, dtype=np.int64)
    cntL_ = np.empty(num_classes, dtype=np.int64)
    cntR_ = np.empty(num_classes, dtype=np.int64)
    st_ = np.empty((cap + 2, 5), dtype=np.int64)  # start, end, depth, parent, is_left
    cdef long[::1] idx = idx_, pool = pool_, feats = feats_
    cdef float[::1] vals = vals_
    cdef int[::1] cls = cls_, sorted_cls = sorted_cls_, bincnt = bincnt_
    cdef unsigned char[::1] bins = bins_
    cdef long long[::1] counts = counts_, cntL = cntL_, cntR = cntR_
    cdef long[:, ::1] st = st_

    cdef int t, node_id, cc, best_f, f, b, bmin, bmax
    cdef long sp, start, end, depth, parent, is_left, n_node, i, j, fi, nL, nR, mid, count, pos, m
    cdef u64 seed, counter, r
    cdef long long maxc, sL2, sR2, node_s2, num, den, best_num, best_den
    cdef float thr, best_thr, tmpf, vmin, vmax

    with nogil:
        for t in range(n_trees):
            seed = seeds[t]
            counter = 0
            if bootstrap:
                for j in range(n):
                    counter += 1
                    idx[j] = <long> (_mix64(seed + counter * GOLDEN) % <u64> n)
            else:
                for j in range(n):
                    idx[j] = j
            count = 0
            sp = 1
            st[0, 0] = 0; st[0, 1] = n; st[0, 2] = 0; st[0, 3] = -1; st[0, 4] = 0
            while sp > 0:
                sp -= 1
                start = st[sp, 0]; end = st[sp, 1]; depth = st[sp, 2]
                parent = st[sp, 3]; is_left = st[sp, 4]
                node_id = <int> count
                count += 1
                if parent >= 0:
                    if is_left:
                        left[t, <int> parent] = node_id
                    else:
                        right[t, <int> parent] = node_id
                n_node = end - start
                for cc in range(num_classes):
                    counts[cc] = 0
                for j in range(start, end):
                    counts[y[idx[j]]] += 1
                maxc = 0
                for cc in range(num_classes):
                    if counts[cc] > maxc:
                        maxc = counts[cc]
                if depth >= max_depth or n_node < 2 or maxc == n_node:
                    klass[t, node_id] = _argmax_first(&counts[0], num_classes)
                    continue

                for i in range(d):
                    pool[i] = i
                for i in range(mtry):
                    counter += 1
                    r = _mix64(seed + counter * GOLDEN) % <u64> (d - i)
                    j = i + <long> r
                    pool[i], pool[j] = pool[j], pool[i]
                    feats[i] = pool[i]

                node_s2 = 0
                for cc in range(num_classes):
                    node_s2 += counts[cc] * counts[cc]
                best_num = -1
                best_den = 1
                best_f = -1
                best_thr = 0.0
                for fi in range(mtry):
                    f = <int> feats[fi]
                    for cc in range(num_classes):
                        cntL[cc] = 0
                        cntR[cc] = counts[cc]
                    sL2 = 0
                    sR2 = node_s2
                    if use_bytes and n_node >= 48:
                        # counting sort over the 256 feature levels
                        memset(&bincnt[0], 0, 256 * sizeof(int))
                        bmin = 255
                        bmax = 0
                        for j in range(start, end):
                            b = Xb[idx[j], f]
                            bins[j - start] = <unsigned char> b
                            cls[j - start] = y[idx[j]]
                            bincnt[b] += 1
                            if b < bmin:
                                bmin = b
                            if b > bmax:
                                bmax = b
                        pos = 0
                        for b in range(bmin, bmax + 1):
                            i = bincnt[b]
                            bincnt[b] = <int> pos
                            pos += i
                        for j in range(n_node):
                            b = bins[j]
                            sorted_cls[bincnt[b]] = cls[j]
                            bincnt[b] += 1
                        # bincnt[b] is now the cumulative count through level b
                        m = 0
                        for b in range(bmin, bmax + 1):
                            if bincnt[b] == m:
                                continue
                            for i in range(m, bincnt[b]):
                                cc = sorted_cls[i]
                                sL2 += 2 * cntL[cc] + 1
                                cntL[cc] += 1
                                sR2 -= 2 * cntR[cc] - 1
                                cntR[cc] -= 1
                            m = bincnt[b]
                            if m < n_node:
                                nL = m
                                nR = n_node - nL
                                num = sL2 * nR + sR2 * nL
                                den = nL * nR
                                if num * best_den > best_num * den:
                                    best_num = num
                                    best_den = den
                                    best_f = f
                                    best_thr = <float> (b / 255.0)
                    else:
                        vmin = X[idx[start], f]
                        vmax = vmin
                        for j in range(start, end):
                            tmpf = X[idx[j], f]
                            vals[j - start] = tmpf
                            cls[j - start] = y[idx[j]]
                            if tmpf < vmin:
                                vmin = tmpf
                            elif tmpf > vmax:
                                vmax = tmpf
                        if vmin == vmax:
                            continue
                        _sort_pairs(&vals[0], &cls[0], 0, n_node - 1)
                        for i in range(n_node - 1):
                            cc = cls[i]
                            sL2 += 2 * cntL[cc] + 1
                            cntL[cc] += 1
                            sR2 -= 2 * cntR[cc] - 1
                            cntR[cc] -= 1
                            if vals[i] < vals[i + 1]:
                                nL = i + 1
                                nR = n_node - nL
                                num = sL2 * nR + sR2 * nL
                                den = nL * nR
                                if num * best_den > best_num * den:
                                    best_num = num
                                    best_den = den
                                    best_f = f
                                    best_thr = vals[i]
                if best_f < 0:
                    klass[t, node_id] = _argmax_first(&counts[0], num_classes)
                    continue
                feature[t, node_id] = best_f
                thresh[t, node_id] = best_thr
                thr = best_thr
                i = start
                j = end - 1
                while i <= j:
                    if X[idx[i], best_f] <= thr:
                        i += 1
                    else:
                        idx[i], idx[j] = idx[j], idx[i]
                        j -= 1
                mid = i
                st[sp, 0] = mid; st[sp, 1] = end; st[sp, 2] = depth + 1
                st[sp, 3] = node_id; st[sp, 4] = 0
                sp += 1
                st[sp, 0] = start; st[sp, 1] = mid; st[sp, 2] = depth + 1
                st[sp, 3] = node_id; st[sp, 4] = 1
                sp += 1
            node_count[t] = <int> count

    return {
        "feature": feature_,
        "thresh": thresh_,
        "left": left_,
        "right": right_,
        "klass": klass_,
        "node_count": node_count_,
    }


def rf_predict(dict forest, const float[:, ::1] X):
    """Majority vote over the forest; ties go to the lowest class index."""
    cdef const int[:, ::1] feature = forest["feature"]
    cdef const float[:, ::1] thresh = forest["thresh"]
    cdef const int[:, ::1] left = forest["left"]
    cdef const int[:, ::1] right = forest["right"]
    cdef const int[:, ::1] klass = forest["klass"]
    cdef long n = X.shape[0]
    cdef int n_trees = feature.shape[0]
    cdef int num_classes = int(np.max(forest["klass"])) + 1

    out_ = np.empty(n, dtype=np.int64)
    votes_ = np.empty(num_classes, dtype=np.int64)
    cdef long[::1] out = out_
    cdef long long[::1] votes = votes_
    cdef long i
    cdef int t, node, f, best, j

    with nogil:
        for i in range(n):
            for j in range(num_classes):
                votes[j] = 0
            for t in range(n_trees):
                node = 0
                f = feature[t, node]
                while f >= 0:
                    if X[i, f] <= thresh[t, node]:
                        node = left[t, node]
                    else:
                        node = right[t, node]
                    f = feature[t, node]
                votes[klass[t, node]] += 1
            best = 0
            for j in range(1, num_classes):
                if votes[j] > votes[best]:
                    best = j
            out[i] = best
    return out_
