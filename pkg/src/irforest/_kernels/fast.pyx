# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled split-search and tree-growth kernels.

Semantics are defined by the pure-numpy twin in ``pure.py``; the two must
produce bit-identical output. Every arithmetic expression below mirrors the
pure backend op for op (and the build disables FP contraction), so edit the
two files together or not at all.

The tree grower presorts each feature once and keeps the per-feature sorted
row lists partitioned through the recursion, which removes the per-node
sort that dominates a naive implementation.
"""

import numpy as np

from libc.math cimport NAN


cdef long long _stats_cls(const double* y, const long long* e, const int* rows,
                          long long n_m, long long n_envs,
                          long long* env_n1, long long* env_cnt) noexcept nogil:
    cdef long long t, ev, n1 = 0
    cdef double yv
    for t in range(n_envs):
        env_n1[t] = 0
        env_cnt[t] = 0
    for t in range(n_m):
        yv = y[rows[t]]
        ev = e[rows[t]]
        env_cnt[ev] += 1
        if yv != 0.0:
            n1 += 1
            env_n1[ev] += 1
    return n1


cdef void _stats_reg(const double* y, const long long* e, const int* rows,
                     long long n_m, long long n_envs,
                     double* env_sum, long long* env_cnt, double* env_mean) noexcept nogil:
    cdef long long t, ev
    for t in range(n_envs):
        env_sum[t] = 0.0
        env_cnt[t] = 0
        env_mean[t] = 0.0
    for t in range(n_m):
        ev = e[rows[t]]
        env_sum[ev] += y[rows[t]]
        env_cnt[ev] += 1
    for t in range(n_envs):
        if env_cnt[t] > 0:
            env_mean[t] = env_sum[t] / (<double> env_cnt[t])


cdef bint _stage1(const double* xrow, const double* y, const long long* e,
                  const int* sidx, long long n_m,
                  bint is_cls, double lam, long long min_leaf, long long n_envs,
                  bint use_pen, long long n1,
                  const long long* env_n1, const long long* env_cnt,
                  const double* env_mean,
                  long long* run_c, long long* run_1, double* run_s,
                  double* rate_buf, double* out_c) noexcept nogil:
    """Best boundary of one feature by the running-sum scan; strict < keeps
    the smallest threshold on exact ties."""
    cdef long long t, ev, pos, nl, nr, l1 = 0, l0, r1, r0, n0 = n_m - n1
    cdef long long ee, l1e, l0e, kk
    cdef double yv, v, vnext, c, nf = <double> n_m
    cdef double nlf, nrf, pl1, pl0, pr1, pr0, gl, gr, G, obj, L
    cdef double ls = 0.0, lq = 0.0, S = 0.0, Q = 0.0, ml, mr, hl, hr, rs, rq
    cdef double num, den, ie, imax = 0.0, imin = 0.0, rate, acc, mean, ssd, dd
    cdef double best_obj = 0.0
    cdef bint found = False, first
    for t in range(n_envs):
        run_c[t] = 0
        run_1[t] = 0
        run_s[t] = 0.0
    if not is_cls:
        for t in range(n_m):
            yv = y[sidx[t]]
            S += yv
            Q += yv * yv
    for t in range(n_m - 1):
        pos = sidx[t]
        yv = y[pos]
        ev = e[pos]
        if is_cls:
            if yv != 0.0:
                l1 += 1
                run_1[ev] += 1
            run_c[ev] += 1
        else:
            ls += yv
            lq += yv * yv
            run_s[ev] += yv
            run_c[ev] += 1
        v = xrow[pos]
        vnext = xrow[sidx[t + 1]]
        if not (v < vnext):
            continue
        nl = t + 1
        nr = n_m - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        c = (v + vnext) * 0.5
        if not (c < vnext):
            continue  # adjacent float64s: midpoint would leak the right value
        nlf = <double> nl
        nrf = nf - nlf
        if is_cls:
            l0 = nl - l1
            r1 = n1 - l1
            r0 = n0 - l0
            pl1 = (<double> l1) / nlf
            pl0 = (<double> l0) / nlf
            gl = 1.0 - pl1 * pl1 - pl0 * pl0
            pr1 = (<double> r1) / nrf
            pr0 = (<double> r0) / nrf
            gr = 1.0 - pr1 * pr1 - pr0 * pr0
            G = (nlf / nf) * gl + (nrf / nf) * gr
        else:
            ml = ls / nlf
            hl = lq / nlf - ml * ml
            rs = S - ls
            rq = Q - lq
            mr = rs / nrf
            hr = rq / nrf - mr * mr
            G = (nlf / nf) * hl + (nrf / nf) * hr
        if not use_pen:
            obj = G
        elif is_cls:
            first = True
            for ee in range(n_envs):
                if env_cnt[ee] == 0:
                    continue
                l1e = run_1[ee]
                l0e = run_c[ee] - l1e
                num = ((<double> l1e) + 0.5) / ((<double> env_n1[ee]) + 1.0)
                den = ((<double> l0e) + 0.5) / ((<double> (env_cnt[ee] - env_n1[ee])) + 1.0)
                ie = num / den
                if first:
                    imax = ie
                    imin = ie
                    first = False
                else:
                    if ie > imax:
                        imax = ie
                    if ie < imin:
                        imin = ie
            obj = G + lam * (imax / imin - 1.0)
        else:
            kk = 0
            acc = 0.0
            for ee in range(n_envs):
                if env_cnt[ee] == 0 or run_c[ee] == 0:
                    rate_buf[ee] = 0.0
                    continue
                rate = run_s[ee] / (<double> run_c[ee]) - env_mean[ee]
                rate_buf[ee] = rate
                kk += 1
                acc += rate
            if kk >= 2:
                mean = acc / (<double> kk)
                ssd = 0.0
                for ee in range(n_envs):
                    if env_cnt[ee] == 0 or run_c[ee] == 0:
                        continue
                    dd = rate_buf[ee] - mean
                    ssd += dd * dd
                L = ssd / (<double> kk)
            else:
                L = 0.0
            obj = G + lam * L
        if (not found) or obj < best_obj:
            best_obj = obj
            out_c[0] = c
            found = True
    return found


cdef double _canon(const double* xrow, const double* y, const long long* e,
                   const int* rows, long long n_m, double c,
                   bint is_cls, double lam, long long n_envs, bint use_pen,
                   long long n1, const long long* env_n1, const long long* env_cnt,
                   const double* env_mean,
                   long long* s_c, long long* s_1, double* s_s,
                   double* rate_buf) noexcept nogil:
    """Definitional objective of (feature, c): two-pass, node row order."""
    cdef long long t, pos, ev, nl = 0, nr, l1 = 0, l0, r1, r0, kk, n1e, n0e, l1e, l0e
    cdef double yv, nlf, nrf, nf = <double> n_m
    cdef double pl1, pl0, pr1, pr0, gl, gr, G
    cdef double sl = 0.0, sr = 0.0, ml, mr, ssl = 0.0, ssr = 0.0, dd, hl, hr
    cdef double num, den, ie, imax = 0.0, imin = 0.0, rate, acc, mean, ssd
    cdef bint first
    for t in range(n_envs):
        s_c[t] = 0
        s_1[t] = 0
        s_s[t] = 0.0
    if is_cls:
        for t in range(n_m):
            pos = rows[t]
            if xrow[pos] <= c:
                nl += 1
                ev = e[pos]
                s_c[ev] += 1
                if y[pos] != 0.0:
                    l1 += 1
                    s_1[ev] += 1
        nr = n_m - nl
        nlf = <double> nl
        nrf = <double> nr
        l0 = nl - l1
        r1 = n1 - l1
        r0 = (n_m - n1) - l0
        pl1 = (<double> l1) / nlf
        pl0 = (<double> l0) / nlf
        gl = 1.0 - pl1 * pl1 - pl0 * pl0
        pr1 = (<double> r1) / nrf
        pr0 = (<double> r0) / nrf
        gr = 1.0 - pr1 * pr1 - pr0 * pr0
        G = (nlf / nf) * gl + (nrf / nf) * gr
        if use_pen:
            first = True
            for t in range(n_envs):
                if env_cnt[t] == 0:
                    continue
                l1e = s_1[t]
                l0e = s_c[t] - l1e
                n1e = env_n1[t]
                n0e = env_cnt[t] - n1e
                num = ((<double> l1e) + 0.5) / ((<double> n1e) + 1.0)
                den = ((<double> l0e) + 0.5) / ((<double> n0e) + 1.0)
                ie = num / den
                if first:
                    imax = ie
                    imin = ie
                    first = False
                else:
                    if ie > imax:
                        imax = ie
                    if ie < imin:
                        imin = ie
            return G + lam * (imax / imin - 1.0)
        return G

    for t in range(n_m):
        pos = rows[t]
        yv = y[pos]
        if xrow[pos] <= c:
            nl += 1
            sl += yv
            ev = e[pos]
            s_s[ev] += yv
            s_c[ev] += 1
        else:
            sr += yv
    nr = n_m - nl
    nlf = <double> nl
    nrf = <double> nr
    ml = sl / nlf
    mr = sr / nrf
    for t in range(n_m):
        pos = rows[t]
        yv = y[pos]
        if xrow[pos] <= c:
            dd = yv - ml
            ssl += dd * dd
        else:
            dd = yv - mr
            ssr += dd * dd
    hl = ssl / nlf
    hr = ssr / nrf
    G = (nlf / nf) * hl + (nrf / nf) * hr
    if use_pen:
        kk = 0
        for t in range(n_envs):
            if env_cnt[t] == 0 or s_c[t] == 0:
                continue
            rate_buf[kk] = s_s[t] / (<double> s_c[t]) - env_mean[t]
            kk += 1
        if kk >= 2:
            acc = 0.0
            for t in range(kk):
                acc += rate_buf[t]
            mean = acc / (<double> kk)
            ssd = 0.0
            for t in range(kk):
                dd = rate_buf[t] - mean
                ssd += dd * dd
            return G + lam * (ssd / (<double> kk))
    return G


cdef double _seq_sum_rows(const double* y, const int* rows, long long n_m) noexcept nogil:
    cdef double acc = 0.0
    cdef long long t
    for t in range(n_m):
        acc += y[rows[t]]
    return acc


def scan_node(X, y, env_ids, n_envs, rows, features, is_cls, lam, min_leaf):
    """Best penalized split over ``rows`` of X, or None. See pure.scan_node."""
    cdef long long E = n_envs
    cdef bint cls_flag = bool(is_cls)
    cdef double lam_c = float(lam)
    cdef long long min_leaf_c = int(min_leaf)

    rows = np.asarray(rows, dtype=np.int64)
    cdef long long k = rows.shape[0]
    if k < 2 * min_leaf_c:
        return None
    feats_arr = np.ascontiguousarray(np.asarray(features, dtype=np.int64))
    Xn = np.asarray(X, dtype=np.float64)[rows]
    XT_arr = np.ascontiguousarray(Xn.T)
    y_arr = np.ascontiguousarray(np.asarray(y, dtype=np.float64)[rows])
    e_arr = np.ascontiguousarray(np.asarray(env_ids, dtype=np.int64)[rows])

    cdef double[:, ::1] xt = XT_arr
    cdef double[::1] yv = y_arr
    cdef long long[::1] ev = e_arr
    cdef long long[::1] feats = feats_arr

    pos_arr = np.arange(k, dtype=np.int32)
    cdef int[::1] rws = pos_arr
    cdef long long[::1] env_n1 = np.empty(E, dtype=np.int64)
    cdef long long[::1] env_cnt = np.empty(E, dtype=np.int64)
    cdef double[::1] env_mean = np.empty(E, dtype=np.float64)
    cdef double[::1] env_sum = np.empty(E, dtype=np.float64)
    cdef long long[::1] run_c = np.empty(E, dtype=np.int64)
    cdef long long[::1] run_1 = np.empty(E, dtype=np.int64)
    cdef double[::1] run_s = np.empty(E, dtype=np.float64)
    cdef double[::1] rate_buf = np.empty(E, dtype=np.float64)

    cdef long long n1 = 0, t, present = 0
    if cls_flag:
        n1 = _stats_cls(&yv[0], &ev[0], &rws[0], k, E, &env_n1[0], &env_cnt[0])
        if n1 == 0 or n1 == k:
            return None
    else:
        _stats_reg(&yv[0], &ev[0], &rws[0], k, E, &env_sum[0], &env_cnt[0], &env_mean[0])
        for t in range(1, k):
            if yv[t] != yv[0]:
                break
        else:
            return None
    for t in range(E):
        if env_cnt[t] > 0:
            present += 1
    cdef bint use_pen = lam_c > 0.0 and present >= 2

    cdef long long fi, f
    cdef double c = 0.0, co
    cdef double best_obj = 0.0, best_c = 0.0
    cdef long long best_j = -1
    cdef bint found
    cdef int[::1] sidx
    for fi in range(feats.shape[0]):
        f = feats[fi]
        sidx_arr = np.argsort(XT_arr[f], kind="stable").astype(np.int32)
        sidx = sidx_arr
        if xt[f, sidx[0]] == xt[f, sidx[k - 1]]:
            continue
        found = _stage1(&xt[f, 0], &yv[0], &ev[0], &sidx[0], k,
                        cls_flag, lam_c, min_leaf_c, E, use_pen, n1,
                        &env_n1[0], &env_cnt[0], &env_mean[0],
                        &run_c[0], &run_1[0], &run_s[0], &rate_buf[0], &c)
        if not found:
            continue
        co = _canon(&xt[f, 0], &yv[0], &ev[0], &rws[0], k, c,
                    cls_flag, lam_c, E, use_pen, n1,
                    &env_n1[0], &env_cnt[0], &env_mean[0],
                    &run_c[0], &run_1[0], &run_s[0], &rate_buf[0])
        if best_j < 0 or co < best_obj:
            best_obj = co
            best_c = c
            best_j = f
    if best_j < 0:
        return None
    return int(best_j), float(best_c), float(best_obj)


def grow_tree(X, y, env_ids, n_envs, rows, is_cls, lam, max_depth, min_leaf,
              feature_sampler=None):
    """Grow one tree over ``rows``; flat preorder arrays as in pure.grow_tree."""
    cdef long long E = n_envs
    cdef bint cls_flag = bool(is_cls)
    cdef double lam_c = float(lam)
    cdef long long min_leaf_c = int(min_leaf)
    cdef long long max_depth_c = min(int(max_depth), np.asarray(rows).shape[0] + 1)

    rows = np.asarray(rows, dtype=np.int64)
    Xb = np.ascontiguousarray(np.asarray(X, dtype=np.float64)[rows])
    cdef long long k = Xb.shape[0], p = Xb.shape[1]
    XT_arr = np.ascontiguousarray(Xb.T)
    y_arr = np.ascontiguousarray(np.asarray(y, dtype=np.float64)[rows])
    e_arr = np.ascontiguousarray(np.asarray(env_ids, dtype=np.int64)[rows])

    IDX_arr = np.empty((p, k), dtype=np.int32)
    cdef long long f
    for f in range(p):
        IDX_arr[f] = np.argsort(XT_arr[f], kind="stable")

    all_feats = np.arange(p, dtype=np.int64)

    cdef double[:, ::1] xt = XT_arr
    cdef double[::1] yv = y_arr
    cdef long long[::1] ev = e_arr
    cdef int[:, ::1] idx = IDX_arr
    cdef int[::1] rws = np.arange(k, dtype=np.int32)
    cdef int[::1] scratch = np.empty(k, dtype=np.int32)

    cdef long long[::1] env_n1 = np.empty(E, dtype=np.int64)
    cdef long long[::1] env_cnt = np.empty(E, dtype=np.int64)
    cdef double[::1] env_mean = np.empty(E, dtype=np.float64)
    cdef double[::1] env_sum = np.empty(E, dtype=np.float64)
    cdef long long[::1] run_c = np.empty(E, dtype=np.int64)
    cdef long long[::1] run_1 = np.empty(E, dtype=np.int64)
    cdef double[::1] run_s = np.empty(E, dtype=np.float64)
    cdef double[::1] rate_buf = np.empty(E, dtype=np.float64)

    cdef long long cap = 2 * k + 1
    feat_out = np.empty(cap, dtype=np.int32)
    thr_out = np.empty(cap, dtype=np.float64)
    left_out = np.empty(cap, dtype=np.int32)
    right_out = np.empty(cap, dtype=np.int32)
    pred_out = np.empty(cap, dtype=np.float64)
    cnt_out = np.empty(cap, dtype=np.int64)
    cdef int[::1] o_feat = feat_out
    cdef double[::1] o_thr = thr_out
    cdef int[::1] o_left = left_out
    cdef int[::1] o_right = right_out
    cdef double[::1] o_pred = pred_out
    cdef long long[::1] o_cnt = cnt_out

    cdef long long stack_cap = max_depth_c + 3
    cdef long long[::1] st_start = np.empty(stack_cap, dtype=np.int64)
    cdef long long[::1] st_end = np.empty(stack_cap, dtype=np.int64)
    cdef long long[::1] st_depth = np.empty(stack_cap, dtype=np.int64)
    cdef long long[::1] st_parent = np.empty(stack_cap, dtype=np.int64)
    cdef char[::1] st_right = np.empty(stack_cap, dtype=np.int8)

    cdef long long sp = 0, n_nodes = 0
    st_start[0] = 0
    st_end[0] = k
    st_depth[0] = 0
    st_parent[0] = -1
    st_right[0] = 0
    sp = 1

    cdef long long start, end, depth, parent, nid, n_m, t, n1, present
    cdef long long fi, ff, best_j, nl, li, ri, pos
    cdef bint is_right, pure, use_pen, found
    cdef double y0, c, co, best_obj, best_c
    cdef long long[::1] feats

    while sp > 0:
        sp -= 1
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        parent = st_parent[sp]
        is_right = st_right[sp]
        nid = n_nodes
        n_nodes += 1
        if parent >= 0:
            if is_right:
                o_right[parent] = <int> nid
            else:
                o_left[parent] = <int> nid
        n_m = end - start

        n1 = 0
        if cls_flag:
            for t in range(start, end):
                if yv[rws[t]] != 0.0:
                    n1 += 1
            pure = n1 == 0 or n1 == n_m
        else:
            y0 = yv[rws[start]]
            pure = True
            for t in range(start + 1, end):
                if yv[rws[t]] != y0:
                    pure = False
                    break

        best_j = -1
        if depth < max_depth_c and not pure and n_m >= 2 * min_leaf_c:
            if cls_flag:
                _stats_cls(&yv[0], &ev[0], &rws[start], n_m, E, &env_n1[0], &env_cnt[0])
            else:
                _stats_reg(&yv[0], &ev[0], &rws[start], n_m, E,
                           &env_sum[0], &env_cnt[0], &env_mean[0])
            present = 0
            for t in range(E):
                if env_cnt[t] > 0:
                    present += 1
            use_pen = lam_c > 0.0 and present >= 2

            if feature_sampler is None:
                feats_arr = all_feats
            else:
                feats_arr = np.ascontiguousarray(feature_sampler(), dtype=np.int64)
            feats = feats_arr
            best_obj = 0.0
            best_c = 0.0
            for fi in range(feats.shape[0]):
                ff = feats[fi]
                if xt[ff, idx[ff, start]] == xt[ff, idx[ff, end - 1]]:
                    continue
                found = _stage1(&xt[ff, 0], &yv[0], &ev[0], &idx[ff, start], n_m,
                                cls_flag, lam_c, min_leaf_c, E, use_pen, n1,
                                &env_n1[0], &env_cnt[0], &env_mean[0],
                                &run_c[0], &run_1[0], &run_s[0], &rate_buf[0], &c)
                if not found:
                    continue
                co = _canon(&xt[ff, 0], &yv[0], &ev[0], &rws[start], n_m, c,
                            cls_flag, lam_c, E, use_pen, n1,
                            &env_n1[0], &env_cnt[0], &env_mean[0],
                            &run_c[0], &run_1[0], &run_s[0], &rate_buf[0])
                if best_j < 0 or co < best_obj:
                    best_obj = co
                    best_c = c
                    best_j = ff

        if best_j < 0:
            o_feat[nid] = -1
            o_thr[nid] = NAN
            o_left[nid] = -1
            o_right[nid] = -1
            if cls_flag:
                o_pred[nid] = (<double> n1) / (<double> n_m)
            else:
                o_pred[nid] = _seq_sum_rows(&yv[0], &rws[start], n_m) / (<double> n_m)
            o_cnt[nid] = n_m
            continue

        o_feat[nid] = <int> best_j
        o_thr[nid] = best_c
        o_pred[nid] = NAN
        o_cnt[nid] = n_m

        # stable partition of the row list and every feature's sorted list
        nl = 0
        for t in range(start, end):
            if xt[best_j, rws[t]] <= best_c:
                nl += 1
        li = 0
        ri = nl
        for t in range(start, end):
            pos = rws[t]
            if xt[best_j, pos] <= best_c:
                scratch[li] = pos
                li += 1
            else:
                scratch[ri] = pos
                ri += 1
        for t in range(n_m):
            rws[start + t] = scratch[t]
        for ff in range(p):
            li = 0
            ri = nl
            for t in range(start, end):
                pos = idx[ff, t]
                if xt[best_j, pos] <= best_c:
                    scratch[li] = pos
                    li += 1
                else:
                    scratch[ri] = pos
                    ri += 1
            for t in range(n_m):
                idx[ff, start + t] = scratch[t]

        st_start[sp] = start + nl
        st_end[sp] = end
        st_depth[sp] = depth + 1
        st_parent[sp] = nid
        st_right[sp] = 1
        sp += 1
        st_start[sp] = start
        st_end[sp] = start + nl
        st_depth[sp] = depth + 1
        st_parent[sp] = nid
        st_right[sp] = 0
        sp += 1

    return (
        feat_out[:n_nodes].copy(),
        thr_out[:n_nodes].copy(),
        left_out[:n_nodes].copy(),
        right_out[:n_nodes].copy(),
        pred_out[:n_nodes].copy(),
        cnt_out[:n_nodes].copy(),
    )
