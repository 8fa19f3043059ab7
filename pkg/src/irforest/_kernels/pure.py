"""Pure-numpy split-search and tree-growth kernels.

This module is the semantic reference for the compiled twin in ``fast.pyx``;
given the same inputs the two backends must produce bit-identical trees.
Split selection runs in two stages:

  stage 1  for each candidate feature, walk the node rows sorted stably by
           value (ties broken by position) keeping running sums, and pick
           that feature's best boundary; strict ``<`` keeps the smallest
           threshold on exact ties.
  stage 2  re-evaluate every per-feature winner canonically: partition by
           ``x <= c`` in node row order, compute impurities with two-pass
           formulas and strictly sequential sums, visit environments in
           ascending id order. The final argmin over features uses strict
           ``<`` in ascending feature order.

Stage 2 makes the reported objective independent of the scan order, which is
what allows exact agreement between backends and with naive re-evaluation.
Every arithmetic expression here is mirrored op-for-op in the C kernel, so
do not "simplify" formulas in one place only.

Candidate thresholds are midpoints of consecutive distinct sorted values. A
midpoint that rounds up to the next value (adjacent float64s) is skipped so
the ``x <= c`` partition always matches the scanned prefix.
"""

from __future__ import annotations

import numpy as np

LEAF = -1


def _seq_sum(a: np.ndarray) -> float:
    # left-to-right accumulation, matching a C loop (np.sum is pairwise)
    return float(np.add.accumulate(a)[-1]) if a.size else 0.0


def _node_stats(y_node, e_node, n_envs, is_cls):
    """Pooled and per-environment statistics of a node, in row order.

    Classification: (n1, env_n1, env_cnt). Regression: (env_mean, env_cnt)
    with env_mean undefined (0.0) for absent environments.
    """
    env_cnt = np.bincount(e_node, minlength=n_envs).astype(np.int64)
    if is_cls:
        pos = (y_node != 0.0).astype(np.int64)
        env_n1 = np.bincount(e_node, weights=pos, minlength=n_envs).astype(np.int64)
        return int(pos.sum()), env_n1, env_cnt
    env_mean = np.zeros(n_envs)
    for e in range(n_envs):
        if env_cnt[e]:
            env_mean[e] = _seq_sum(y_node[e_node == e]) / float(env_cnt[e])
    return env_mean, env_cnt


def _canonical_objective(Xb, yb, eb, pos, j, c, n_envs, is_cls, lam, stats):
    """Definitional objective G + lam*L of candidate (j, c) on rows ``pos``."""
    go_left = Xb[pos, j] <= c
    lp = pos[go_left]
    rp = pos[~go_left]
    nl, nr = lp.size, rp.size
    n = nl + nr
    nlf, nrf, nf = float(nl), float(nr), float(n)
    yl, yr = yb[lp], yb[rp]

    if is_cls:
        n1, env_n1, env_cnt = stats
        l1 = int(np.count_nonzero(yl))
        l0 = nl - l1
        r1 = n1 - l1
        r0 = (n - n1) - l0
        pl1 = l1 / nlf
        pl0 = l0 / nlf
        gl = 1.0 - pl1 * pl1 - pl0 * pl0
        pr1 = r1 / nrf
        pr0 = r0 / nrf
        gr = 1.0 - pr1 * pr1 - pr0 * pr0
        G = (nlf / nf) * gl + (nrf / nf) * gr
        if lam > 0.0 and int(np.count_nonzero(env_cnt)) >= 2:
            el = eb[lp]
            yl1 = yl != 0.0
            imax = imin = None
            for e in range(n_envs):
                if env_cnt[e] == 0:
                    continue
                in_e = el == e
                l1_e = int(np.count_nonzero(yl1 & in_e))
                l0_e = int(np.count_nonzero(in_e)) - l1_e
                n1_e = int(env_n1[e])
                n0_e = int(env_cnt[e]) - n1_e
                num = (l1_e + 0.5) / (n1_e + 1.0)
                den = (l0_e + 0.5) / (n0_e + 1.0)
                ie = num / den
                if imax is None:
                    imax = imin = ie
                else:
                    imax = max(imax, ie)
                    imin = min(imin, ie)
            return G + lam * (imax / imin - 1.0)
        return G

    env_mean, env_cnt = stats
    ml = _seq_sum(yl) / nlf
    mr = _seq_sum(yr) / nrf
    dl = yl - ml
    dr = yr - mr
    hl = _seq_sum(dl * dl) / nlf
    hr = _seq_sum(dr * dr) / nrf
    G = (nlf / nf) * hl + (nrf / nf) * hr
    if lam > 0.0 and int(np.count_nonzero(env_cnt)) >= 2:
        el = eb[lp]
        rates = []
        for e in range(n_envs):
            if env_cnt[e] == 0:
                continue
            yle = yl[el == e]
            if yle.size == 0:
                continue  # environment entirely on the right: excluded
            rates.append(_seq_sum(yle) / float(yle.size) - float(env_mean[e]))
        if len(rates) >= 2:
            k = float(len(rates))
            acc = 0.0
            for r in rates:
                acc += r
            mean = acc / k
            ssd = 0.0
            for r in rates:
                d = r - mean
                ssd += d * d
            return G + lam * (ssd / k)
    return G


def scan_node(X, y, env_ids, n_envs, rows, features, is_cls, lam, min_leaf):
    """Best penalized split over ``rows`` of X, or None.

    Returns (feature, threshold, objective). ``features`` must be ascending.
    """
    Xb = np.ascontiguousarray(X)
    return _scan(
        Xb, np.asarray(y), np.asarray(env_ids, dtype=np.int64),
        np.asarray(rows, dtype=np.int64), np.asarray(features, dtype=np.int64),
        n_envs, is_cls, float(lam), int(min_leaf),
    )


def _scan(Xb, yb, eb, pos, feats, n_envs, is_cls, lam, min_leaf):
    n_m = pos.size
    if n_m < 2 * min_leaf:
        return None
    nf = float(n_m)
    y_node = yb[pos]
    e_node = eb[pos]
    stats = _node_stats(y_node, e_node, n_envs, is_cls)
    if is_cls:
        n1, env_n1, env_cnt = stats
        n0 = n_m - n1
        if n1 == 0 or n0 == 0:
            return None
    else:
        env_mean, env_cnt = stats
        if np.all(y_node == y_node[0]):
            return None
    use_pen = lam > 0.0 and int(np.count_nonzero(env_cnt)) >= 2

    winners: list[tuple[int, float]] = []
    for j in feats:
        j = int(j)
        vals = Xb[pos, j]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        if sv[0] == sv[n_m - 1]:
            continue
        b = np.flatnonzero(sv[:-1] < sv[1:])
        thr = (sv[b] + sv[b + 1]) * 0.5
        nl = b + 1
        ok = (thr < sv[b + 1]) & (nl >= min_leaf) & (n_m - nl >= min_leaf)
        if not ok.any():
            continue
        b, thr, nl = b[ok], thr[ok], nl[ok]
        sy = y_node[order]
        se = e_node[order]
        nlf = nl.astype(np.float64)
        nrf = nf - nlf

        if is_cls:
            cum1 = np.cumsum((sy != 0.0).astype(np.int64))
            l1 = cum1[b]
            l0 = nl - l1
            r1 = n1 - l1
            r0 = n0 - l0
            pl1 = l1 / nlf
            pl0 = l0 / nlf
            gl = 1.0 - pl1 * pl1 - pl0 * pl0
            pr1 = r1 / nrf
            pr0 = r0 / nrf
            gr = 1.0 - pr1 * pr1 - pr0 * pr0
            G = (nlf / nf) * gl + (nrf / nf) * gr
        else:
            cums = np.cumsum(sy)
            cumq = np.cumsum(sy * sy)
            S = float(cums[n_m - 1])
            Q = float(cumq[n_m - 1])
            ls = cums[b]
            lq = cumq[b]
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
            imax = imin = None
            for e in range(n_envs):
                if env_cnt[e] == 0:
                    continue
                in_e = se == e
                cl1 = np.cumsum((in_e & (sy != 0.0)).astype(np.int64))[b]
                cl0 = np.cumsum(in_e.astype(np.int64))[b] - cl1
                n1_e = int(env_n1[e])
                n0_e = int(env_cnt[e]) - n1_e
                num = (cl1 + 0.5) / (n1_e + 1.0)
                den = (cl0 + 0.5) / (n0_e + 1.0)
                ie = num / den
                if imax is None:
                    imax = ie.copy()
                    imin = ie
                else:
                    imax = np.maximum(imax, ie)
                    imin = np.minimum(imin, ie)
            obj = G + lam * (imax / imin - 1.0)
        else:
            k = np.zeros(b.size, dtype=np.int64)
            racc = np.zeros(b.size)
            env_rates = []
            for e in range(n_envs):
                if env_cnt[e] == 0:
                    env_rates.append(None)
                    continue
                in_e = se == e
                clc = np.cumsum(in_e.astype(np.int64))[b]
                cls_ = np.cumsum(np.where(in_e, sy, 0.0))[b]
                contrib = clc >= 1
                rate = np.where(
                    contrib, cls_ / np.where(clc == 0, 1, clc) - float(env_mean[e]), 0.0
                )
                env_rates.append((contrib, rate))
                k += contrib
                racc = racc + rate
            kf = np.where(k == 0, 1, k).astype(np.float64)
            mean = racc / kf
            ssd = np.zeros(b.size)
            for ent in env_rates:
                if ent is None:
                    continue
                contrib, rate = ent
                d = rate - mean
                ssd = ssd + np.where(contrib, d * d, 0.0)
            L = np.where(k >= 2, ssd / kf, 0.0)
            obj = G + lam * L

        i = int(np.argmin(obj))
        winners.append((j, float(thr[i])))

    if not winners:
        return None
    best = None
    for j, c in winners:  # ascending feature order; strict < keeps smallest j
        co = _canonical_objective(Xb, yb, eb, pos, j, c, n_envs, is_cls, lam, stats)
        if best is None or co < best[2]:
            best = (j, c, co)
    return best


def _leaf_prediction(y_node, is_cls):
    n_m = y_node.size
    if is_cls:
        return int(np.count_nonzero(y_node)) / n_m
    return _seq_sum(y_node) / float(n_m)


def grow_tree(X, y, env_ids, n_envs, rows, is_cls, lam, max_depth, min_leaf,
              feature_sampler=None):
    """Grow one tree over ``rows``; returns flat preorder node arrays.

    Output: (feature i4, threshold f8, left i4, right i4, pred f8, count i8)
    with feature == LEAF and children == LEAF marking leaves; node 0 is the
    root. ``feature_sampler``, when given, is called once per split attempt
    and must return an ascending array of candidate feature indices.
    """
    rows = np.asarray(rows, dtype=np.int64)
    Xb = np.ascontiguousarray(X[rows])
    yb = np.asarray(y)[rows]
    eb = np.asarray(env_ids, dtype=np.int64)[rows]
    k, p = Xb.shape
    all_feats = np.arange(p, dtype=np.int64)

    feature = []
    threshold = []
    left = []
    right = []
    pred = []
    count = []

    # explicit stack, preorder node ids: (positions, depth, parent, is_right)
    stack = [(np.arange(k, dtype=np.int64), 0, -1, False)]
    while stack:
        pos, depth, parent, is_right = stack.pop()
        nid = len(feature)
        if parent >= 0:
            if is_right:
                right[parent] = nid
            else:
                left[parent] = nid
        n_m = pos.size
        y_node = yb[pos]
        is_pure = (
            int(np.count_nonzero(y_node)) in (0, n_m)
            if is_cls
            else bool(np.all(y_node == y_node[0]))
        )
        best = None
        if depth < max_depth and not is_pure:
            feats = all_feats if feature_sampler is None else feature_sampler()
            best = _scan(Xb, yb, eb, pos, feats, n_envs, is_cls, lam, min_leaf)
        if best is None:
            feature.append(LEAF)
            threshold.append(np.nan)
            left.append(LEAF)
            right.append(LEAF)
            pred.append(_leaf_prediction(y_node, is_cls))
            count.append(n_m)
            continue
        j, c, _ = best
        feature.append(j)
        threshold.append(c)
        left.append(-2)   # patched when children pop
        right.append(-2)
        pred.append(np.nan)
        count.append(n_m)
        go_left = Xb[pos, j] <= c
        stack.append((pos[~go_left], depth + 1, nid, True))
        stack.append((pos[go_left], depth + 1, nid, False))

    return (
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(pred, dtype=np.float64),
        np.asarray(count, dtype=np.int64),
    )
