"""Sampling kernels.

Every kernel writes trees as preorder arity sequences, concatenated into one
``int64`` array with an ``offsets`` array of length ``n_trees + 1``. Offspring
counts are drawn by inverse CDF from a cumulative table whose last entry is 1.

A negative ``node_cap`` or ``height_cap`` means "no cap".
"""
import numpy as np

from ._accel import jit


@jit
def draw_index(cdf, rng):
    x = rng.random()
    lo = 0
    hi = cdf.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] > x:
            hi = mid
        else:
            lo = mid + 1
    return lo


@jit
def ensure(buf, need):
    n = buf.shape[0]
    if need <= n:
        return buf
    while n < need:
        n *= 2
    out = np.empty(n, dtype=buf.dtype)
    out[: buf.shape[0]] = buf
    return out


@jit
def gw_bfs(root_cdf, cdf, node_cap, height_cap, rng, bfs):
    """Breadth-first generation of one tree; level-order arities go to ``bfs``.

    Returns ``(bfs, n_nodes, truncated)``. Once a cap is hit, the remaining
    frontier is closed off as leaves.
    """
    bfs = ensure(bfs, 1)
    n = 1
    i = 0
    level_end = 1
    depth = 0
    truncated = False
    while i < n:
        if i == level_end:
            depth += 1
            level_end = n
        if truncated:
            bfs[i] = 0
            i += 1
            continue
        if i == 0:
            k = draw_index(root_cdf, rng)
        else:
            k = draw_index(cdf, rng)
        if k > 0 and height_cap >= 0 and depth >= height_cap:
            truncated = True
            k = 0
        elif node_cap > 0 and n + k > node_cap:
            truncated = True
            k = 0
        bfs[i] = k
        n += k
        bfs = ensure(bfs, n)
        i += 1
    return bfs, n, truncated


@jit
def bfs_to_preorder(bfs, n, out, pos, first, stack):
    first = ensure(first, n)
    stack = ensure(stack, n)
    out = ensure(out, pos + n)
    c = 1
    for j in range(n):
        first[j] = c
        c += bfs[j]
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        v = stack[top]
        k = bfs[v]
        out[pos] = k
        pos += 1
        for j in range(k - 1, -1, -1):
            stack[top] = first[v] + j
            top += 1
    return out, pos, first, stack


@jit
def gw_batch(root_cdf, cdf, n_trees, node_cap, height_cap, rng):
    out = np.empty(1024, np.int64)
    offsets = np.empty(n_trees + 1, np.int64)
    flags = np.zeros(n_trees, np.bool_)
    bfs = np.empty(256, np.int64)
    first = np.empty(256, np.int64)
    stack = np.empty(256, np.int64)
    pos = 0
    for t in range(n_trees):
        offsets[t] = pos
        bfs, n, trunc = gw_bfs(root_cdf, cdf, node_cap, height_cap, rng, bfs)
        out, pos, first, stack = bfs_to_preorder(bfs, n, out, pos, first, stack)
        flags[t] = trunc
    offsets[n_trees] = pos
    return out[:pos].copy(), offsets, flags


@jit
def emit_gw(cdf, count, out, pos, limit, rng):
    """Append ``count`` i.i.d. trees in preorder by the Lukasiewicz walk.

    ``limit`` bounds the absolute write position (negative: unbounded).
    Returns ``(out, pos, truncated)``.
    """
    pending = count
    truncated = False
    while pending > 0:
        pending -= 1
        k = 0
        if not truncated:
            k = draw_index(cdf, rng)
            if limit >= 0 and pos + 1 + pending + k > limit:
                truncated = True
                k = 0
        out = ensure(out, pos + 1)
        out[pos] = k
        pos += 1
        pending += k
    return out, pos, truncated


@jit
def pruned_gw_batch(cdf, u, n_trees, node_cap, rng):
    """GW(p) grown lazily with every inner node kept w.p. ``u**(k-1)``.

    Descendants of a cut node are never generated, which leaves the law of
    the pruned tree unchanged while keeping critical inputs cheap.
    """
    out = np.empty(1024, np.int64)
    offsets = np.empty(n_trees + 1, np.int64)
    flags = np.zeros(n_trees, np.bool_)
    pos = 0
    for t in range(n_trees):
        offsets[t] = pos
        start = pos
        pending = 1
        trunc = False
        while pending > 0:
            pending -= 1
            k = 0
            if not trunc:
                k = draw_index(cdf, rng)
                if k >= 1 and not (rng.random() < u ** (k - 1)):
                    k = 0
                if node_cap > 0 and pos - start + 1 + pending + k > node_cap:
                    trunc = True
                    k = 0
            out = ensure(out, pos + 1)
            out[pos] = k
            pos += 1
            pending += k
        flags[t] = trunc
    offsets[n_trees] = pos
    return out[:pos].copy(), offsets, flags


@jit
def prune_fixed_batch(arities, sizes, u, n_reps, rng):
    """Independent node prunings of one fixed tree."""
    n = arities.shape[0]
    out = np.empty(max(n * n_reps, 1), np.int64)
    offsets = np.empty(n_reps + 1, np.int64)
    pos = 0
    for r in range(n_reps):
        offsets[r] = pos
        i = 0
        while i < n:
            k = arities[i]
            if k >= 1 and not (rng.random() < u ** (k - 1)):
                out[pos] = 0
                pos += 1
                i += sizes[i]
            else:
                out[pos] = k
                pos += 1
                i += 1
    offsets[n_reps] = pos
    return out[:pos].copy(), offsets


@jit
def cut_batch(arities, sizes, marks, threshold):
    """Deterministic cut of one tree under each row of ``marks``.

    Node ``i`` keeps its children iff ``marks[r, i] <= threshold``.
    """
    n = arities.shape[0]
    n_reps = marks.shape[0]
    out = np.empty(max(n * n_reps, 1), np.int64)
    offsets = np.empty(n_reps + 1, np.int64)
    pos = 0
    for r in range(n_reps):
        offsets[r] = pos
        i = 0
        while i < n:
            k = arities[i]
            if k >= 1 and not (marks[r, i] <= threshold):
                out[pos] = 0
                pos += 1
                i += sizes[i]
            else:
                out[pos] = k
                pos += 1
                i += 1
    offsets[n_reps] = pos
    return out[:pos].copy(), offsets


@jit
def graft_batch(arities, offsets, root_cdf, cdf, node_cap, rng):
    """Attach an independent modified GW tree at every leaf of every input tree."""
    m = offsets.shape[0] - 1
    out = np.empty(max(2 * arities.shape[0], 16), np.int64)
    new_off = np.empty(m + 1, np.int64)
    flags = np.zeros(m, np.bool_)
    bfs = np.empty(256, np.int64)
    first = np.empty(256, np.int64)
    stack = np.empty(256, np.int64)
    pos = 0
    for t in range(m):
        new_off[t] = pos
        start = offsets[t]
        end = offsets[t + 1]
        trunc = False
        for i in range(start, end):
            a = arities[i]
            if a > 0 or trunc:
                out = ensure(out, pos + 1)
                out[pos] = a
                pos += 1
            else:
                cap = -1
                if node_cap > 0:
                    cap = node_cap - (pos - new_off[t]) - (end - i - 1)
                    if cap < 1:
                        cap = 1
                bfs, n, tr = gw_bfs(root_cdf, cdf, cap, -1, rng, bfs)
                out, pos, first, stack = bfs_to_preorder(bfs, n, out, pos, first, stack)
                if tr:
                    trunc = True
        flags[t] = trunc
    new_off[m] = pos
    return out[:pos].copy(), new_off, flags


@jit
def gstar_batch(base_pmf, pstar_cdf, us, rng):
    """Pruned size-biased tree by walking the spine, one ``u`` per sample.

    At a spine node ``K ~ p*`` is kept w.p. ``u**(K-1)``; if kept, one child
    chosen uniformly continues the spine and the others root GW(p^(u)) trees.
    Right-hand siblings are emitted after the spine ends, deepest first, which
    is their preorder position.
    """
    K = base_pmf.shape[0] - 1
    n_trees = us.shape[0]
    cdf = np.empty(K + 1)
    out = np.empty(1024, np.int64)
    offsets = np.empty(n_trees + 1, np.int64)
    right = np.empty(64, np.int64)
    pos = 0
    for t in range(n_trees):
        u = us[t]
        tail = 0.0
        for k in range(1, K + 1):
            cdf[k] = u ** (k - 1) * base_pmf[k]
            tail += cdf[k]
        cdf[0] = max(1.0 - tail, 0.0)
        for k in range(1, K + 1):
            cdf[k] += cdf[k - 1]
        cdf[K] = 1.0
        offsets[t] = pos
        level = 0
        while True:
            ks = draw_index(pstar_cdf, rng)
            if ks >= 1 and rng.random() < u ** (ks - 1):
                j = int(rng.random() * ks)
                out = ensure(out, pos + 1)
                out[pos] = ks
                pos += 1
                out, pos, _ = emit_gw(cdf, j, out, pos, -1, rng)
                right = ensure(right, level + 1)
                right[level] = ks - 1 - j
                level += 1
            else:
                out = ensure(out, pos + 1)
                out[pos] = 0
                pos += 1
                break
        for lv in range(level - 1, -1, -1):
            out, pos, _ = emit_gw(cdf, right[lv], out, pos, -1, rng)
    offsets[n_trees] = pos
    return out[:pos].copy(), offsets


@jit
def kesten_batch(pstar_cdf, cdf, h, n_trees, rng):
    """``r_h`` of the size-biased tree, level by level, plus spine child labels."""
    out = np.empty(1024, np.int64)
    offsets = np.empty(n_trees + 1, np.int64)
    spines = np.zeros((n_trees, max(h, 1)), np.int64)
    bfs = np.empty(256, np.int64)
    first = np.empty(256, np.int64)
    stack = np.empty(256, np.int64)
    pos = 0
    for t in range(n_trees):
        offsets[t] = pos
        n = 1
        spine = 0
        lo = 0
        hi = 1
        for depth in range(h):
            nxt = -1
            for v in range(lo, hi):
                if v == spine:
                    k = draw_index(pstar_cdf, rng)
                    j = int(rng.random() * k)
                    nxt = n + j
                    spines[t, depth] = j + 1
                else:
                    k = draw_index(cdf, rng)
                bfs = ensure(bfs, n + k)
                bfs[v] = k
                n += k
            spine = nxt
            lo = hi
            hi = n
        bfs = ensure(bfs, n)
        for v in range(lo, hi):
            bfs[v] = 0
        out, pos, first, stack = bfs_to_preorder(bfs, n, out, pos, first, stack)
    offsets[n_trees] = pos
    return out[:pos].copy(), offsets, spines


@jit
def ascension_step(arities, offsets, alive, bridge_cdf, q_inf, hat_cdf, node_cap, rng):
    """One grid step of the ascension process for a batch of paths.

    Each leaf receives ``N ~ bridge_cdf`` children; each child independently
    roots an infinite tree w.p. ``q_inf`` (the path is then absorbed) and
    otherwise a finite tree drawn from ``hat_cdf``. Dead paths stay dead and
    contribute an empty slot. Returns ``(arities, offsets, alive, truncated)``.
    """
    m = offsets.shape[0] - 1
    out = np.empty(max(2 * arities.shape[0], 16), np.int64)
    new_off = np.empty(m + 1, np.int64)
    new_alive = alive.copy()
    truncated = np.zeros(m, np.bool_)
    pos = 0
    for t in range(m):
        new_off[t] = pos
        if not alive[t]:
            continue
        start = offsets[t]
        end = offsets[t + 1]
        dead = False
        for i in range(start, end):
            a = arities[i]
            out = ensure(out, pos + 1)
            if a > 0:
                out[pos] = a
                pos += 1
                continue
            nk = draw_index(bridge_cdf, rng)
            out[pos] = nk
            pos += 1
            for c in range(nk):
                if rng.random() < q_inf:
                    dead = True
                    break
                limit = -1
                if node_cap > 0:
                    limit = new_off[t] + node_cap - (end - i - 1) - (nk - c - 1)
                out, pos, tr = emit_gw(hat_cdf, 1, out, pos, limit, rng)
                if tr:
                    truncated[t] = True
            if dead:
                break
        if dead:
            pos = new_off[t]
            new_alive[t] = False
    new_off[m] = pos
    return out[:pos].copy(), new_off, new_alive, truncated
