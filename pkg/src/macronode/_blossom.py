"""Edmonds' blossom algorithm for maximum-weight matching on integer weights.

Array formulation of the primal-dual method (O(n^3)) in the layout popularised
by J. van Rantwijk's reference implementation: edge endpoints ``2k`` / ``2k+1``,
vertex ids ``0..n-1`` and blossom ids ``n..2n-1``. Everything lives in flat
numpy arrays and all recursion is replaced by explicit stacks so the same
source compiles under numba or runs interpreted.

Integer weights keep every dual variable integral, so slacks are compared
exactly.
"""

from __future__ import annotations

import numpy as np

from ._accel import try_jit


@try_jit(cache=True)
def _slack(k, ei, ej, wt, dualvar):
    return dualvar[ei[k]] + dualvar[ej[k]] - 2 * wt[k]


@try_jit(cache=True)
def _leaves(b, nvertex, childs, nchilds, out, stack):
    """Write the vertices contained in blossom ``b`` into ``out``; return count."""
    n_out = 0
    top = 0
    stack[top] = b
    top += 1
    while top > 0:
        top -= 1
        t = stack[top]
        if t < nvertex:
            out[n_out] = t
            n_out += 1
        else:
            for c in range(nchilds[t] - 1, -1, -1):
                stack[top] = childs[t, c]
                top += 1
    return n_out


@try_jit(cache=True)
def _assign_label(w, t, p, nvertex, endpoint, mate, label, labelend, inblossom,
                  blossombase, bestedge, childs, nchilds, queue, qtop, buf, stack):
    while True:
        b = inblossom[w]
        label[w] = t
        label[b] = t
        labelend[w] = p
        labelend[b] = p
        bestedge[w] = -1
        bestedge[b] = -1
        if t == 1:
            cnt = _leaves(b, nvertex, childs, nchilds, buf, stack)
            for i in range(cnt):
                queue[qtop] = buf[i]
                qtop += 1
            return qtop
        base = blossombase[b]
        w = endpoint[mate[base]]
        p = mate[base] ^ 1
        t = 1


@try_jit(cache=True)
def _scan_blossom(v, w, endpoint, label, labelend, inblossom, blossombase, path):
    npath = 0
    base = -1
    while v != -1 or w != -1:
        b = inblossom[v]
        if label[b] & 4:
            base = blossombase[b]
            break
        path[npath] = b
        npath += 1
        label[b] = 5
        if labelend[b] == -1:
            v = -1
        else:
            v = endpoint[labelend[b]]
            b = inblossom[v]
            v = endpoint[labelend[b]]
        if w != -1:
            tmp = v
            v = w
            w = tmp
    for i in range(npath):
        label[path[i]] = 1
    return base


@try_jit(cache=True)
def _add_blossom(base, k, nvertex, ei, ej, wt, endpoint, nb_start, nb_list, label, labelend,
                 inblossom, blossomparent, childs, nchilds, endps, blossombase, bestedge,
                 bbe, bbe_len, dualvar, unused, n_unused, queue, qtop, buf, stack, bestedgeto,
                 tmp_path, tmp_endps):
    v = ei[k]
    w = ej[k]
    bb = inblossom[base]
    bv = inblossom[v]
    bw = inblossom[w]
    n_unused -= 1
    b = unused[n_unused]
    blossombase[b] = base
    blossomparent[b] = -1
    blossomparent[bb] = b
    np_ = 0
    while bv != bb:
        blossomparent[bv] = b
        tmp_path[np_] = bv
        tmp_endps[np_] = labelend[bv]
        np_ += 1
        v = endpoint[labelend[bv]]
        bv = inblossom[v]
    # children: bb, then the v-side trace reversed, then the w-side trace
    L = 0
    childs[b, L] = bb
    L += 1
    for i in range(np_ - 1, -1, -1):
        childs[b, L] = tmp_path[i]
        endps[b, L - 1] = tmp_endps[i]
        L += 1
    endps[b, L - 1] = 2 * k
    while bw != bb:
        blossomparent[bw] = b
        childs[b, L] = bw
        endps[b, L] = labelend[bw] ^ 1
        L += 1
        w = endpoint[labelend[bw]]
        bw = inblossom[w]
    nchilds[b] = L
    label[b] = 1
    labelend[b] = labelend[bb]
    dualvar[b] = 0
    cnt = _leaves(b, nvertex, childs, nchilds, buf, stack)
    for i in range(cnt):
        x = buf[i]
        if label[inblossom[x]] == 2:
            queue[qtop] = x
            qtop += 1
        inblossom[x] = b
    for i in range(2 * nvertex):
        bestedgeto[i] = -1
    for c in range(L):
        sb = childs[b, c]
        if bbe_len[sb] < 0:
            cnt = _leaves(sb, nvertex, childs, nchilds, buf, stack)
            for li in range(cnt):
                x = buf[li]
                for q in range(nb_start[x], nb_start[x + 1]):
                    kk = nb_list[q] // 2
                    i = ei[kk]
                    j = ej[kk]
                    if inblossom[j] == b:
                        j = i
                    bj = inblossom[j]
                    if bj != b and label[bj] == 1:
                        if bestedgeto[bj] == -1 or _slack(kk, ei, ej, wt, dualvar) < _slack(
                            bestedgeto[bj], ei, ej, wt, dualvar
                        ):
                            bestedgeto[bj] = kk
        else:
            for q in range(bbe_len[sb]):
                kk = bbe[sb, q]
                i = ei[kk]
                j = ej[kk]
                if inblossom[j] == b:
                    j = i
                bj = inblossom[j]
                if bj != b and label[bj] == 1:
                    if bestedgeto[bj] == -1 or _slack(kk, ei, ej, wt, dualvar) < _slack(
                        bestedgeto[bj], ei, ej, wt, dualvar
                    ):
                        bestedgeto[bj] = kk
        bbe_len[sb] = -1
        bestedge[sb] = -1
    m = 0
    for i in range(2 * nvertex):
        if bestedgeto[i] != -1:
            bbe[b, m] = bestedgeto[i]
            m += 1
    bbe_len[b] = m
    bestedge[b] = -1
    for q in range(m):
        kk = bbe[b, q]
        if bestedge[b] == -1 or _slack(kk, ei, ej, wt, dualvar) < _slack(bestedge[b], ei, ej, wt, dualvar):
            bestedge[b] = kk
    return n_unused, qtop


@try_jit(cache=True)
def _expand_blossom(b0, endstage, nvertex, endpoint, mate, label, labelend, inblossom,
                    blossomparent, childs, nchilds, endps, blossombase, bestedge, bbe_len,
                    dualvar, allowedge, unused, n_unused, queue, qtop, buf, stack, work):
    ntodo = 1
    work[0] = b0
    while ntodo > 0:
        ntodo -= 1
        b = work[ntodo]
        L = nchilds[b]
        for c in range(L):
            s = childs[b, c]
            blossomparent[s] = -1
            if s < nvertex:
                inblossom[s] = s
            elif endstage and dualvar[s] == 0:
                work[ntodo] = s
                ntodo += 1
            else:
                cnt = _leaves(s, nvertex, childs, nchilds, buf, stack)
                for i in range(cnt):
                    inblossom[buf[i]] = s
        if (not endstage) and label[b] == 2:
            entrychild = inblossom[endpoint[labelend[b] ^ 1]]
            j = 0
            for c in range(L):
                if childs[b, c] == entrychild:
                    j = c
                    break
            if j & 1:
                j -= L
                jstep = 1
                endptrick = 0
            else:
                jstep = -1
                endptrick = 1
            p = labelend[b]
            while j != 0:
                label[endpoint[p ^ 1]] = 0
                label[endpoint[endps[b, (j - endptrick) % L] ^ endptrick ^ 1]] = 0
                qtop = _assign_label(endpoint[p ^ 1], 2, p, nvertex, endpoint, mate, label, labelend,
                                     inblossom, blossombase, bestedge, childs, nchilds, queue, qtop,
                                     buf, stack)
                allowedge[endps[b, (j - endptrick) % L] // 2] = True
                j += jstep
                p = endps[b, (j - endptrick) % L] ^ endptrick
                allowedge[p // 2] = True
                j += jstep
            bv = childs[b, j % L]
            label[endpoint[p ^ 1]] = 2
            label[bv] = 2
            labelend[endpoint[p ^ 1]] = p
            labelend[bv] = p
            bestedge[bv] = -1
            j += jstep
            while childs[b, j % L] != entrychild:
                bv = childs[b, j % L]
                if label[bv] == 1:
                    j += jstep
                    continue
                cnt = _leaves(bv, nvertex, childs, nchilds, buf, stack)
                v = -1
                for i in range(cnt):
                    v = buf[i]
                    if label[v] != 0:
                        break
                if label[v] != 0:
                    label[v] = 0
                    label[endpoint[mate[blossombase[bv]]]] = 0
                    qtop = _assign_label(v, 2, labelend[v], nvertex, endpoint, mate, label, labelend,
                                         inblossom, blossombase, bestedge, childs, nchilds, queue,
                                         qtop, buf, stack)
                j += jstep
        label[b] = -1
        labelend[b] = -1
        nchilds[b] = 0
        blossombase[b] = -1
        bbe_len[b] = -1
        bestedge[b] = -1
        unused[n_unused] = b
        n_unused += 1
    return n_unused, qtop


@try_jit(cache=True)
def _augment_blossom(b0, v0, nvertex, endpoint, mate, blossomparent, childs, nchilds, endps,
                     blossombase, work_b, work_v, rot):
    ntodo = 1
    work_b[0] = b0
    work_v[0] = v0
    while ntodo > 0:
        ntodo -= 1
        b = work_b[ntodo]
        v = work_v[ntodo]
        t = v
        while blossomparent[t] != b:
            t = blossomparent[t]
        if t >= nvertex:
            work_b[ntodo] = t
            work_v[ntodo] = v
            ntodo += 1
        L = nchilds[b]
        i = 0
        for c in range(L):
            if childs[b, c] == t:
                i = c
                break
        j = i
        if i & 1:
            j -= L
            jstep = 1
            endptrick = 0
        else:
            jstep = -1
            endptrick = 1
        while j != 0:
            j += jstep
            t = childs[b, j % L]
            p = endps[b, (j - endptrick) % L] ^ endptrick
            if t >= nvertex:
                work_b[ntodo] = t
                work_v[ntodo] = endpoint[p]
                ntodo += 1
            j += jstep
            t = childs[b, j % L]
            if t >= nvertex:
                work_b[ntodo] = t
                work_v[ntodo] = endpoint[p ^ 1]
                ntodo += 1
            mate[endpoint[p]] = p ^ 1
            mate[endpoint[p ^ 1]] = p
        # rotate children so the child holding v comes first
        for c in range(L):
            rot[c] = childs[b, (c + i) % L]
        for c in range(L):
            childs[b, c] = rot[c]
        for c in range(L):
            rot[c] = endps[b, (c + i) % L]
        for c in range(L):
            endps[b, c] = rot[c]
        blossombase[b] = v


@try_jit(cache=True)
def _augment_matching(k, nvertex, ei, ej, endpoint, mate, labelend, inblossom, blossomparent,
                      childs, nchilds, endps, blossombase, work_b, work_v, rot):
    for side in range(2):
        if side == 0:
            s = ei[k]
            p = 2 * k + 1
        else:
            s = ej[k]
            p = 2 * k
        while True:
            bs = inblossom[s]
            if bs >= nvertex:
                _augment_blossom(bs, s, nvertex, endpoint, mate, blossomparent, childs, nchilds,
                                 endps, blossombase, work_b, work_v, rot)
            mate[s] = p
            if labelend[bs] == -1:
                break
            t = endpoint[labelend[bs]]
            bt = inblossom[t]
            s = endpoint[labelend[bt]]
            j = endpoint[labelend[bt] ^ 1]
            if bt >= nvertex:
                _augment_blossom(bt, j, nvertex, endpoint, mate, blossomparent, childs, nchilds,
                                 endps, blossombase, work_b, work_v, rot)
            mate[j] = labelend[bt]
            p = labelend[bt] ^ 1


@try_jit(cache=True)
def max_weight_matching_int(nvertex, ei, ej, wt, nb_start, nb_list, maxcardinality):
    """Maximum-weight matching; returns ``mate`` (``-1`` for unmatched vertices).

    Parameters
    ----------
    nvertex : int
    ei, ej : int64 arrays
        Edge endpoints (``ei[k] != ej[k]``).
    wt : int64 array
        Integer edge weights.
    nb_start, nb_list : int64 arrays
        CSR lists of remote endpoints (``2k+1`` for ``ei``, ``2k`` for ``ej``).
    maxcardinality : bool
        Restrict to maximum-cardinality matchings.
    """
    nedge = ei.shape[0]
    n2 = 2 * nvertex
    mate = np.full(nvertex, -1, np.int64)
    if nedge == 0:
        return mate
    maxweight = max(0, wt.max())
    endpoint = np.empty(2 * nedge, np.int64)
    for k in range(nedge):
        endpoint[2 * k] = ei[k]
        endpoint[2 * k + 1] = ej[k]
    label = np.zeros(n2, np.int64)
    labelend = np.full(n2, -1, np.int64)
    inblossom = np.arange(nvertex).astype(np.int64)
    blossomparent = np.full(n2, -1, np.int64)
    childs = np.zeros((n2, nvertex + 1), np.int64)
    nchilds = np.zeros(n2, np.int64)
    endps = np.zeros((n2, nvertex + 1), np.int64)
    blossombase = np.full(n2, -1, np.int64)
    for v in range(nvertex):
        blossombase[v] = v
    bestedge = np.full(n2, -1, np.int64)
    bbe = np.zeros((n2, n2), np.int32)
    bbe_len = np.full(n2, -1, np.int64)
    unused = np.empty(nvertex, np.int64)
    for i in range(nvertex):
        unused[i] = n2 - 1 - i
    n_unused = nvertex
    dualvar = np.zeros(n2, np.int64)
    for v in range(nvertex):
        dualvar[v] = maxweight
    allowedge = np.zeros(nedge, np.bool_)
    queue = np.empty(4 * nvertex + 4, np.int64)
    buf = np.empty(nvertex + 1, np.int64)
    stack = np.empty(n2 + 1, np.int64)
    work = np.empty(n2 + 1, np.int64)
    work_v = np.empty(n2 + 1, np.int64)
    path = np.empty(n2 + 1, np.int64)
    bestedgeto = np.empty(n2, np.int64)
    tmp_path = np.empty(n2 + 1, np.int64)
    tmp_endps = np.empty(n2 + 1, np.int64)
    rot = np.empty(nvertex + 1, np.int64)

    for _stage in range(nvertex):
        label[:] = 0
        bestedge[:] = -1
        for b in range(nvertex, n2):
            bbe_len[b] = -1
        allowedge[:] = False
        qtop = 0
        for v in range(nvertex):
            if mate[v] == -1 and label[inblossom[v]] == 0:
                qtop = _assign_label(v, 1, -1, nvertex, endpoint, mate, label, labelend, inblossom,
                                     blossombase, bestedge, childs, nchilds, queue, qtop, buf, stack)
        augmented = False
        while True:
            while qtop > 0 and not augmented:
                qtop -= 1
                v = queue[qtop]
                for q in range(nb_start[v], nb_start[v + 1]):
                    p = nb_list[q]
                    k = p // 2
                    w = endpoint[p]
                    if inblossom[v] == inblossom[w]:
                        continue
                    kslack = 0
                    if not allowedge[k]:
                        kslack = _slack(k, ei, ej, wt, dualvar)
                        if kslack <= 0:
                            allowedge[k] = True
                    if allowedge[k]:
                        if label[inblossom[w]] == 0:
                            qtop = _assign_label(w, 2, p ^ 1, nvertex, endpoint, mate, label, labelend,
                                                 inblossom, blossombase, bestedge, childs, nchilds,
                                                 queue, qtop, buf, stack)
                        elif label[inblossom[w]] == 1:
                            base = _scan_blossom(v, w, endpoint, label, labelend, inblossom,
                                                 blossombase, path)
                            if base >= 0:
                                n_unused, qtop = _add_blossom(
                                    base, k, nvertex, ei, ej, wt, endpoint, nb_start, nb_list, label,
                                    labelend, inblossom, blossomparent, childs, nchilds, endps,
                                    blossombase, bestedge, bbe, bbe_len, dualvar, unused, n_unused,
                                    queue, qtop, buf, stack, bestedgeto, tmp_path, tmp_endps)
                            else:
                                _augment_matching(k, nvertex, ei, ej, endpoint, mate, labelend,
                                                  inblossom, blossomparent, childs, nchilds, endps,
                                                  blossombase, work, work_v, rot)
                                augmented = True
                                break
                        elif label[w] == 0:
                            label[w] = 2
                            labelend[w] = p ^ 1
                    elif label[inblossom[w]] == 1:
                        b = inblossom[v]
                        if bestedge[b] == -1 or kslack < _slack(bestedge[b], ei, ej, wt, dualvar):
                            bestedge[b] = k
                    elif label[w] == 0:
                        if bestedge[w] == -1 or kslack < _slack(bestedge[w], ei, ej, wt, dualvar):
                            bestedge[w] = k
            if augmented:
                break

            deltatype = -1
            delta = 0
            deltaedge = -1
            deltablossom = -1
            if not maxcardinality:
                deltatype = 1
                delta = dualvar[0]
                for v in range(1, nvertex):
                    if dualvar[v] < delta:
                        delta = dualvar[v]
            for v in range(nvertex):
                if label[inblossom[v]] == 0 and bestedge[v] != -1:
                    dd = _slack(bestedge[v], ei, ej, wt, dualvar)
                    if deltatype == -1 or dd < delta:
                        delta = dd
                        deltatype = 2
                        deltaedge = bestedge[v]
            for b in range(n2):
                if blossomparent[b] == -1 and label[b] == 1 and bestedge[b] != -1:
                    dd = _slack(bestedge[b], ei, ej, wt, dualvar) // 2
                    if deltatype == -1 or dd < delta:
                        delta = dd
                        deltatype = 3
                        deltaedge = bestedge[b]
            for b in range(nvertex, n2):
                if blossombase[b] >= 0 and blossomparent[b] == -1 and label[b] == 2:
                    if deltatype == -1 or dualvar[b] < delta:
                        delta = dualvar[b]
                        deltatype = 4
                        deltablossom = b
            if deltatype == -1:
                deltatype = 1
                delta = dualvar[0]
                for v in range(1, nvertex):
                    if dualvar[v] < delta:
                        delta = dualvar[v]
                if delta < 0:
                    delta = 0
            for v in range(nvertex):
                lb = label[inblossom[v]]
                if lb == 1:
                    dualvar[v] -= delta
                elif lb == 2:
                    dualvar[v] += delta
            for b in range(nvertex, n2):
                if blossombase[b] >= 0 and blossomparent[b] == -1:
                    if label[b] == 1:
                        dualvar[b] += delta
                    elif label[b] == 2:
                        dualvar[b] -= delta
            if deltatype == 1:
                break
            elif deltatype == 2:
                allowedge[deltaedge] = True
                i = ei[deltaedge]
                if label[inblossom[i]] == 0:
                    i = ej[deltaedge]
                queue[qtop] = i
                qtop += 1
            elif deltatype == 3:
                allowedge[deltaedge] = True
                queue[qtop] = ei[deltaedge]
                qtop += 1
            else:
                n_unused, qtop = _expand_blossom(
                    deltablossom, False, nvertex, endpoint, mate, label, labelend, inblossom,
                    blossomparent, childs, nchilds, endps, blossombase, bestedge, bbe_len, dualvar,
                    allowedge, unused, n_unused, queue, qtop, buf, stack, work)
        if not augmented:
            break
        for b in range(nvertex, n2):
            if blossomparent[b] == -1 and blossombase[b] >= 0 and label[b] == 1 and dualvar[b] == 0:
                n_unused, qtop = _expand_blossom(
                    b, True, nvertex, endpoint, mate, label, labelend, inblossom, blossomparent,
                    childs, nchilds, endps, blossombase, bestedge, bbe_len, dualvar, allowedge,
                    unused, n_unused, queue, qtop, buf, stack, work)

    for v in range(nvertex):
        if mate[v] >= 0:
            mate[v] = endpoint[mate[v]]
    return mate


def neighbour_lists(nvertex: int, ei: np.ndarray, ej: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CSR remote-endpoint lists in edge order."""
    owner = np.concatenate([ei, ej])
    remote = np.concatenate([2 * np.arange(len(ei)) + 1, 2 * np.arange(len(ei))])
    edge_id = np.concatenate([np.arange(len(ei)), np.arange(len(ei))])
    order = np.lexsort((edge_id, owner))
    nb_list = remote[order].astype(np.int64)
    counts = np.bincount(owner, minlength=nvertex)
    nb_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return nb_start, nb_list
