"""Compiled per-packet simulation loops.

These mirror the reference automata in :mod:`feedback_arq.schemes` draw for
draw: they consume a pre-drawn uniform array in the same order the reference
path calls ``rng.random()``, so both produce identical outcomes from the same
generator state.  Outcome arrays are indexed by packet id.
"""
from __future__ import annotations

import numpy as np
from numba import njit

KIND_SAW = 0  # Reg-SAW and Asym-SAW
KIND_LREP = 1
KIND_LACK = 2
KIND_RETX = 3
KIND_BLIND = 4

POLICY_NEWEST = 0
POLICY_POSTERIOR = 1


@njit(cache=True)
def saw_kernel(kind, M, L, q, p0, p1, n, u, decoded, declared, n_tx, n_fb, delay, latency):
    """Single-outstanding-packet schemes.  Returns the number of uniforms consumed."""
    pos = 0
    for pid in range(n):
        a = 0
        dec = False
        lat = -1
        fb = 0
        occ = 0
        ok = False
        if kind == KIND_BLIND:
            for a in range(1, M + 1):
                if not dec:
                    if u[pos] >= q[a]:
                        dec = True
                        lat = a - 1
                    pos += 1
            a = M
            occ = M
            ok = True
        elif kind == KIND_LACK:
            t = 0
            acks = 0
            a = 1
            if u[pos] >= q[1]:
                dec = True
                lat = 0
            pos += 1
            while True:
                flip = p1 if dec else p0
                obs = (1 if dec else 0) ^ (1 if u[pos] < flip else 0)
                pos += 1
                fb += 1
                if obs == 1:
                    acks += 1
                    if acks == L:
                        ok = True
                        break
                elif a == M:
                    break
                t += 1
                if obs == 0:
                    a += 1
                    if not dec:
                        if u[pos] >= q[a]:
                            dec = True
                            lat = t
                        pos += 1
            occ = fb
        else:
            acks = 0
            step = L if kind == KIND_LREP else 1
            for a in range(1, M + 1):
                if not dec:
                    if u[pos] >= q[a]:
                        dec = True
                        lat = (a - 1) * step
                    pos += 1
                sent = 1 if dec else 0
                flip = p1 if dec else p0
                if kind == KIND_LREP:
                    good = 0
                    for _ in range(L):
                        good += sent ^ (1 if u[pos] < flip else 0)
                        pos += 1
                    fb += L
                    if good == L:
                        ok = True
                        break
                else:
                    obs = sent ^ (1 if u[pos] < flip else 0)
                    pos += 1
                    fb += 1
                    acks += obs
                    if kind == KIND_SAW and obs == 1:
                        ok = True
                        break
                    if kind == KIND_RETX and acks == L:
                        ok = True
                        break
            occ = fb
        decoded[pid] = dec
        declared[pid] = ok
        n_tx[pid] = a
        n_fb[pid] = fb
        delay[pid] = occ
        latency[pid] = lat
    return pos


@njit(cache=True)
def _lookup(tx, ack, nak, ndi_idx, M, L, policy, post, nak_cap):
    best = -1
    best_score = -2.0
    for j in range(L):
        l = (ndi_idx - j) % L
        if 0 < tx[l] < M and ack[l] < L:
            if policy == POLICY_NEWEST:
                return l
            nk = nak[l]
            if nk > nak_cap:
                nk = nak_cap
            s = post[tx[l], ack[l], nk] if nk >= tx[l] else -1.0
            if s > best_score:
                best = l
                best_score = s
    return best


@njit(cache=True)
def bcf_kernel(M, L, q, p0, p1, n, policy, post, u, decoded, declared, n_tx, latency):
    """BCF-SAW.  Runs until packets 0..n-1 are evicted; returns uniforms consumed.

    Under error-free NDI the receiver counters mirror the transmitter's for
    every slot that can be retransmitted, so one set of counters serves both ends.
    """
    nak_cap = post.shape[2] - 1
    pkt = np.full(L, -1, np.int64)
    tx = np.zeros(L, np.int64)
    ack = np.zeros(L, np.int64)
    nak = np.zeros(L, np.int64)
    flag = np.zeros(L, np.bool_)
    first = np.zeros(L, np.int64)
    dec_at = np.full(L, -1, np.int64)
    ndi_idx = L - 1
    next_pid = 0
    emitted = 0
    observed = 1
    rtt = 0
    pos = 0
    while emitted < n:
        new = False
        if observed == 1:
            for l in range(L):
                ack[l] += 1
            new = True
        else:
            exhausted = True
            for l in range(L):
                if tx[l] != 0 and tx[l] != M:
                    exhausted = False
            if exhausted:
                new = True
            else:
                for l in range(L):
                    nak[l] += 1
                k = _lookup(tx, ack, nak, ndi_idx, M, L, policy, post, nak_cap)
                if k < 0:
                    new = True
        if new:
            ndi_idx = (ndi_idx + 1) % L
            k = ndi_idx
            old = pkt[k]
            if old >= 0 and old < n:
                decoded[old] = flag[k]
                declared[old] = ack[k] >= L
                n_tx[old] = tx[k]
                latency[old] = dec_at[k] - first[k] if dec_at[k] >= 0 else -1
                emitted += 1
            pkt[k] = next_pid
            next_pid += 1
            tx[k] = 1
            ack[k] = 0
            nak[k] = 0
            first[k] = rtt
            dec_at[k] = -1
            flag[k] = u[pos] >= q[1]
            pos += 1
            if flag[k]:
                dec_at[k] = rtt
        else:
            tx[k] += 1
            if not flag[k]:
                flag[k] = u[pos] >= q[tx[k]]
                pos += 1
                if flag[k]:
                    dec_at[k] = rtt
        fb = 1
        for l in range(L):
            if l == ndi_idx or 0 < tx[l] < M:
                if not flag[l]:
                    fb = 0
        flip = p1 if fb == 1 else p0
        observed = fb ^ (1 if u[pos] < flip else 0)
        pos += 1
        rtt += 1
    return pos
