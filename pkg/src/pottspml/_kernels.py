"""JIT-compiled inner loops for the samplers and the ICM classifier.

Every kernel is deterministic: randomness enters only through pre-drawn
uniform arrays, so reproducibility is owned entirely by the caller's
generator.  Scratch arrays (union-find parents/sizes, per-class counts)
are allocated by the caller and reused across sweeps.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _find(parent, i):
    # path halving
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def sw_sweep(labels, pair_a, pair_b, p_open, bond_u, label_u, num_classes,
             parent, size):
    """One Swendsen-Wang cluster sweep, in place on flat ``labels``.

    Bonds open between equal-label neighbor pairs with probability
    ``p_open`` (tested against ``bond_u``); connected components over open
    bonds are found with union by size + path halving; component with root
    site ``r`` is relabeled to ``int(label_u[r] * num_classes)``.
    """
    n = labels.shape[0]
    for i in range(n):
        parent[i] = i
        size[i] = 1
    for k in range(pair_a.shape[0]):
        a = pair_a[k]
        b = pair_b[k]
        if labels[a] != labels[b]:
            continue
        if bond_u[k] >= p_open:
            continue
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra == rb:
            continue
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]
    for i in range(n):
        r = _find(parent, i)
        labels[i] = np.int32(label_u[r] * num_classes)


@njit(cache=True)
def sw_run(labels, pair_a, pair_b, p_open, bond_u2, label_u2, num_classes,
           parent, size, hist):
    """Run one SW sweep per row of the uniform arrays; tally visited states.

    ``hist`` has length ``num_classes ** n_sites`` (state index reads the
    flat labels as base-L digits, first site most significant) or length 0
    to disable tallying.
    """
    n = labels.shape[0]
    for t in range(bond_u2.shape[0]):
        sw_sweep(labels, pair_a, pair_b, p_open, bond_u2[t], label_u2[t],
                 num_classes, parent, size)
        if hist.shape[0] > 0:
            idx = 0
            for i in range(n):
                idx = idx * num_classes + labels[i]
            hist[idx] += 1


@njit(cache=True)
def gibbs_sweep(labels2, beta, site_u, num_classes, offsets, counts, w):
    """One raster-order Gibbs sweep, in place on 2-D ``labels2``.

    Each site is resampled from the conditional law with weights
    ``exp(beta * count_l)`` over the current neighbor configuration;
    ``site_u`` supplies one uniform per site in raster order.
    """
    rows, cols = labels2.shape
    n_off = offsets.shape[0]
    for r in range(rows):
        for c in range(cols):
            for l in range(num_classes):
                counts[l] = 0
            for k in range(n_off):
                rr = r + offsets[k, 0]
                cc = c + offsets[k, 1]
                if 0 <= rr < rows and 0 <= cc < cols:
                    counts[labels2[rr, cc]] += 1
            m = beta * counts[0]
            for l in range(1, num_classes):
                a = beta * counts[l]
                if a > m:
                    m = a
            tot = 0.0
            for l in range(num_classes):
                w[l] = np.exp(beta * counts[l] - m)
                tot += w[l]
            u = site_u[r * cols + c] * tot
            acc = 0.0
            pick = num_classes - 1
            for l in range(num_classes):
                acc += w[l]
                if u < acc:
                    pick = l
                    break
            labels2[r, c] = pick


@njit(cache=True)
def gibbs_run(labels2, beta, site_u2, num_classes, offsets, counts, w, hist):
    """One Gibbs sweep per row of ``site_u2``; tally states like ``sw_run``."""
    rows, cols = labels2.shape
    for t in range(site_u2.shape[0]):
        gibbs_sweep(labels2, beta, site_u2[t], num_classes, offsets, counts, w)
        if hist.shape[0] > 0:
            idx = 0
            for r in range(rows):
                for c in range(cols):
                    idx = idx * num_classes + labels2[r, c]
            hist[idx] += 1


@njit(cache=True)
def icm_sweep(labels2, loglik, beta, offsets, counts):
    """One raster-order ICM sweep, in place; returns (changes, decreases).

    Site objective is ``loglik[l, r, c] + beta * count_l`` over the current
    (partially updated) field.  Tie rule: keep the current label whenever it
    attains the maximum, otherwise move to the lowest attaining index.
    ``decreases`` counts accepted updates that lowered the objective — a
    debug invariant that must stay 0.
    """
    rows, cols = labels2.shape
    num_classes = loglik.shape[0]
    n_off = offsets.shape[0]
    changed = 0
    decreases = 0
    for r in range(rows):
        for c in range(cols):
            for l in range(num_classes):
                counts[l] = 0
            for k in range(n_off):
                rr = r + offsets[k, 0]
                cc = c + offsets[k, 1]
                if 0 <= rr < rows and 0 <= cc < cols:
                    counts[labels2[rr, cc]] += 1
            cur = labels2[r, c]
            best = 0
            best_score = -np.inf
            for l in range(num_classes):
                s = loglik[l, r, c] + beta * counts[l]
                if s > best_score:
                    best_score = s
                    best = l
            cur_score = loglik[cur, r, c] + beta * counts[cur]
            if cur_score >= best_score:
                continue
            if best_score - cur_score < 0.0:
                decreases += 1
            labels2[r, c] = best
            changed += 1
    return changed, decreases
