"""Samplers for the smoothness prior over label fields.

``simulate_potts`` draws realizations with the Swendsen-Wang cluster
algorithm: every neighbor pair with equal labels opens a bond with
probability ``1 - exp(-beta)``, connected components over open bonds are
relabeled uniformly at random.  Repeated sweeps leave the target
distribution ``f(x) proportional to exp(beta * agreement(x))`` invariant.

``gibbs_sweep`` is a raster-order single-site sampler with the same
stationary distribution; it is kept as an independent correctness oracle
for the cluster sampler (and it also supports negative ``beta``, which the
bond construction does not).

Reproducibility: a sweep consumes a fixed number of uniforms from the
caller's generator (``n_pairs + n_sites`` for SW, ``n_sites`` for Gibbs),
so identical seeds give bit-identical chains regardless of chunking.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .lattice import GridDims, LabelField, NeighborhoodSpec, SECOND_ORDER
from .rng import make_rng

__all__ = [
    "SamplerConfig",
    "swendsen_wang_sweep",
    "gibbs_sweep",
    "simulate_potts",
    "empirical_state_histogram",
]

_MAX_ENUMERABLE_STATES = 1 << 24


@dataclass(frozen=True)
class SamplerConfig:
    """Simulation request: smoothness ``beta``, burn-in ``sweeps``, ``seed``.

    The default burn-in of 1000 sweeps is comfortable for 128x128 grids at
    sub-critical ``beta``; mixing slows near the critical region (around
    ``beta`` 0.5-0.6 for the 8-neighbor system), where longer chains may be
    warranted.
    """

    beta: float
    sweeps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {self.sweeps}")


@lru_cache(maxsize=32)
def _pair_arrays(rows: int, cols: int, order: str) -> tuple[np.ndarray, np.ndarray]:
    """Flat site indices (a, b) of every unordered neighbor pair, once each."""
    nbhd = NeighborhoodSpec(order)
    a_parts, b_parts = [], []
    for dr, dc in nbhd.offsets:
        if not (dr > 0 or (dr == 0 and dc > 0)):
            continue
        r0, r1 = max(0, -dr), rows - max(0, dr)
        c0, c1 = max(0, -dc), cols - max(0, dc)
        if r0 >= r1 or c0 >= c1:
            continue
        rr, cc = np.mgrid[r0:r1, c0:c1]
        a_parts.append((rr * cols + cc).ravel())
        b_parts.append(((rr + dr) * cols + (cc + dc)).ravel())
    if a_parts:
        return (np.concatenate(a_parts).astype(np.int64),
                np.concatenate(b_parts).astype(np.int64))
    return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)


class _SweepWorkspace:
    """Pair arrays and scratch buffers for repeated sweeps on one grid."""

    def __init__(self, dims: GridDims, num_classes: int, nbhd: NeighborhoodSpec):
        self.dims = dims
        self.num_classes = num_classes
        self.nbhd = nbhd
        self.pair_a, self.pair_b = _pair_arrays(dims.rows, dims.cols, nbhd.order)
        self.n_pairs = self.pair_a.shape[0]
        self.n_sites = dims.num_sites
        self.parent = np.empty(self.n_sites, dtype=np.int64)
        self.size = np.empty(self.n_sites, dtype=np.int64)
        self.counts = np.empty(num_classes, dtype=np.int64)
        self.weights = np.empty(num_classes, dtype=np.float64)
        self.offsets = nbhd.offsets_array()

    def sw_inplace(self, flat_labels: np.ndarray, beta: float,
                   rng: np.random.Generator) -> None:
        u = rng.random(self.n_pairs + self.n_sites)
        p_open = -np.expm1(-beta)
        _kernels.sw_sweep(flat_labels, self.pair_a, self.pair_b, p_open,
                          u[:self.n_pairs], u[self.n_pairs:],
                          self.num_classes, self.parent, self.size)

    def gibbs_inplace(self, labels2: np.ndarray, beta: float,
                      rng: np.random.Generator) -> None:
        u = rng.random(self.n_sites)
        _kernels.gibbs_sweep(labels2, beta, u, self.num_classes,
                             self.offsets, self.counts, self.weights)


def _require_nonneg_beta(beta: float) -> float:
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0.0:
        raise ValueError(
            f"Swendsen-Wang requires beta >= 0 (bond probability 1 - exp(-beta)); "
            f"got {beta}"
        )
    return beta


def swendsen_wang_sweep(field: LabelField, beta: float,
                        rng: np.random.Generator,
                        nbhd: NeighborhoodSpec = SECOND_ORDER) -> LabelField:
    """One Swendsen-Wang cluster update; returns a new field."""
    beta = _require_nonneg_beta(beta)
    ws = _SweepWorkspace(field.dims, field.num_classes, nbhd)
    out = field.copy()
    ws.sw_inplace(out.labels.ravel(), beta, rng)
    return out


def gibbs_sweep(field: LabelField, beta: float,
                rng: np.random.Generator,
                nbhd: NeighborhoodSpec = SECOND_ORDER) -> LabelField:
    """One raster-order single-site Gibbs sweep; returns a new field."""
    ws = _SweepWorkspace(field.dims, field.num_classes, nbhd)
    out = field.copy()
    ws.gibbs_inplace(out.labels, float(beta), rng)
    return out


def simulate_potts(dims: GridDims, num_classes: int, config: SamplerConfig,
                   nbhd: NeighborhoodSpec = SECOND_ORDER) -> LabelField:
    """Draw one realization: uniform i.i.d. start, then ``config.sweeps``
    Swendsen-Wang sweeps.  Deterministic given ``config.seed``."""
    if num_classes < 2:
        raise ValueError(f"need at least 2 classes, got {num_classes}")
    beta = _require_nonneg_beta(config.beta)
    rng = make_rng(config.seed)
    labels = rng.integers(0, num_classes, size=(dims.rows, dims.cols),
                          dtype=np.int32)
    ws = _SweepWorkspace(dims, num_classes, nbhd)
    flat = labels.ravel()
    for _ in range(config.sweeps):
        ws.sw_inplace(flat, beta, rng)
    return LabelField(dims, num_classes, labels)


def empirical_state_histogram(dims: GridDims, num_classes: int, beta: float,
                              n_sweeps: int, seed: int,
                              method: str = "sw",
                              nbhd: NeighborhoodSpec = SECOND_ORDER,
                              burn_in: int = 0,
                              chunk: int = 8192) -> np.ndarray:
    """Visit counts over all ``L**sites`` states of a long chain.

    Starts from a uniform i.i.d. field, runs ``burn_in`` untallied sweeps,
    then ``n_sweeps`` sweeps recording the state after each.  Only sensible
    on tiny grids; the state index reads the flat labels as base-L digits.
    Consumes uniforms exactly like the public per-sweep functions, so the
    chain matches repeated ``swendsen_wang_sweep``/``gibbs_sweep`` calls
    with the same seed.
    """
    n_states = num_classes ** dims.num_sites
    if n_states > _MAX_ENUMERABLE_STATES:
        raise ValueError(
            f"{num_classes}**{dims.num_sites} states is too many to tally"
        )
    if method not in ("sw", "gibbs"):
        raise ValueError(f"unknown method {method!r}")
    if method == "sw":
        _require_nonneg_beta(beta)
    rng = make_rng(seed)
    labels = rng.integers(0, num_classes, size=(dims.rows, dims.cols),
                          dtype=np.int32)
    ws = _SweepWorkspace(dims, num_classes, nbhd)
    hist = np.zeros(n_states, dtype=np.int64)
    no_hist = np.zeros(0, dtype=np.int64)
    flat = labels.ravel()
    per_sweep = (ws.n_pairs + ws.n_sites) if method == "sw" else ws.n_sites
    p_open = -np.expm1(-beta)

    def run(n: int, out_hist: np.ndarray) -> None:
        done = 0
        while done < n:
            t = min(chunk, n - done)
            u2 = rng.random((t, per_sweep))
            if method == "sw":
                _kernels.sw_run(flat, ws.pair_a, ws.pair_b, p_open,
                                u2[:, :ws.n_pairs], u2[:, ws.n_pairs:],
                                num_classes, ws.parent, ws.size, out_hist)
            else:
                _kernels.gibbs_run(labels, float(beta), u2, num_classes,
                                   ws.offsets, ws.counts, ws.weights,
                                   out_hist)
            done += t

    run(burn_in, no_hist)
    run(n_sweeps, hist)
    return hist
