"""Grid geometry, neighborhood systems, label fields and counting statistics.

A label field assigns one of L classes to every site of a rectangular
``rows x cols`` grid.  The two neighborhood systems are the 4 orthogonally
nearest sites (first order) and the 8 nearest sites (second order, the
default everywhere in this package).  Neighborhoods are truncated at the
grid border: under second order a corner site has 3 neighbors, a non-corner
border site 5, an interior site 8.

The statistics computed here feed every other module:

* ``neighbor_label_counts`` — per-site counts of each class among the
  neighbors (one entry per class, summing to the site degree);
* ``global_agreement`` — the number of unordered neighbor pairs whose labels
  agree, related to the per-site counts by the handshake identity
  ``sum_s counts_s[label_s] = 2 * agreement``;
* ``histogram_signature`` — the descending multiset of nonzero per-site
  counts, an integer partition of the degree.  For interior second-order
  sites the degree is 8 and exactly 22 signatures exist; the grouped score
  evaluation in the estimator module buckets sites by these.

Labels are 0-based integers; storage is row-major with (row, col)
addressing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._textio import FormatError, TokenReader

__all__ = [
    "GridDims",
    "NeighborhoodSpec",
    "FIRST_ORDER",
    "SECOND_ORDER",
    "LabelField",
    "neighbor_label_counts",
    "global_agreement",
    "degree",
    "histogram_signature",
    "neighbor_count_stack",
    "own_neighbor_counts",
    "read_lmap",
    "write_lmap",
    "FormatError",
]


@dataclass(frozen=True)
class GridDims:
    """Rectangular grid extent: ``rows`` lines by ``cols`` columns."""

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid dims must be positive, got {self.rows}x{self.cols}")

    @property
    def num_sites(self) -> int:
        return self.rows * self.cols


_FIRST_OFFSETS = ((-1, 0), (0, -1), (0, 1), (1, 0))
_SECOND_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Neighborhood system: ``first`` (4 nearest) or ``second`` (8 nearest).

    Satisfies the usual requirements of a neighborhood system on the grid:
    no site is its own neighbor, the relation is symmetric, and every site
    has a nonempty neighborhood on grids with more than one site.
    """

    order: str = "second"

    def __post_init__(self):
        if self.order not in ("first", "second"):
            raise ValueError(f"unknown neighborhood order {self.order!r}")

    @property
    def offsets(self) -> tuple[tuple[int, int], ...]:
        return _FIRST_OFFSETS if self.order == "first" else _SECOND_OFFSETS

    def offsets_array(self) -> np.ndarray:
        return np.array(self.offsets, dtype=np.int64)


FIRST_ORDER = NeighborhoodSpec("first")
SECOND_ORDER = NeighborhoodSpec("second")


@dataclass
class LabelField:
    """A realization of the class field: integer labels in ``[0, num_classes)``.

    ``labels`` is a ``(rows, cols)`` int32 array in row-major order.
    """

    dims: GridDims
    num_classes: int
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.num_classes}")
        labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if labels.shape != (self.dims.rows, self.dims.cols):
            raise ValueError(
                f"labels shape {labels.shape} does not match dims "
                f"{self.dims.rows}x{self.dims.cols}"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError(
                f"labels must lie in [0, {self.num_classes}), "
                f"found range [{labels.min()}, {labels.max()}]"
            )
        self.labels = labels

    @classmethod
    def from_array(cls, labels: np.ndarray, num_classes: int) -> "LabelField":
        labels = np.asarray(labels)
        return cls(GridDims(*labels.shape), num_classes, labels)

    @classmethod
    def uniform(cls, dims: GridDims, num_classes: int, label: int = 0) -> "LabelField":
        return cls(dims, num_classes,
                   np.full((dims.rows, dims.cols), label, dtype=np.int32))

    def copy(self) -> "LabelField":
        return LabelField(self.dims, self.num_classes, self.labels.copy())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LabelField)
            and self.dims == other.dims
            and self.num_classes == other.num_classes
            and np.array_equal(self.labels, other.labels)
        )


def _check_site(dims: GridDims, site: tuple[int, int]) -> tuple[int, int]:
    r, c = site
    if not (0 <= r < dims.rows and 0 <= c < dims.cols):
        raise IndexError(
            f"site {site} outside {dims.rows}x{dims.cols} grid"
        )
    return r, c


def degree(dims: GridDims, site: tuple[int, int],
           nbhd: NeighborhoodSpec = SECOND_ORDER) -> int:
    """Number of neighbors of ``site`` under border truncation."""
    r, c = _check_site(dims, site)
    d = 0
    for dr, dc in nbhd.offsets:
        if 0 <= r + dr < dims.rows and 0 <= c + dc < dims.cols:
            d += 1
    return d


def neighbor_label_counts(field: LabelField, site: tuple[int, int],
                          nbhd: NeighborhoodSpec = SECOND_ORDER) -> np.ndarray:
    """Counts of each class among the neighbors of ``site``.

    Entry ``l`` is the number of neighbors carrying label ``l``; the entries
    sum to the site degree.
    """
    r, c = _check_site(field.dims, site)
    counts = np.zeros(field.num_classes, dtype=np.int64)
    rows, cols = field.dims.rows, field.dims.cols
    for dr, dc in nbhd.offsets:
        rr, cc = r + dr, c + dc
        if 0 <= rr < rows and 0 <= cc < cols:
            counts[field.labels[rr, cc]] += 1
    return counts


def global_agreement(field: LabelField,
                     nbhd: NeighborhoodSpec = SECOND_ORDER) -> int:
    """Number of unordered neighbor pairs with equal labels."""
    x = field.labels
    rows, cols = x.shape
    total = 0
    # each unordered pair once: keep offsets pointing "forward"
    for dr, dc in nbhd.offsets:
        if not (dr > 0 or (dr == 0 and dc > 0)):
            continue
        r0, r1 = max(0, -dr), rows - max(0, dr)
        c0, c1 = max(0, -dc), cols - max(0, dc)
        a = x[r0:r1, c0:c1]
        b = x[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        total += int(np.count_nonzero(a == b))
    return total


def histogram_signature(counts: np.ndarray) -> tuple[int, ...]:
    """Canonical signature of a neighbor-count vector.

    The multiset of nonzero counts sorted descending — an integer partition
    of the site degree.  For degree 8 there are exactly 22 distinct
    signatures, which index the grouped score terms.
    """
    nz = [int(c) for c in counts if c > 0]
    return tuple(sorted(nz, reverse=True))


def neighbor_count_stack(field: LabelField,
                         nbhd: NeighborhoodSpec = SECOND_ORDER) -> np.ndarray:
    """Per-site neighbor counts for every class, shape ``(L, rows, cols)``.

    ``stack[l, r, c]`` equals ``neighbor_label_counts(field, (r, c), nbhd)[l]``;
    computed for the whole grid at once via shifted one-hot sums.
    """
    rows, cols = field.dims.rows, field.dims.cols
    L = field.num_classes
    onehot = np.zeros((L, rows + 2, cols + 2), dtype=np.int32)
    rr, cc = np.indices((rows, cols))
    onehot[field.labels, rr + 1, cc + 1] = 1
    stack = np.zeros((L, rows, cols), dtype=np.int32)
    for dr, dc in nbhd.offsets:
        stack += onehot[:, 1 + dr:1 + dr + rows, 1 + dc:1 + dc + cols]
    return stack


def own_neighbor_counts(field: LabelField,
                        nbhd: NeighborhoodSpec = SECOND_ORDER,
                        stack: np.ndarray | None = None) -> np.ndarray:
    """Per-site count of neighbors agreeing with the site's own label."""
    if stack is None:
        stack = neighbor_count_stack(field, nbhd)
    rr, cc = np.indices((field.dims.rows, field.dims.cols))
    return stack[field.labels, rr, cc]


# ---------------------------------------------------------------------------
# LMAP v1 file format
# ---------------------------------------------------------------------------
# Header line `LMAP <rows> <cols> <L>`, then rows*cols whitespace-separated
# integer labels in row-major order.


def write_lmap(field: LabelField, path: str | Path) -> None:
    dims = field.dims
    lines = [f"LMAP {dims.rows} {dims.cols} {field.num_classes}"]
    for r in range(dims.rows):
        lines.append(" ".join(str(int(v)) for v in field.labels[r]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_lmap(path: str | Path) -> LabelField:
    path = Path(path)
    reader = TokenReader(path.read_text(), str(path))
    reader.expect_literal("LMAP")
    rows = reader.next_int("row count")
    cols = reader.next_int("column count")
    num_classes = reader.next_int("class count")
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: invalid dims {rows}x{cols} in header")
    if num_classes < 2:
        raise FormatError(f"{path}: invalid class count {num_classes} in header")
    labels = np.empty((rows, cols), dtype=np.int32)
    for r in range(rows):
        for c in range(cols):
            v = reader.next_int("label")
            if not 0 <= v < num_classes:
                raise FormatError(
                    f"{path}: token {reader.position}: label {v} out of "
                    f"range [0, {num_classes})"
                )
            labels[r, c] = v
    reader.expect_end()
    return LabelField(GridDims(rows, cols), num_classes, labels)
