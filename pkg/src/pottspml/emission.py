"""Class-conditional Gaussian observation model.

Each class ``l`` emits observations from ``Normal(mean_l, sigma^2)`` with a
common standard deviation; observations are independent given the class
map.  ``build_separated_model`` places consecutive class means ``k * sigma``
apart, the separation convention used throughout the experiment harness.
``ml_classify`` is the per-site maximum-likelihood rule (no spatial term),
which for equal variances reduces to nearest-mean classification with ties
going to the lowest class index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._textio import FormatError, TokenReader
from .lattice import GridDims, LabelField

__all__ = [
    "EmissionModel",
    "RadiometricImage",
    "build_separated_model",
    "sample_emission",
    "class_log_likelihood",
    "log_likelihood_stack",
    "ml_classify",
    "read_rimg",
    "write_rimg",
    "read_emission_model",
    "write_emission_model",
]


@dataclass(frozen=True)
class EmissionModel:
    """Per-class Gaussian parameters: ``means[l]`` and common ``sigma``."""

    num_classes: int
    means: np.ndarray
    sigma: float

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        if means.shape != (self.num_classes,):
            raise ValueError(
                f"expected {self.num_classes} means, got shape {means.shape}"
            )
        if not (self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "means", means)


@dataclass
class RadiometricImage:
    """Real-valued observations on a grid, row-major float64."""

    dims: GridDims
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != (self.dims.rows, self.dims.cols):
            raise ValueError(
                f"values shape {values.shape} does not match dims "
                f"{self.dims.rows}x{self.dims.cols}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("image values must be finite")
        self.values = values

    @classmethod
    def from_array(cls, values: np.ndarray) -> "RadiometricImage":
        values = np.asarray(values, dtype=np.float64)
        return cls(GridDims(*values.shape), values)


def build_separated_model(num_classes: int, base_mean: float, sigma: float,
                          k: float) -> EmissionModel:
    """Model with means ``base_mean + l * k * sigma`` for ``l = 0..L-1``."""
    if not (sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not (k > 0):
        raise ValueError(f"separation k must be positive, got {k}")
    means = base_mean + np.arange(num_classes, dtype=np.float64) * k * sigma
    return EmissionModel(num_classes, means, float(sigma))


def sample_emission(field: LabelField, model: EmissionModel,
                    rng: np.random.Generator) -> RadiometricImage:
    """Draw one observation per site given the label field."""
    if field.num_classes != model.num_classes:
        raise ValueError(
            f"field has {field.num_classes} classes, model has "
            f"{model.num_classes}"
        )
    noise = rng.standard_normal(field.labels.shape)
    values = model.means[field.labels] + model.sigma * noise
    return RadiometricImage(field.dims, values)


def class_log_likelihood(value: float, model: EmissionModel, label: int) -> float:
    """Gaussian log-density of ``value`` under class ``label``."""
    if not 0 <= label < model.num_classes:
        raise IndexError(
            f"class {label} out of range [0, {model.num_classes})"
        )
    z = (value - model.means[label]) / model.sigma
    return -math.log(model.sigma * math.sqrt(2.0 * math.pi)) - 0.5 * z * z


def log_likelihood_stack(image: RadiometricImage,
                         model: EmissionModel) -> np.ndarray:
    """Log-densities for every class, shape ``(L, rows, cols)``."""
    z = (image.values[None, :, :] - model.means[:, None, None]) / model.sigma
    const = -math.log(model.sigma * math.sqrt(2.0 * math.pi))
    return const - 0.5 * z * z


def ml_classify(image: RadiometricImage, model: EmissionModel) -> LabelField:
    """Per-site argmax of the emission likelihood (no spatial term).

    Ties resolve to the lowest class index; with a common sigma this is the
    nearest-mean rule.
    """
    stack = log_likelihood_stack(image, model)
    labels = np.argmax(stack, axis=0).astype(np.int32)
    return LabelField(image.dims, model.num_classes, labels)


# ---------------------------------------------------------------------------
# RIMG v1 and EMIT file formats
# ---------------------------------------------------------------------------
# RIMG: header `RIMG <rows> <cols>`, then rows*cols reals in row-major order.
# EMIT: header `EMIT <L> <sigma>`, then L class means.


def write_rimg(image: RadiometricImage, path: str | Path) -> None:
    dims = image.dims
    lines = [f"RIMG {dims.rows} {dims.cols}"]
    for r in range(dims.rows):
        lines.append(" ".join(repr(float(v)) for v in image.values[r]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_rimg(path: str | Path) -> RadiometricImage:
    path = Path(path)
    reader = TokenReader(path.read_text(), str(path))
    reader.expect_literal("RIMG")
    rows = reader.next_int("row count")
    cols = reader.next_int("column count")
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: invalid dims {rows}x{cols} in header")
    values = np.empty((rows, cols), dtype=np.float64)
    for r in range(rows):
        for c in range(cols):
            v = reader.next_float("value")
            if not math.isfinite(v):
                raise FormatError(
                    f"{path}: token {reader.position}: non-finite value {v!r}"
                )
            values[r, c] = v
    reader.expect_end()
    return RadiometricImage(GridDims(rows, cols), values)


def write_emission_model(model: EmissionModel, path: str | Path) -> None:
    lines = [f"EMIT {model.num_classes} {repr(float(model.sigma))}"]
    lines.extend(repr(float(m)) for m in model.means)
    Path(path).write_text("\n".join(lines) + "\n")


def read_emission_model(path: str | Path) -> EmissionModel:
    path = Path(path)
    reader = TokenReader(path.read_text(), str(path))
    reader.expect_literal("EMIT")
    num_classes = reader.next_int("class count")
    if num_classes < 2:
        raise FormatError(f"{path}: invalid class count {num_classes} in header")
    sigma = reader.next_float("sigma")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise FormatError(f"{path}: token {reader.position}: sigma must be positive")
    means = np.array([reader.next_float("class mean")
                      for _ in range(num_classes)], dtype=np.float64)
    reader.expect_end()
    return EmissionModel(num_classes, means, sigma)
