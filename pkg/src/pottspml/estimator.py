"""Pseudo-maximum-likelihood estimation of the smoothness parameter.

The estimate is the root of a score function built from per-site
conditional laws.  With ``U_s(l)`` the count of neighbors of site ``s``
carrying label ``l`` and ``x_s`` the site's own label:

* prior score:      ``sum_s U_s(x_s) - sum_s E_w[U_s]`` with per-class
  weights ``w_l = exp(beta * U_s(l))``;
* posterior score:  the same, with weights additionally multiplied by the
  emission likelihood ``p(I_s | l)``.

Both scores have derivative ``-sum_s Var_w[U_s]``, hence are non-increasing
in ``beta``; when the root condition holds (some site sits above its
minimum achievable agreement and some site below its maximum) they decrease
strictly from a positive to a negative limit and cross zero exactly once.
``estimate_beta`` brackets that root by outward doubling and refines it with
Newton steps safeguarded by bisection.

For interior sites of the 8-neighbor system the per-site term depends only
on the descending multiset of neighbor counts — an integer partition of 8,
of which there are exactly 22 — so the interior part of the prior score
collapses to 22 closed-form terms weighted by signature frequencies
(``score_prior_grouped``).  That path is a cross-check and a fast
evaluation for large grids; the production estimator always uses the
generic per-site sum, which includes border sites with truncated
neighborhoods.

All per-site expectations subtract the per-site maximum exponent before
exponentiating, so scores stay finite for any real ``beta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emission import EmissionModel, RadiometricImage, log_likelihood_stack
from .lattice import (
    LabelField,
    NeighborhoodSpec,
    SECOND_ORDER,
    neighbor_count_stack,
    own_neighbor_counts,
)

__all__ = [
    "ScoreContext",
    "SolverOptions",
    "EstimationResult",
    "NonConvergenceError",
    "score_prior",
    "score_post",
    "score_prior_grouped",
    "score_derivative",
    "root_condition",
    "estimate_beta",
    "sample_curve",
    "DEGREE8_PARTITIONS",
    "partition_index",
    "interior_signature_histogram",
    "ESTIMATE_CSV_HEADER",
    "CURVE_CSV_HEADER",
    "estimate_csv_row",
]

# The 22 integer partitions of 8, in the order their closed-form terms
# appear in the grouped score; entry i is the signature of class i+1.
DEGREE8_PARTITIONS: tuple[tuple[int, ...], ...] = (
    (8,),
    (7, 1),
    (6, 2),
    (6, 1, 1),
    (5, 3),
    (5, 2, 1),
    (5, 1, 1, 1),
    (4, 4),
    (4, 3, 1),
    (4, 2, 2),
    (4, 2, 1, 1),
    (4, 1, 1, 1, 1),
    (3, 3, 2),
    (3, 3, 1, 1),
    (3, 2, 2, 1),
    (3, 2, 1, 1, 1),
    (3, 1, 1, 1, 1, 1),
    (2, 2, 2, 2),
    (2, 2, 2, 1, 1),
    (2, 2, 1, 1, 1, 1),
    (2, 1, 1, 1, 1, 1, 1),
    (1, 1, 1, 1, 1, 1, 1, 1),
)

_PARTITION_TO_INDEX = {p: i + 1 for i, p in enumerate(DEGREE8_PARTITIONS)}


def partition_index(signature: tuple[int, ...]) -> int:
    """1-based class index of a degree-8 signature in the grouped score."""
    try:
        return _PARTITION_TO_INDEX[tuple(signature)]
    except KeyError:
        raise ValueError(f"{signature!r} is not a partition of 8") from None


class NonConvergenceError(RuntimeError):
    """Root refinement exhausted its iteration budget.

    Carries the best bracket found so far in ``bracket``.
    """

    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(message)
        self.bracket = bracket


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and budgets for ``estimate_beta``."""

    f_tolerance: float = 1e-8
    beta_tolerance: float = 1e-10
    max_iterations: int = 100
    initial_bracket_halfwidth: float = 1.0

    def __post_init__(self):
        if not (self.f_tolerance > 0 and self.beta_tolerance > 0
                and self.initial_bracket_halfwidth > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class EstimationResult:
    """Estimated smoothness with solver diagnostics.

    ``degenerate`` marks fields failing the root condition: no estimate is
    claimed (``beta_hat`` is NaN) and nothing else is meaningful.
    """

    beta_hat: float
    residual: float
    iterations: int
    bracket: tuple[float, float]
    degenerate: bool
    method: str


class ScoreContext:
    """Evaluation context pairing a label field with optional evidence.

    Without evidence the context evaluates the prior score; with an
    ``(image, model)`` pair it evaluates the posterior score.  Neighbor
    counts (and log-likelihoods, if any) are computed once at construction
    and shared by all score/derivative/curve evaluations, which are pure.
    """

    def __init__(self, field: LabelField,
                 nbhd: NeighborhoodSpec = SECOND_ORDER,
                 evidence: tuple[RadiometricImage, EmissionModel] | None = None):
        self.field = field
        self.nbhd = nbhd
        self.evidence = evidence
        stack = neighbor_count_stack(field, nbhd)
        self._counts = stack.astype(np.float64)
        self._counts_sq = self._counts * self._counts
        self._own_total = float(own_neighbor_counts(field, nbhd, stack).sum())
        self._stack_int = stack
        if evidence is not None:
            image, model = evidence
            if image.dims != field.dims:
                raise ValueError(
                    f"image dims {image.dims} do not match field dims {field.dims}"
                )
            if model.num_classes != field.num_classes:
                raise ValueError(
                    f"model has {model.num_classes} classes, field has "
                    f"{field.num_classes}"
                )
            self._logw = log_likelihood_stack(image, model)
        else:
            self._logw = None

    @property
    def method(self) -> str:
        return "post" if self.evidence is not None else "prior"

    @property
    def own_total(self) -> float:
        return self._own_total

    def _moments(self, beta: float) -> tuple[float, float]:
        """Totals of the per-site conditional mean and variance of ``U_s``."""
        a = beta * self._counts
        if self._logw is not None:
            a = a + self._logw
        a -= a.max(axis=0)
        w = np.exp(a)
        wsum = w.sum(axis=0)
        mean = (self._counts * w).sum(axis=0) / wsum
        second = (self._counts_sq * w).sum(axis=0) / wsum
        var = second - mean * mean
        return float(mean.sum()), float(var.sum())

    def score(self, beta: float) -> float:
        mean_total, _ = self._moments(float(beta))
        return self._own_total - mean_total

    def derivative(self, beta: float) -> float:
        _, var_total = self._moments(float(beta))
        return -var_total

    def score_and_derivative(self, beta: float) -> tuple[float, float]:
        mean_total, var_total = self._moments(float(beta))
        return self._own_total - mean_total, -var_total


def score_prior(field: LabelField, beta: float,
                nbhd: NeighborhoodSpec = SECOND_ORDER) -> float:
    """Prior score at ``beta``; finite for all real ``beta``."""
    return ScoreContext(field, nbhd).score(beta)


def score_post(ctx: ScoreContext, beta: float) -> float:
    """Posterior score at ``beta``; the context must carry evidence."""
    if ctx.evidence is None:
        raise ValueError("posterior score needs an (image, model) evidence pair")
    return ctx.score(beta)


def score_derivative(ctx: ScoreContext, beta: float) -> float:
    """Analytic derivative of the context's score: minus the total
    conditional variance of the agreement counts.  Always <= 0."""
    return ctx.derivative(beta)


def root_condition(field: LabelField,
                   nbhd: NeighborhoodSpec = SECOND_ORDER) -> bool:
    """True iff the score functions have a unique finite root.

    Requires one site whose own-label count exceeds its minimum over
    classes and one site whose own-label count falls short of its maximum;
    then the score runs strictly decreasing from a positive to a negative
    limit.
    """
    stack = neighbor_count_stack(field, nbhd)
    own = own_neighbor_counts(field, nbhd, stack)
    return bool(np.any(own > stack.min(axis=0)) and
                np.any(own < stack.max(axis=0)))


def score_prior_grouped(field: LabelField, beta: float) -> float:
    """Interior-site prior score via the 22 signature classes.

    Interior sites of the 8-neighbor system are bucketed by their count
    signature; each bucket contributes its closed-form term times its
    frequency.  Matches the interior-restricted direct sum to float
    precision.  Requires second-order neighborhoods and at least one
    interior site.
    """
    rows, cols = field.dims.rows, field.dims.cols
    if rows < 3 or cols < 3:
        raise ValueError(
            f"grouped evaluation needs interior sites; grid is {rows}x{cols}"
        )
    L = field.num_classes
    stack = neighbor_count_stack(field, SECOND_ORDER)
    own = own_neighbor_counts(field, SECOND_ORDER, stack)
    interior = stack[:, 1:-1, 1:-1].reshape(L, -1)
    # descending per-site count vectors; equal vectors share one term
    signatures = -np.sort(-interior, axis=0)
    uniq, multiplicity = np.unique(signatures, axis=1, return_counts=True)
    total = float(own[1:-1, 1:-1].sum())
    beta = float(beta)
    for j in range(uniq.shape[1]):
        c = uniq[:, j].astype(np.float64)
        a = beta * c
        a -= a.max()
        w = np.exp(a)
        total -= float(multiplicity[j]) * float((c * w).sum() / w.sum())
    return total


def interior_signature_histogram(field: LabelField) -> np.ndarray:
    """Frequencies of the 22 interior signatures, indexed by class - 1."""
    rows, cols = field.dims.rows, field.dims.cols
    if rows < 3 or cols < 3:
        raise ValueError(
            f"signature histogram needs interior sites; grid is {rows}x{cols}"
        )
    stack = neighbor_count_stack(field, SECOND_ORDER)
    interior = stack[:, 1:-1, 1:-1].reshape(field.num_classes, -1)
    hist = np.zeros(len(DEGREE8_PARTITIONS), dtype=np.int64)
    signatures = -np.sort(-interior, axis=0)
    uniq, multiplicity = np.unique(signatures, axis=1, return_counts=True)
    for j in range(uniq.shape[1]):
        sig = tuple(int(v) for v in uniq[:, j] if v > 0)
        hist[partition_index(sig) - 1] += multiplicity[j]
    return hist


def estimate_beta(ctx: ScoreContext,
                  opts: SolverOptions = SolverOptions()) -> EstimationResult:
    """Root of the context's score function, with diagnostics.

    Fields failing the root condition come back flagged ``degenerate``
    (never an exception).  Otherwise the root is bracketed by doubling
    outward from ``[-h, +h]`` and refined by Newton steps that fall back to
    bisection whenever they leave the bracket; terminates when the absolute
    score drops to ``f_tolerance`` or the bracket narrows to
    ``beta_tolerance``.  Exceeding ``max_iterations`` raises
    ``NonConvergenceError`` with the best bracket.
    """
    method = ctx.method
    if not root_condition(ctx.field, ctx.nbhd):
        nan = float("nan")
        return EstimationResult(nan, nan, 0, (nan, nan), True, method)

    evals = 0

    def f(x: float) -> tuple[float, float]:
        nonlocal evals
        evals += 1
        return ctx.score_and_derivative(x)

    def done(x: float, fx: float, lo: float, hi: float) -> EstimationResult:
        return EstimationResult(x, abs(fx), evals, (lo, hi), False, method)

    h = opts.initial_bracket_halfwidth
    lo, hi = -h, h
    f_lo, _ = f(lo)
    if abs(f_lo) <= opts.f_tolerance:
        return done(lo, f_lo, lo, hi)
    f_hi, _ = f(hi)
    if abs(f_hi) <= opts.f_tolerance:
        return done(hi, f_hi, lo, hi)
    # score is decreasing: expand left while still negative at lo,
    # right while still positive at hi
    while f_lo < 0.0:
        hi, f_hi = lo, f_lo
        lo = 2.0 * lo
        if evals >= opts.max_iterations:
            raise NonConvergenceError(
                f"no sign change after {evals} evaluations", (lo, hi))
        f_lo, _ = f(lo)
        if abs(f_lo) <= opts.f_tolerance:
            return done(lo, f_lo, lo, hi)
    while f_hi > 0.0:
        lo, f_lo = hi, f_hi
        hi = 2.0 * hi
        if evals >= opts.max_iterations:
            raise NonConvergenceError(
                f"no sign change after {evals} evaluations", (lo, hi))
        f_hi, _ = f(hi)
        if abs(f_hi) <= opts.f_tolerance:
            return done(hi, f_hi, lo, hi)

    x = 0.5 * (lo + hi)
    while evals < opts.max_iterations:
        fx, fpx = f(x)
        if abs(fx) <= opts.f_tolerance:
            return done(x, fx, lo, hi)
        if fx > 0.0:
            lo = x
        else:
            hi = x
        if hi - lo <= opts.beta_tolerance:
            return done(x, fx, lo, hi)
        if fpx < 0.0:
            step = x - fx / fpx
        else:
            step = float("nan")
        x = step if lo < step < hi else 0.5 * (lo + hi)
    raise NonConvergenceError(
        f"not converged after {evals} evaluations", (lo, hi))


def sample_curve(ctx: ScoreContext, beta_grid) -> list[tuple[float, float]]:
    """Pointwise score values over a strictly increasing grid."""
    grid = [float(b) for b in beta_grid]
    if not grid:
        raise ValueError("beta grid must be non-empty")
    if any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise ValueError("beta grid must be strictly increasing")
    return [(b, ctx.score(b)) for b in grid]


# ---------------------------------------------------------------------------
# CSV conventions for estimation and curve outputs
# ---------------------------------------------------------------------------

ESTIMATE_CSV_HEADER = "method,beta_hat,residual,iterations,degenerate"
CURVE_CSV_HEADER = "beta,score,variant"


def estimate_csv_row(result: EstimationResult) -> str:
    return (f"{result.method},{result.beta_hat!r},{result.residual!r},"
            f"{result.iterations},{str(result.degenerate).lower()}")
