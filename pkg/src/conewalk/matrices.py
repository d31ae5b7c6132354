"""Primitives for d x d matrices with strictly positive entries.

The toolkit measures matrix size additively: |g| is the plain entry sum,
directions live on the L1 simplex, and one multiplicative step is the
projective action together with the log-norm increment ln|gx|.  Everything
here is exact small-scale arithmetic; the vectorized fast paths are in
walk.py and must agree with these functions (tested).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Relative slack absorbing float roundoff in order comparisons.  Strict
# mathematical inequalities are only ever asserted up to this slack.
REL_SLACK = 1e-12

__all__ = [
    "REL_SLACK",
    "PositiveMatrix",
    "SimplexPoint",
    "ComparisonConstants",
    "ComparabilityReport",
    "l1_norm",
    "column_min_sum",
    "size_functional",
    "multiply",
    "act_projective",
    "act_right",
    "check_comparability",
    "comparability_report",
]


def _coerce_entries(entries) -> np.ndarray:
    m = np.array(entries, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)) or np.any(m <= 0.0):
        raise ValueError("matrix entries must be finite and strictly positive")
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class PositiveMatrix:
    """Square matrix with finite, strictly positive entries."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _coerce_entries(self.entries))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def entry_ratio(self) -> float:
        """Largest pairwise entry ratio, max entry / min entry."""
        e = self.entries
        return float(e.max() / e.min())

    def transpose(self) -> "PositiveMatrix":
        return PositiveMatrix(self.entries.T)


def _coerce_coords(coords) -> np.ndarray:
    v = np.array(coords, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"expected a coordinate vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)) or np.any(v < 0.0):
        raise ValueError("simplex coordinates must be finite and nonnegative")
    s = v.sum()
    if abs(s - 1.0) > 1e-12:
        raise ValueError(f"coordinates must sum to 1 (got {s!r}); use SimplexPoint.normalize")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class SimplexPoint:
    """L1-normalized nonnegative vector.

    Serves both column directions (acted on from the left) and row
    directions (acted on from the right); the side is chosen by the action
    function, not by the type.
    """

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _coerce_coords(self.coords))

    @property
    def dim(self) -> int:
        return self.coords.size

    @classmethod
    def uniform(cls, dim: int) -> "SimplexPoint":
        return cls(np.full(dim, 1.0 / dim))

    @classmethod
    def basis(cls, dim: int, index: int) -> "SimplexPoint":
        v = np.zeros(dim)
        v[index] = 1.0
        return cls(v)

    @classmethod
    def normalize(cls, coords) -> "SimplexPoint":
        v = np.asarray(coords, dtype=float)
        s = v.sum()
        if not np.isfinite(s) or s <= 0.0:
            raise ValueError("cannot normalize a vector with nonpositive sum")
        return cls(v / s)


@dataclass(frozen=True)
class ComparisonConstants:
    """Certified comparison constants for products of B-comparable matrices.

    For matrices whose entries are pairwise comparable within a factor B,
    every product of them has entries comparable within B**2, and the
    certified factor delta = d^2 B^2 bounds how far |gx|, |yg| and |ygx|
    can drift from |g|, as well as |gh| from |g||h|.  log_delta is that
    bound in log units and min_window = 4*log_delta + 2 is the smallest
    terminal-window width for which the two-sided local bounds below apply.
    """

    dim: int
    comparability: float  # entry-ratio bound B of the generating family
    delta: float
    log_delta: float
    min_window: float

    @classmethod
    def for_family(cls, dim: int, comparability: float) -> "ComparisonConstants":
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if comparability < 1.0:
            raise ValueError("comparability bound must be >= 1")
        delta = float(dim * dim * comparability * comparability)
        log_delta = math.log(delta)
        return cls(
            dim=dim,
            comparability=float(comparability),
            delta=delta,
            log_delta=log_delta,
            min_window=4.0 * log_delta + 2.0,
        )


def l1_norm(g: PositiveMatrix) -> float:
    """Sum of all entries."""
    return float(g.entries.sum())


def column_min_sum(g: PositiveMatrix) -> float:
    """Minimum over columns of the column sum: the floor of |gx| over the simplex."""
    return float(g.entries.sum(axis=0).min())


def size_functional(g: PositiveMatrix) -> float:
    """max(1/column_min_sum, l1_norm); always >= 1.

    Its logarithm bounds |ln|gx|| uniformly over the simplex, which is the
    quantity whose moments the standing integrability assumption controls.
    """
    return max(1.0 / column_min_sum(g), l1_norm(g))


def multiply(g: PositiveMatrix, h: PositiveMatrix) -> PositiveMatrix:
    if g.dim != h.dim:
        raise ValueError(f"dimension mismatch: {g.dim} vs {h.dim}")
    return PositiveMatrix(g.entries @ h.entries)


def act_projective(g: PositiveMatrix, x: SimplexPoint) -> tuple[SimplexPoint, float]:
    """Column action: returns (gx/|gx|, ln|gx|).

    The increment is the log of an L1 norm of gx with x already normalized,
    so repeated application never overflows: state stays on the simplex and
    only the accumulated log grows.
    """
    y = g.entries @ x.coords
    nrm = y.sum()
    return SimplexPoint(y / nrm), math.log(nrm)


def act_right(xt: SimplexPoint, g: PositiveMatrix) -> tuple[SimplexPoint, float]:
    """Row action: returns (xg/|xg|, ln|xg|) for a row point x."""
    y = xt.coords @ g.entries
    nrm = y.sum()
    return SimplexPoint(y / nrm), math.log(nrm)


def check_comparability(g: PositiveMatrix, bound: float, slack: float = REL_SLACK) -> bool:
    """True iff all entries are pairwise comparable within `bound`."""
    if bound < 1.0:
        raise ValueError("comparability bound must be >= 1")
    return g.entry_ratio() <= bound * (1.0 + slack)


@dataclass(frozen=True)
class ComparabilityReport:
    """Outcome of the product-comparability checks for one (g, h, x, y) tuple.

    `measured` keeps the raw ratios so audits can report the empirically
    tightest constant alongside the certified one.
    """

    entry_ratio_ok: bool
    column_action_ok: bool
    row_action_ok: bool
    bilinear_ok: bool
    product_norm_ok: bool
    measured: dict

    def all_ok(self) -> bool:
        return (
            self.entry_ratio_ok
            and self.column_action_ok
            and self.row_action_ok
            and self.bilinear_ok
            and self.product_norm_ok
        )


def comparability_report(
    g: PositiveMatrix,
    h: PositiveMatrix,
    x: SimplexPoint,
    yt: SimplexPoint,
    constants: ComparisonConstants,
    slack: float = REL_SLACK,
) -> ComparabilityReport:
    """Check the certified comparison bounds on a product pair.

    g and h must be products of matrices from a family whose entry ratios
    are within constants.comparability (the caller's responsibility).
    Checked, with delta = constants.delta and B = constants.comparability:

      (a) entry ratio of g is <= B^2,
      (b) |g|/delta <= |gx| <= |g| and |g|/delta <= |yg| <= |g|,
      (c) |g|/delta <= |ygx| <= delta |g|,
      (d) |g||h|/delta <= |gh| <= |g||h|.
    """
    if not (g.dim == h.dim == x.dim == yt.dim == constants.dim):
        raise ValueError("dimension mismatch among audit inputs")
    delta = constants.delta
    bsq = constants.comparability**2
    up = 1.0 + slack
    dn = 1.0 - slack

    norm_g = l1_norm(g)
    norm_h = l1_norm(h)
    gx = float((g.entries @ x.coords).sum())
    yg = float((yt.coords @ g.entries).sum())
    ygx = float(yt.coords @ g.entries @ x.coords)
    gh = l1_norm(multiply(g, h))

    entry_ratio = g.entry_ratio()
    measured = {
        "entry_ratio": entry_ratio,
        "norm_over_column_action": norm_g / gx,
        "norm_over_row_action": norm_g / yg,
        "norm_over_bilinear": norm_g / ygx,
        "bilinear_over_norm": ygx / norm_g,
        "split_norm_over_product": norm_g * norm_h / gh,
    }
    return ComparabilityReport(
        entry_ratio_ok=entry_ratio <= bsq * up,
        column_action_ok=(gx <= norm_g * up) and (gx >= norm_g / delta * dn),
        row_action_ok=(yg <= norm_g * up) and (yg >= norm_g / delta * dn),
        bilinear_ok=(ygx <= delta * norm_g * up) and (ygx >= norm_g / delta * dn),
        product_norm_ok=(gh <= norm_g * norm_h * up) and (gh >= norm_g * norm_h / delta * dn),
        measured=measured,
    )
