"""2D Savitzky-Golay kernels on arbitrary pixel neighborhoods.

A kernel is the row of the pseudoinverse of the local polynomial design
matrix that maps neighborhood samples to one fitted coefficient: the constant
term (smoothing) or one of the two linear terms (first derivatives at the
centre).  The classic finite-difference stencils are provided as baselines.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TARGETS",
    "SgKernel",
    "n_coefficients",
    "monomial_exponents",
    "design_matrix",
    "sg_kernel",
    "square_offsets",
    "classic_kernel",
    "format_kernel",
]

TARGETS = ("smooth", "deriv_u", "deriv_v")
CLASSIC_KINDS = ("fw", "bw", "c", "sc")


@dataclass(frozen=True)
class SgKernel:
    """A stencil: integer ``(du, dv)`` offsets with one weight each.

    ``order`` is the polynomial order actually used, which can be lower than
    the one requested when the neighborhood was degenerate.
    """

    offsets: np.ndarray
    weights: np.ndarray
    target: str
    order: int

    def apply(self, samples) -> float:
        return float(np.dot(self.weights, samples))

    def as_grid(self) -> np.ndarray:
        """Weights laid out on a dense ``[dv, du]`` grid centred on the origin."""
        r = int(np.abs(self.offsets).max()) if len(self.offsets) else 0
        grid = np.zeros((2 * r + 1, 2 * r + 1))
        grid[self.offsets[:, 1] + r, self.offsets[:, 0] + r] = self.weights
        return grid


def n_coefficients(k: int) -> int:
    return (k + 1) * (k + 2) // 2


def monomial_exponents(k: int) -> list[tuple[int, int]]:
    """``(a, b)`` exponent pairs of ``du**a * dv**b`` in lexicographic order."""
    return [(a, b) for a in range(k + 1) for b in range(k + 1 - a)]


def _target_column(target: str, k: int) -> int:
    if target == "smooth":
        return 0
    if target == "deriv_v":
        return 1
    if target == "deriv_u":
        return k + 1
    raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")


def _as_offsets(neighborhood) -> np.ndarray:
    offsets = getattr(neighborhood, "offsets", neighborhood)
    offsets = np.asarray(offsets, dtype=np.int64).reshape(-1, 2)
    return offsets


def design_matrix(neighborhood, k: int) -> np.ndarray:
    """Monomials of the neighborhood offsets, one row per member.

    Accepts a :class:`~sgrecon.domain.Neighborhood` or an ``(m, 2)`` array of
    ``(du, dv)`` offsets.
    """
    offsets = _as_offsets(neighborhood)
    if k < 0:
        raise ValueError("order must be non-negative")
    if len(offsets) < n_coefficients(k):
        raise ValueError("order too high for neighborhood")
    du = offsets[:, 0].astype(float)
    dv = offsets[:, 1].astype(float)
    return np.stack([du ** a * dv ** b for a, b in monomial_exponents(k)], axis=1)


def _pinv_row(C: np.ndarray, row: int) -> np.ndarray | None:
    U, s, Vt = np.linalg.svd(C, full_matrices=False)
    tol = max(C.shape) * np.finfo(float).eps * s[0]
    if s[-1] <= tol:
        return None
    return (Vt[:, row] / s) @ U.T


def _reduced_design(offsets: np.ndarray, k: int, target: str):
    """Design matrix without identically zero monomial columns.

    On an axis-aligned line of offsets every monomial in the other axis
    vanishes; dropping those columns leaves the 1D fit.  Returns the matrix
    and the target's row in its pseudoinverse, or ``None`` for the row when
    the target monomial itself vanishes.
    """
    du = offsets[:, 0].astype(float)
    dv = offsets[:, 1].astype(float)
    C = np.stack([du ** a * dv ** b for a, b in monomial_exponents(k)], axis=1)
    keep = np.any(C != 0, axis=0)
    col = _target_column(target, k)
    row = int(keep[:col].sum()) if keep[col] else None
    return C[:, keep], row


def sg_kernel(neighborhood, k: int, target: str) -> SgKernel:
    """Savitzky-Golay weights estimating ``target`` at the neighborhood centre.

    If the design matrix is rank deficient the order is lowered until it is
    not; ``SgKernel.order`` reports the order used.
    """
    offsets = _as_offsets(neighborhood)
    _target_column(target, k)
    if k < 0:
        raise ValueError("order must be non-negative")
    if len(np.unique(offsets, axis=0)) != len(offsets):
        raise ValueError("neighborhood offsets must be distinct")
    if len(offsets) < _reduced_design(offsets, k, "smooth")[0].shape[1]:
        raise ValueError("order too high for neighborhood")
    lowest = 0 if target == "smooth" else 1
    for order in range(k, lowest - 1, -1):
        C, row = _reduced_design(offsets, order, target)
        if row is None or C.shape[0] < C.shape[1]:
            continue
        weights = _pinv_row(C, row)
        if weights is not None:
            return SgKernel(offsets, weights, target, order)
    raise ValueError("degenerate neighborhood")


def square_offsets(d: int) -> np.ndarray:
    """Offsets of the centred ``d x d`` block in row-major ``(dv, du)`` order."""
    if d < 1 or d % 2 == 0:
        raise ValueError("d must be a positive odd integer")
    r = d // 2
    dv, du = np.mgrid[-r:r + 1, -r:r + 1]
    return np.stack([du.ravel(), dv.ravel()], axis=1)


_SC = np.array([[-1.0, 0.0, 1.0], [-4.0, 0.0, 4.0], [-1.0, 0.0, 1.0]]) / 12.0


def classic_kernel(kind: str, direction: str) -> SgKernel:
    """Forward, backward, central or smoothed-central difference stencil."""
    if direction not in ("u", "v"):
        raise ValueError("direction must be 'u' or 'v'")
    if kind == "fw":
        offsets, weights, order = [(0, 0), (1, 0)], [-1.0, 1.0], 1
    elif kind == "bw":
        offsets, weights, order = [(-1, 0), (0, 0)], [-1.0, 1.0], 1
    elif kind == "c":
        offsets, weights, order = [(-1, 0), (1, 0)], [-0.5, 0.5], 2
    elif kind == "sc":
        dv, du = np.nonzero(_SC)
        offsets = list(zip(du - 1, dv - 1))
        weights, order = list(_SC[dv, du]), 2
    else:
        raise ValueError(f"unknown kernel kind {kind!r}; expected one of {CLASSIC_KINDS}")
    offsets = np.asarray(offsets, dtype=np.int64)
    if direction == "v":
        offsets = offsets[:, ::-1].copy()
        target = "deriv_v"
    else:
        target = "deriv_u"
    return SgKernel(offsets, np.asarray(weights, dtype=float), target, order)


def format_kernel(kernel: SgKernel) -> str:
    """Plain-text dump, one ``du dv weight`` line per tap."""
    return "".join(f"{du} {dv} {w:.17g}\n" for (du, dv), w in zip(kernel.offsets, kernel.weights))
