"""Sparse linear least squares with a minimum-norm contract.

The iterative path is LSMR (Fong & Saunders, 2011) started from zero: its
iterates stay in the row space of ``A``, so on rank-deficient systems it
converges to the minimum-norm minimiser, and its estimate of the
normal-equation residual ``||A^T r||`` is non-increasing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import hypot

import numpy as np
import scipy.sparse as sp

__all__ = [
    "LsqProblem",
    "LsqSolution",
    "solve",
    "fix_gauge",
    "default_pins",
]


@dataclass
class LsqProblem:
    """``min ||A z - b||`` with optional pinned entries.

    ``pin`` is an ``(index, value)`` pair or a list of them.  Each pin appends
    the row ``w * e_index^T z = w * value`` with ``w = ||A||_inf``.
    """

    A: sp.spmatrix
    b: np.ndarray
    tol_rel: float = 1e-12
    max_iters: int | None = None
    pin: tuple | list | None = None

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.A.shape[0] != len(self.b):
            raise ValueError(f"A has {self.A.shape[0]} rows but b has {len(self.b)} entries")
        if not (np.all(np.isfinite(self.A.data)) and np.all(np.isfinite(self.b))):
            raise ValueError("non-finite value in least-squares problem")

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def pins(self) -> list[tuple[int, float]]:
        if self.pin is None:
            return []
        pins = [self.pin] if isinstance(self.pin, tuple) else list(self.pin)
        out = []
        for index, value in pins:
            if not 0 <= int(index) < self.n:
                raise ValueError(f"pin index {index} out of range")
            if not np.isfinite(value):
                raise ValueError("non-finite pin value")
            out.append((int(index), float(value)))
        return out

    def augmented(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """The system actually solved, pin rows appended."""
        pins = self.pins
        if not pins:
            return self.A, self.b
        w = float(abs(self.A).sum(axis=1).max()) or 1.0
        idx = np.array([i for i, _ in pins])
        P = sp.csr_matrix((np.full(len(pins), w), (np.arange(len(pins)), idx)), shape=(len(pins), self.n))
        A = sp.vstack([self.A, P], format="csr")
        A.sort_indices()
        b = np.concatenate([self.b, w * np.array([v for _, v in pins])])
        return A, b


@dataclass
class LsqSolution:
    """Result of :func:`solve`.

    ``residual_norm`` is ``||A z - b||`` of the augmented system, recomputed
    from ``z``.  ``history`` holds the per-iteration estimate of
    ``||A^T r||`` (empty for the dense path).
    """

    z: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    normal_residual: float = 0.0
    history: list[float] = field(default_factory=list, repr=False)


def _sym_ortho(a: float, b: float) -> tuple[float, float, float]:
    if b == 0:
        return (1.0 if a >= 0 else -1.0), 0.0, abs(a)
    if a == 0:
        return 0.0, (1.0 if b >= 0 else -1.0), abs(b)
    r = hypot(a, b)
    return a / r, b / r, r


def _lsmr(A: sp.csr_matrix, b: np.ndarray, tol_rel: float, max_iters: int):
    At = A.T.tocsr()
    n = A.shape[1]
    x = np.zeros(n)
    u = b.copy()
    beta = float(np.linalg.norm(u))
    if beta > 0:
        u /= beta
    v = At @ u
    alpha = float(np.linalg.norm(v))
    if alpha > 0:
        v /= alpha
    normar0 = alpha * beta
    history = [normar0]
    if normar0 == 0:
        return x, 0, True, history

    zetabar, alphabar = alpha * beta, alpha
    rho = rhobar = cbar = 1.0
    sbar = 0.0
    h = v.copy()
    hbar = np.zeros(n)
    target = tol_rel * normar0

    it = 0
    converged = False
    while it < max_iters:
        it += 1
        u = A @ v - alpha * u
        beta = float(np.linalg.norm(u))
        if beta > 0:
            u /= beta
            v = At @ u - beta * v
            alpha = float(np.linalg.norm(v))
            if alpha > 0:
                v /= alpha

        rhoold = rho
        c, s, rho = _sym_ortho(alphabar, beta)
        thetanew = s * alpha
        alphabar = c * alpha

        rhobarold = rhobar
        thetabar = sbar * rho
        cbar, sbar, rhobar = _sym_ortho(cbar * rho, thetanew)
        zeta = cbar * zetabar
        zetabar = -sbar * zetabar

        hbar = h - (thetabar * rho / (rhoold * rhobarold)) * hbar
        x += (zeta / (rho * rhobar)) * hbar
        h = v - (thetanew / rho) * h

        normar = abs(zetabar)
        history.append(normar)
        if normar <= target:
            converged = True
            break
        if alpha == 0 or beta == 0:
            # Krylov space exhausted: x is the exact minimiser
            converged = True
            break
    return x, it, converged, history


def solve(problem: LsqProblem, method: str = "lsmr") -> LsqSolution:
    """Minimum-norm least-squares solution of ``problem``.

    ``method="lsmr"`` iterates until the estimated ``||A^T r|| / ||A^T b||``
    drops below ``tol_rel``; on hitting ``max_iters`` (default ``10 n``) the
    last iterate is returned with ``converged=False``.  ``method="dense"``
    uses an SVD-based dense solve and is meant for small systems.
    """
    A, b = problem.augmented()
    if A.nnz == 0:
        raise ValueError("A must be nonzero")
    if method == "lsmr":
        max_iters = problem.max_iters if problem.max_iters is not None else 10 * problem.n
        z, iters, converged, history = _lsmr(A, b, problem.tol_rel, max_iters)
    elif method == "dense":
        z = np.linalg.lstsq(A.toarray(), b, rcond=None)[0]
        iters, converged, history = 0, True, []
    else:
        raise ValueError(f"unknown method {method!r}")
    r = b - A @ z
    return LsqSolution(z, float(np.linalg.norm(r)), iters, converged,
                       float(np.linalg.norm(A.T @ r)), history)


def default_pins(domain) -> list[int]:
    """Per connected component, the pixel nearest its centroid (ties by raster order)."""
    pins = []
    for label in range(domain.n_components):
        idx = domain.component_indices(label)
        pix = domain.pixel_of[idx].astype(float)
        d2 = ((pix - pix.mean(axis=0)) ** 2).sum(axis=1)
        pins.append(int(idx[np.lexsort((idx, d2))[0]]))
    return pins


def fix_gauge(z, domain, mode: str, pins=None, components=None) -> np.ndarray:
    """Remove the per-component offset or scale ambiguity of ``z``.

    ``offset_zero_mean`` subtracts each component's mean.  ``scale_pin``
    divides each component by its value at the pin pixel (``pins`` gives one
    linear index per component, default :func:`default_pins`) and negates
    components whose median is then negative.  ``components`` restricts the
    fix to the given labels; other entries are returned unchanged.
    """
    z = np.array(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    if len(z) != domain.n:
        raise ValueError("z does not match the domain")
    labels = range(domain.n_components) if components is None else components
    if mode == "offset_zero_mean":
        for label in labels:
            idx = domain.component_indices(label)
            z[idx] -= z[idx].mean()
        return z
    if mode == "scale_pin":
        if pins is None:
            pins = default_pins(domain)
        pins = [int(p) for p in np.atleast_1d(pins)]
        for label in labels:
            idx = domain.component_indices(label)
            own = [p for p in pins if domain.component_of[p] == label]
            if not own:
                raise ValueError(f"no pin pixel in component {label}")
            if abs(z[own[0]]) < 1e-12:
                raise ValueError("degenerate pin pixel")
            z[idx] /= z[own[0]]
            if np.median(z[idx]) < 0:
                z[idx] = -z[idx]
        return z
    raise ValueError(f"unknown gauge mode {mode!r}")
