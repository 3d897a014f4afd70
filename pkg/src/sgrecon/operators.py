"""Sparse differentiation and smoothing operators over a pixel domain.

Operators are ``scipy.sparse.csr_matrix`` instances in canonical form (sorted,
unique column indices per row), so ``A @ x`` sums each row in ascending column
order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .domain import PixelDomain, knn_pixels, knn_points3d, square_support
from .sgfilter import (
    CLASSIC_KINDS,
    classic_kernel,
    n_coefficients,
    sg_kernel,
    square_offsets,
)

__all__ = [
    "KernelConfig",
    "OperatorBundle",
    "assemble_operators",
    "matvec",
    "vstack",
    "write_triplets",
    "read_triplets",
]

DROP_TOL = 1e-14


@dataclass(frozen=True)
class KernelConfig:
    """How derivative and smoothing kernels are built.

    kind : ``"sg"`` for Savitzky-Golay, or one of the classic stencils
        ``"fw"``, ``"bw"``, ``"c"``, ``"sc"``.
    size : odd side ``d`` of the square kernel; custom kernels use ``d**2``
        nearest pixels.
    order : polynomial order of the SG fit.
    mode : ``"2d"`` (nearest pixels in the image) or ``"3d"`` (nearest
        unprojected points; needs depth and intrinsics).
    window : side of the candidate box searched in 3D mode.
    """

    kind: str = "sg"
    size: int = 5
    order: int = 3
    mode: str = "2d"
    window: int = 15

    def __post_init__(self):
        if self.kind != "sg" and self.kind not in CLASSIC_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError("kernel size must be a positive odd integer")
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if self.mode not in ("2d", "3d"):
            raise ValueError("mode must be '2d' or '3d'")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("window must be a positive odd integer")
        if self.kind == "sg" and n_coefficients(self.order) > self.size ** 2:
            raise ValueError("order too high for neighborhood")


@dataclass(frozen=True, eq=False)
class OperatorBundle:
    """``Du``, ``Dv`` and ``S`` over one domain.

    ``support`` lists, per row, the linear indices the kernels were fitted on
    (``-1`` padded), before near-zero weights were dropped.  ``orders`` holds
    the polynomial order actually used per row for ``(Du, Dv, S)``.
    """

    Du: sp.csr_matrix
    Dv: sp.csr_matrix
    S: sp.csr_matrix
    config: KernelConfig
    support: np.ndarray = field(repr=False)
    orders: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.Du.shape[0]


def _to_csr(rows, cols, vals, n) -> sp.csr_matrix:
    vals = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite operator weight")
    keep = np.abs(vals) >= DROP_TOL
    A = sp.csr_matrix((vals[keep], (np.asarray(rows)[keep], np.asarray(cols)[keep])), shape=(n, n))
    A.sum_duplicates()
    A.sort_indices()
    return A


def _max_feasible_order(m: int, k: int) -> int:
    while k > 0 and n_coefficients(k) > m:
        k -= 1
    return k


def _assemble_sg(domain: PixelDomain, cfg: KernelConfig, depth, intrinsics):
    n, d = domain.n, cfg.size
    K = d * d
    support = np.full((n, K), -1, dtype=np.int64)
    orders = np.zeros((n, 3), dtype=np.int64)
    weights = np.zeros((n, 3, K))

    if cfg.mode == "2d":
        square = square_support(domain, d)
    else:
        square = np.zeros(n, dtype=bool)

    inner = np.flatnonzero(square)
    if len(inner):
        offs = square_offsets(d)
        kernels = [sg_kernel(offs, cfg.order, t) for t in ("deriv_u", "deriv_v", "smooth")]
        u, v = domain.u[inner], domain.v[inner]
        support[inner] = domain.index_of[v[:, None] + offs[:, 1], u[:, None] + offs[:, 0]]
        for j, ker in enumerate(kernels):
            weights[inner, j] = ker.weights
            orders[inner, j] = ker.order

    comp_size = np.bincount(domain.component_of, minlength=domain.n_components)
    cache: dict[bytes, list] = {}
    for i in np.flatnonzero(~square):
        pixel = tuple(int(c) for c in domain.pixel_of[i])
        k_nn = min(K, int(comp_size[domain.component_of[i]]))
        if cfg.mode == "2d":
            nb = knn_pixels(domain, pixel, k_nn, same_component=True)
        else:
            nb = knn_points3d(domain, depth, intrinsics, pixel, k_nn, cfg.window, same_component=True)
        offs = nb.offsets
        key = offs.tobytes()
        if key not in cache:
            k = _max_feasible_order(len(offs), cfg.order)
            try:
                cache[key] = [sg_kernel(offs, k, t) for t in ("deriv_u", "deriv_v", "smooth")]
            except ValueError as exc:
                raise ValueError(f"{exc} at pixel {pixel}") from None
        m = len(offs)
        support[i, :m] = nb.indices
        for j, ker in enumerate(cache[key]):
            weights[i, j, :m] = ker.weights
            orders[i, j] = ker.order

    rows = np.repeat(np.arange(n), K)
    cols = support.ravel()
    valid = cols >= 0
    ops = [_to_csr(rows[valid], cols[valid], weights[:, j].ravel()[valid], n) for j in range(3)]
    return ops, support, orders


def _shifted(domain: PixelDomain, du: int, dv: int) -> np.ndarray:
    """Index of the pixel at offset ``(du, dv)`` from each foreground pixel, or -1."""
    u, v = domain.u + du, domain.v + dv
    inside = (u >= 0) & (u < domain.width) & (v >= 0) & (v < domain.height)
    out = np.full(domain.n, -1, dtype=np.int64)
    out[inside] = domain.index_of[v[inside], u[inside]]
    return out


def _classic_choice(domain: PixelDomain, kind: str, direction: str) -> np.ndarray:
    """Per-pixel stencil after boundary fallback, as an index into CLASSIC_KINDS."""
    step = (1, 0) if direction == "u" else (0, 1)
    fwd = _shifted(domain, *step) >= 0
    bwd = _shifted(domain, -step[0], -step[1]) >= 0
    across = (0, 1) if direction == "u" else (1, 0)
    sc_ok = fwd & bwd
    for s in (-1, 1):
        for t in (-1, 1):
            du = step[0] * t + across[0] * s
            dv = step[1] * t + across[1] * s
            sc_ok &= _shifted(domain, du, dv) >= 0

    fw, bw, c, sc = (CLASSIC_KINDS.index(k) for k in ("fw", "bw", "c", "sc"))
    choice = np.full(domain.n, -1, dtype=np.int64)
    if kind == "fw":
        choice[bwd] = bw
        choice[fwd] = fw
    elif kind == "bw":
        choice[fwd] = fw
        choice[bwd] = bw
    else:
        choice[fwd] = fw
        choice[bwd & ~fwd] = bw
        choice[fwd & bwd] = c
        if kind == "sc":
            choice[sc_ok] = sc
    return choice


def _assemble_classic(domain: PixelDomain, cfg: KernelConfig):
    n = domain.n
    orders = np.zeros((n, 3), dtype=np.int64)
    ops = []
    for j, direction in enumerate(("u", "v")):
        choice = _classic_choice(domain, cfg.kind, direction)
        bad = np.flatnonzero(choice < 0)
        if len(bad):
            u, v = domain.pixel_of[bad[0]]
            raise ValueError(f"degenerate neighborhood at pixel {(int(u), int(v))}: "
                             f"no neighbour in direction {direction}")
        rows, cols, vals = [], [], []
        for c, kind in enumerate(CLASSIC_KINDS):
            sel = np.flatnonzero(choice == c)
            if not len(sel):
                continue
            ker = classic_kernel(kind, direction)
            orders[sel, j] = ker.order
            for (du, dv), w in zip(ker.offsets, ker.weights):
                rows.append(sel)
                cols.append(_shifted(domain, int(du), int(dv))[sel])
                vals.append(np.full(len(sel), w))
        ops.append(_to_csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n))

    # Laplacian-style smoother: mean of the available 4-neighbours
    nbrs = np.stack([_shifted(domain, du, dv) for du, dv in ((-1, 0), (1, 0), (0, -1), (0, 1))], axis=1)
    count = (nbrs >= 0).sum(axis=1)
    rows = np.repeat(np.arange(n), 4)
    cols = nbrs.ravel()
    vals = np.repeat(1.0 / np.maximum(count, 1), 4)
    ok = cols >= 0
    lonely = np.flatnonzero(count == 0)
    S = _to_csr(np.concatenate([rows[ok], lonely]), np.concatenate([cols[ok], lonely]),
                np.concatenate([vals[ok], np.ones(len(lonely))]), n)
    ops.append(S)
    orders[:, 2] = 1

    pattern = (abs(ops[0]) + abs(ops[1]) + sp.identity(n, format="csr")).tocsr()
    pattern.sort_indices()
    width = int(np.diff(pattern.indptr).max())
    support = np.full((n, width), -1, dtype=np.int64)
    for i in range(n):
        cols_i = pattern.indices[pattern.indptr[i]:pattern.indptr[i + 1]]
        support[i, :len(cols_i)] = cols_i
    return ops, support, orders


def assemble_operators(domain: PixelDomain, config: KernelConfig | None = None,
                       depth=None, intrinsics=None) -> OperatorBundle:
    """Build ``Du``, ``Dv`` and ``S`` for every foreground pixel.

    SG kernels use the shared centred ``d x d`` kernel wherever the whole block
    is foreground (2D mode) and a custom kernel fitted on the ``d**2`` nearest
    pixels of the same connected component elsewhere.  In 3D mode every pixel
    gets a custom kernel chosen by nearest unprojected points, which requires
    ``depth`` (one value per foreground pixel) and ``intrinsics``.

    Classic stencils switch to the one-sided variant where a neighbour is
    missing; their ``S`` is the 4-neighbour mean.
    """
    cfg = config or KernelConfig()
    if cfg.mode == "3d":
        if cfg.kind != "sg":
            raise ValueError("3d neighborhoods are only available for sg kernels")
        if depth is None or intrinsics is None:
            raise ValueError("3d mode requires depth and intrinsics")
        depth = np.asarray(depth, dtype=float)
        if depth.shape != (domain.n,):
            raise ValueError("depth must hold one value per foreground pixel")
        if not np.all(np.isfinite(depth)) or np.any(depth == 0):
            raise ValueError("depth must be finite and nonzero")
    if cfg.kind == "sg":
        ops, support, orders = _assemble_sg(domain, cfg, depth, intrinsics)
    else:
        ops, support, orders = _assemble_classic(domain, cfg)
    return OperatorBundle(*ops, config=cfg, support=support, orders=orders)


def matvec(A, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or A.shape[1] != len(x):
        raise ValueError(f"dimension mismatch: operator has {A.shape[1]} columns, vector has {x.shape}")
    return np.asarray(A @ x)


def vstack(blocks) -> sp.csr_matrix:
    """Stack ``(scale, operator)`` pairs vertically, scaling each block."""
    blocks = list(blocks)
    if not blocks:
        raise ValueError("nothing to stack")
    ncols = {A.shape[1] for _, A in blocks}
    if len(ncols) != 1:
        raise ValueError(f"column mismatch: {sorted(ncols)}")
    out = sp.vstack([sp.csr_matrix(A) * float(s) for s, A in blocks], format="csr")
    out.sum_duplicates()
    out.sort_indices()
    return out


def write_triplets(A, path) -> None:
    """Write ``rows cols nnz`` then one ``row col value`` line per stored entry."""
    A = sp.coo_matrix(sp.csr_matrix(A))
    with open(path, "w") as fh:
        fh.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for r, c, x in zip(A.row, A.col, A.data):
            fh.write(f"{r} {c} {x:.17g}\n")


def read_triplets(path) -> sp.csr_matrix:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: malformed triplet header")
        rows, cols, nnz = (int(t) for t in header)
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    if len(data) != nnz:
        raise ValueError(f"{path}: expected {nnz} entries, found {len(data)}")
    A = sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(rows, cols))
    A.sort_indices()
    return A
