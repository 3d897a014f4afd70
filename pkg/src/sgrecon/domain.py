"""Foreground pixel domains: indexing, connectivity and nearest-pixel search.

Pixels are addressed as ``(u, v)`` with ``u`` the column and ``v`` the row, so
a mask array is indexed ``mask[v, u]``.  Foreground pixels are numbered in
row-major order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

__all__ = [
    "PixelDomain",
    "Neighborhood",
    "build_domain",
    "has_square_neighborhood",
    "square_support",
    "knn_pixels",
    "knn_points3d",
]

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class PixelDomain:
    """An arbitrary (possibly disconnected) set of foreground pixels.

    Attributes
    ----------
    mask : (H, W) bool array
        Foreground mask, ``mask[v, u]``.
    index_of : (H, W) int array
        Linear index of each foreground pixel, ``-1`` on background.
    pixel_of : (n, 2) int array
        ``(u, v)`` coordinates of each linear index.
    component_of : (n,) int array
        8-connected component label of each linear index, numbered from 0 in
        raster order of first appearance.
    n_components : int
    """

    mask: np.ndarray
    index_of: np.ndarray
    pixel_of: np.ndarray
    component_of: np.ndarray
    n_components: int

    @property
    def n(self) -> int:
        return len(self.pixel_of)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def u(self) -> np.ndarray:
        return self.pixel_of[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.pixel_of[:, 1]

    def contains(self, u: int, v: int) -> bool:
        return 0 <= u < self.width and 0 <= v < self.height and bool(self.mask[v, u])

    def index(self, pixel) -> int:
        u, v = pixel
        if not self.contains(u, v):
            raise ValueError(f"pixel {(u, v)} is not in the domain")
        return int(self.index_of[v, u])

    def component_indices(self, label: int) -> np.ndarray:
        return self._component_members[label]

    def to_image(self, values, fill=0.0) -> np.ndarray:
        """Scatter per-pixel values (shape ``(n,)`` or ``(n, c)``) into an image."""
        values = np.asarray(values)
        out = np.full(self.mask.shape + values.shape[1:], fill, dtype=np.result_type(values, fill))
        out[self.v, self.u] = values
        return out

    def from_image(self, image) -> np.ndarray:
        image = np.asarray(image)
        if image.shape[:2] != self.mask.shape:
            raise ValueError(f"image shape {image.shape[:2]} does not match mask shape {self.mask.shape}")
        return image[self.v, self.u]

    @cached_property
    def _component_members(self) -> list[np.ndarray]:
        order = np.argsort(self.component_of, kind="stable")
        bounds = np.searchsorted(self.component_of[order], np.arange(self.n_components + 1))
        return [order[bounds[c]:bounds[c + 1]] for c in range(self.n_components)]

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.pixel_of.astype(float))

    @cached_property
    def _component_trees(self) -> list[cKDTree]:
        return [cKDTree(self.pixel_of[idx].astype(float)) for idx in self._component_members]


@dataclass(frozen=True)
class Neighborhood:
    """An ordered set of foreground pixels around ``center``.

    ``members`` is an ``(m, 2)`` array of ``(u, v)`` pixels and ``indices``
    their linear indices in the owning domain.
    """

    center: tuple[int, int]
    members: np.ndarray
    indices: np.ndarray

    @property
    def offsets(self) -> np.ndarray:
        return self.members - np.asarray(self.center)

    def __len__(self) -> int:
        return len(self.members)


def build_domain(mask) -> PixelDomain:
    mask = np.asarray(mask).astype(bool)
    if mask.ndim != 2:
        raise ValueError("mask must be a 2D array")
    if not mask.any():
        raise ValueError("empty domain")
    v, u = np.nonzero(mask)
    index_of = np.full(mask.shape, -1, dtype=np.int64)
    index_of[v, u] = np.arange(len(u))
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    mask.setflags(write=False)
    index_of.setflags(write=False)
    pixel_of = np.stack([u, v], axis=1).astype(np.int64)
    pixel_of.setflags(write=False)
    component_of = (labels[v, u] - 1).astype(np.int64)
    component_of.setflags(write=False)
    return PixelDomain(mask, index_of, pixel_of, component_of, int(count))


def has_square_neighborhood(domain: PixelDomain, pixel, d: int) -> bool:
    """True iff the ``d x d`` block centred on ``pixel`` lies entirely in the domain."""
    if d < 1 or d % 2 == 0:
        raise ValueError("d must be a positive odd integer")
    u, v = pixel
    r = d // 2
    if u - r < 0 or v - r < 0 or u + r >= domain.width or v + r >= domain.height:
        return False
    return bool(domain.mask[v - r:v + r + 1, u - r:u + r + 1].all())


def square_support(domain: PixelDomain, d: int) -> np.ndarray:
    """Vectorised :func:`has_square_neighborhood` over every foreground pixel.

    Counts foreground pixels under a ``d x d`` box of ones (zero padding outside
    the image) and compares with ``d**2``.
    """
    if d < 1 or d % 2 == 0:
        raise ValueError("d must be a positive odd integer")
    counts = ndimage.correlate(domain.mask.astype(np.int64), np.ones((d, d), dtype=np.int64),
                               mode="constant", cval=0)
    return counts[domain.v, domain.u] == d * d


def _select(center, candidates: np.ndarray, dist2: np.ndarray, K: int) -> np.ndarray:
    # nearest first, ties broken by (v, u) ascending; distances equal up to
    # rounding (1e-9 relative) count as ties so 3D distances tie like 2D ones
    d = np.asarray(dist2, dtype=float)
    srt = np.sort(d)
    jumps = np.diff(srt) > 1e-9 * srt[1:]
    rank = np.concatenate([[0], np.cumsum(jumps)])
    tier = rank[np.searchsorted(srt, d)]
    order = np.lexsort((candidates[:, 0], candidates[:, 1], tier))
    return order[:K]


def knn_pixels(domain: PixelDomain, pixel, K: int, same_component: bool = False) -> Neighborhood:
    """The ``K`` foreground pixels nearest to ``pixel`` in the image plane.

    With ``same_component`` the search is restricted to the connected
    component containing ``pixel``.
    """
    center = domain.index(pixel)
    if same_component:
        label = domain.component_of[center]
        pool = domain.component_indices(label)
        tree = domain._component_trees[label]
    else:
        pool = None
        tree = domain._tree
    size = domain.n if pool is None else len(pool)
    if K < 1:
        raise ValueError("K must be at least 1")
    if K > size:
        raise ValueError("neighborhood exceeds domain")

    q = np.asarray(pixel, dtype=float)
    dist, _ = tree.query(q, k=K)
    radius = float(np.max(np.atleast_1d(dist)))
    # every pixel at the K-th distance must be a candidate so ties resolve by (v, u)
    cand = np.asarray(tree.query_ball_point(q, radius + 1e-6), dtype=np.int64)
    if pool is not None:
        cand = pool[cand]
    pix = domain.pixel_of[cand]
    d2 = ((pix - np.asarray(pixel)) ** 2).sum(axis=1)
    keep = cand[_select(pixel, pix, d2, K)]
    return Neighborhood((int(pixel[0]), int(pixel[1])), domain.pixel_of[keep], keep)


def unproject(u, v, z, intrinsics) -> np.ndarray:
    """Perspective back-projection ``((u - cu) z / f, (v - cv) z / f, z)``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    return np.stack([(u - intrinsics.cu) * z / intrinsics.f,
                     (v - intrinsics.cv) * z / intrinsics.f, z], axis=-1)


def knn_points3d(domain: PixelDomain, depth, intrinsics, pixel, K: int, window: int = 15,
                 same_component: bool = False) -> Neighborhood:
    """The ``K`` pixels whose unprojected 3D points are nearest to that of ``pixel``.

    Candidates are the foreground pixels inside the ``window x window`` box
    centred on ``pixel``.  ``depth`` holds one value per foreground pixel.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    if K < 1:
        raise ValueError("K must be at least 1")
    if K > domain.n:
        raise ValueError("neighborhood exceeds domain")
    z = np.asarray(depth, dtype=float)
    center = domain.index(pixel)
    u0, v0 = pixel
    r = window // 2
    v_lo, v_hi = max(v0 - r, 0), min(v0 + r + 1, domain.height)
    u_lo, u_hi = max(u0 - r, 0), min(u0 + r + 1, domain.width)
    block = domain.index_of[v_lo:v_hi, u_lo:u_hi]
    cand = block[block >= 0]
    if same_component:
        cand = cand[domain.component_of[cand] == domain.component_of[center]]
    if len(cand) < K:
        raise ValueError("window too small for K")
    pix = domain.pixel_of[cand]
    pts = unproject(pix[:, 0], pix[:, 1], z[cand], intrinsics)
    p0 = unproject(u0, v0, z[center], intrinsics)
    d2 = ((pts - p0) ** 2).sum(axis=1)
    keep = cand[_select(pixel, pix, d2, K)]
    return Neighborhood((int(u0), int(v0)), domain.pixel_of[keep], keep)
