"""Normals-from-depth and height-from-normals on a pixel domain.

Both projections use the tangency constraints ``n . dp/du = 0`` and
``n . dp/dv = 0`` with the surface point ``p(u, v)`` written in terms of the
depth ``z``:

* orthographic: ``p = (s u, s v, z)`` for pixel pitch ``s``;
* perspective: ``p = z ((u - cu) / f, (v - cv) / f, 1)``.

Substituting a sparse derivative operator for ``d/du`` and ``d/dv`` makes
either pair linear in ``z``; the perspective system is homogeneous, so its
scale is fixed by pinning one pixel per connected component.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .domain import PixelDomain, unproject
from .lsq import LsqProblem, LsqSolution, default_pins, fix_gauge, solve
from .operators import KernelConfig, OperatorBundle, assemble_operators, vstack

__all__ = [
    "CameraIntrinsics",
    "NormalField",
    "DepthField",
    "ReconstructionOptions",
    "normals_from_depth",
    "build_ortho_system",
    "build_persp_system",
    "height_from_normals",
]

ORTHOGRAPHIC = "orthographic"
PERSPECTIVE = "perspective"
_PROJECTIONS = {"orthographic": ORTHOGRAPHIC, "ortho": ORTHOGRAPHIC,
                "perspective": PERSPECTIVE, "persp": PERSPECTIVE}


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels: focal length and principal point."""

    f: float
    cu: float
    cv: float

    def __post_init__(self):
        if not (np.isfinite(self.f) and self.f > 0):
            raise ValueError("focal length must be positive")
        if not (np.isfinite(self.cu) and np.isfinite(self.cv)):
            raise ValueError("principal point must be finite")


@dataclass(eq=False)
class DepthField:
    domain: PixelDomain
    z: np.ndarray
    solution: LsqSolution | None = field(default=None, repr=False)

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if self.z.shape != (self.domain.n,):
            raise ValueError("depth must hold one value per foreground pixel")

    def to_image(self, fill=0.0) -> np.ndarray:
        return self.domain.to_image(self.z, fill)


@dataclass(eq=False)
class NormalField:
    """Unit normals, one row ``(nx, ny, nz)`` per foreground pixel.

    ``valid`` is false where a normal could not be estimated; those pixels
    hold ``(0, 0, 1)``.
    """

    domain: PixelDomain
    normals: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=float)
        if self.normals.shape != (self.domain.n, 3):
            raise ValueError("normals must have shape (n, 3)")
        if self.valid is None:
            self.valid = np.ones(self.domain.n, dtype=bool)

    @property
    def nx(self) -> np.ndarray:
        return self.normals[:, 0]

    @property
    def ny(self) -> np.ndarray:
        return self.normals[:, 1]

    @property
    def nz(self) -> np.ndarray:
        return self.normals[:, 2]

    @property
    def n_invalid(self) -> int:
        return int((~self.valid).sum())

    def to_image(self) -> np.ndarray:
        return self.domain.to_image(self.normals, 0.0)


@dataclass
class ReconstructionOptions:
    """Settings shared by the reconstruction pipelines.

    ``lam`` weights the smoothness rows ``(S - I) z = 0``.  ``prior`` (one
    depth per pixel) enters through rows ``omega (z - prior) = 0``;
    ``omega`` may be a scalar or a per-pixel weight array, and pixels with
    zero weight get no row.  ``pins`` overrides the perspective pin pixels
    (one linear index per component).
    """

    projection: str = ORTHOGRAPHIC
    lam: float = 0.1
    prior: np.ndarray | None = None
    omega: float | np.ndarray = 0.0
    kernel: KernelConfig = field(default_factory=KernelConfig)
    tol_rel: float = 1e-12
    max_iters: int | None = None
    pixel_size: float = 1.0
    pins: list[int] | None = None
    pin_value: float = 1.0
    solver: str = "lsmr"

    def __post_init__(self):
        if self.projection not in _PROJECTIONS:
            raise ValueError(f"unknown projection {self.projection!r}")
        self.projection = _PROJECTIONS[self.projection]
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if np.any(np.asarray(self.omega) < 0):
            raise ValueError("omega must be non-negative")
        if np.any(np.asarray(self.omega) > 0) and self.prior is None:
            raise ValueError("a positive omega requires a prior depth field")
        if self.pixel_size <= 0:
            raise ValueError("pixel size must be positive")


def _prior_rows(opts: ReconstructionOptions, n: int):
    """Selection rows and targets for the depth prior, or None."""
    omega = np.broadcast_to(np.asarray(opts.omega, dtype=float), (n,))
    active = np.flatnonzero(omega > 0)
    if not len(active):
        return None
    prior = opts.prior.z if isinstance(opts.prior, DepthField) else np.asarray(opts.prior, dtype=float)
    if prior.shape != (n,):
        raise ValueError("prior must hold one value per foreground pixel")
    W = sp.csr_matrix((omega[active], (np.arange(len(active)), active)), shape=(len(active), n))
    return W, omega[active] * prior[active], active


def _common_blocks(bundle: OperatorBundle, opts: ReconstructionOptions):
    n = bundle.n
    blocks, rhs = [], []
    if opts.lam > 0:
        blocks.append((opts.lam, bundle.S - sp.identity(n, format="csr")))
        rhs.append(np.zeros(n))
    prior = _prior_rows(opts, n)
    if prior is not None:
        blocks.append((1.0, prior[0]))
        rhs.append(prior[1])
    return blocks, rhs


def _check_unit(normals: NormalField):
    length = np.linalg.norm(normals.normals, axis=1)
    if not np.all(np.abs(length - 1) <= 1e-6):
        raise ValueError("normals must be unit length")


def build_ortho_system(normals: NormalField, bundle: OperatorBundle,
                       opts: ReconstructionOptions | None = None) -> LsqProblem:
    """Stack ``diag(nz) Du z = -s nx`` and ``diag(nz) Dv z = -s ny`` plus the
    smoothness and prior blocks."""
    opts = opts or ReconstructionOptions()
    _check_unit(normals)
    Nz = sp.diags(normals.nz)
    s = opts.pixel_size
    blocks = [(1.0, Nz @ bundle.Du), (1.0, Nz @ bundle.Dv)]
    rhs = [-s * normals.nx, -s * normals.ny]
    extra, extra_rhs = _common_blocks(bundle, opts)
    return LsqProblem(vstack(blocks + extra), np.concatenate(rhs + extra_rhs),
                      tol_rel=opts.tol_rel, max_iters=opts.max_iters)


def _free_components(domain: PixelDomain, opts: ReconstructionOptions) -> list[int]:
    """Components with no prior pixel, whose gauge must be fixed explicitly."""
    prior = _prior_rows(opts, domain.n)
    if prior is None:
        return list(range(domain.n_components))
    anchored = set(domain.component_of[prior[2]].tolist())
    return [c for c in range(domain.n_components) if c not in anchored]


def _pins(domain: PixelDomain, opts: ReconstructionOptions) -> list[int]:
    pins = default_pins(domain) if opts.pins is None else [int(p) for p in opts.pins]
    if sorted(domain.component_of[pins].tolist()) != list(range(domain.n_components)):
        raise ValueError("need exactly one pin pixel per connected component")
    return pins


def build_persp_system(normals: NormalField, bundle: OperatorBundle, intrinsics: CameraIntrinsics,
                       opts: ReconstructionOptions | None = None) -> LsqProblem:
    """Homogeneous perspective tangency rows plus smoothness, prior and pins.

    Per pixel ``i`` with ray ``r_i = ((u_i - cu)/f, (v_i - cv)/f, 1)``::

        (n_i . r_i) Du_i z + (nx_i / f) z_i = 0
        (n_i . r_i) Dv_i z + (ny_i / f) z_i = 0
    """
    opts = opts or ReconstructionOptions(projection=PERSPECTIVE)
    _check_unit(normals)
    domain = normals.domain
    f = intrinsics.f
    ray_dot = (normals.nx * (domain.u - intrinsics.cu) / f
               + normals.ny * (domain.v - intrinsics.cv) / f + normals.nz)
    G = sp.diags(ray_dot)
    Ax = G @ bundle.Du + sp.diags(normals.nx / f)
    Ay = G @ bundle.Dv + sp.diags(normals.ny / f)
    extra, extra_rhs = _common_blocks(bundle, opts)
    pins = _pins(domain, opts)
    free = set(_free_components(domain, opts))
    pin = [(p, opts.pin_value) for p in pins if domain.component_of[p] in free]
    n = domain.n
    return LsqProblem(vstack([(1.0, Ax), (1.0, Ay)] + extra),
                      np.concatenate([np.zeros(2 * n)] + extra_rhs),
                      tol_rel=opts.tol_rel, max_iters=opts.max_iters, pin=pin or None)


def height_from_normals(normals: NormalField, opts: ReconstructionOptions | None = None,
                        intrinsics: CameraIntrinsics | None = None,
                        bundle: OperatorBundle | None = None) -> DepthField:
    """Integrate a normal field into depth.

    Orthographic results have zero mean on every component without prior
    pixels.  Perspective results are scaled so each such component equals
    ``pin_value`` at its pin pixel, with the sign chosen so the component
    median is positive.  The solver report is attached as ``.solution``.
    """
    opts = opts or ReconstructionOptions()
    domain = normals.domain
    if bundle is None:
        if opts.kernel.mode == "3d":
            raise ValueError("3d neighborhoods need a depth map; use 2d kernels for integration")
        bundle = assemble_operators(domain, opts.kernel)
    if opts.projection == PERSPECTIVE:
        if intrinsics is None:
            raise ValueError("perspective projection requires intrinsics")
        problem = build_persp_system(normals, bundle, intrinsics, opts)
    else:
        problem = build_ortho_system(normals, bundle, opts)
    sol = solve(problem, method=opts.solver)
    if not sol.converged:
        warnings.warn(f"least-squares solver stopped after {sol.iterations} iterations "
                      "without converging", RuntimeWarning, stacklevel=2)
    free = _free_components(domain, opts)
    if opts.projection == PERSPECTIVE:
        z = fix_gauge(sol.z, domain, "scale_pin", _pins(domain, opts), components=free)
        z = np.where(np.isin(domain.component_of, free), z * opts.pin_value, z)
    else:
        z = fix_gauge(sol.z, domain, "offset_zero_mean", components=free)
    return DepthField(domain, z, sol)


def normals_from_depth(depth: DepthField, intrinsics: CameraIntrinsics | None = None,
                       opts: ReconstructionOptions | None = None,
                       bundle: OperatorBundle | None = None) -> NormalField:
    """Differentiate ``depth`` and cross the two surface tangents.

    Orthographic normals have ``nz > 0``.  Perspective normals satisfy
    ``n . p >= 0`` for the surface point ``p``, so a fronto-parallel plane at
    positive depth gives ``(0, 0, 1)``.  Pixels with a vanishing cross
    product are flagged invalid.
    """
    opts = opts or ReconstructionOptions()
    domain = depth.domain
    z = depth.z
    if not np.all(np.isfinite(z)):
        raise ValueError("depth must be finite")
    if opts.projection == PERSPECTIVE and intrinsics is None:
        raise ValueError("perspective projection requires intrinsics")
    if bundle is None:
        if opts.kernel.mode == "3d" and intrinsics is None:
            raise ValueError("3d neighborhoods require intrinsics")
        bundle = assemble_operators(domain, opts.kernel, z, intrinsics)
    zu = bundle.Du @ z
    zv = bundle.Dv @ z

    if opts.projection == PERSPECTIVE:
        f = intrinsics.f
        du = domain.u - intrinsics.cu
        dv = domain.v - intrinsics.cv
        tu = np.stack([(du * zu + z) / f, dv * zu / f, zu], axis=1)
        tv = np.stack([du * zv / f, (dv * zv + z) / f, zv], axis=1)
        n = np.cross(tu, tv)
        n *= np.where(z < 0, -1.0, 1.0)[:, None]
        scale = np.abs(z) / f
    else:
        s = opts.pixel_size
        n = np.stack([-s * zu, -s * zv, np.full_like(zu, s * s)], axis=1)
        scale = np.full_like(zu, s)

    length = np.linalg.norm(n, axis=1)
    # compare against the tangent magnitudes so the test is scale-free
    valid = length > 1e-12 * np.maximum(scale, 1e-300) ** 2
    out = np.zeros_like(n)
    out[:, 2] = 1.0
    out[valid] = n[valid] / length[valid, None]
    field_ = NormalField(domain, out, valid)
    if field_.n_invalid:
        warnings.warn(f"{field_.n_invalid} pixels have degenerate tangents", RuntimeWarning, stacklevel=2)
    return field_


def unproject_depth(depth: DepthField, intrinsics: CameraIntrinsics) -> np.ndarray:
    d = depth.domain
    return unproject(d.u, d.v, depth.z, intrinsics)
