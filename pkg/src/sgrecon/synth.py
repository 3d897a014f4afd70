"""Synthetic surfaces, gradient noise and reconstruction error metrics."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .domain import PixelDomain, build_domain
from .operators import KernelConfig, assemble_operators
from .reconstruct import DepthField, NormalField, ReconstructionOptions, height_from_normals

__all__ = [
    "SyntheticSurface",
    "NoiseSpec",
    "peaks_surface",
    "bumps_surface",
    "sphere_surface",
    "make_surface",
    "gradients_to_normals",
    "normals_to_gradients",
    "add_gradient_noise",
    "rmse_aligned",
    "median_angular_error",
    "angular_errors",
    "method_options",
    "noise_sweep",
    "sweep_summary",
    "write_sweep_csv",
    "plot_sweep",
]


@dataclass(eq=False)
class SyntheticSurface:
    """A depth map with its analytic gradients (per pixel, not per world unit)."""

    name: str
    domain: PixelDomain
    z: np.ndarray
    gx: np.ndarray
    gy: np.ndarray

    @property
    def depth(self) -> DepthField:
        return DepthField(self.domain, self.z)

    @property
    def normals(self) -> NormalField:
        return gradients_to_normals(self.gx, self.gy, self.domain)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


def _grid(w: int, h: int, extent: float):
    u = np.arange(w, dtype=float)
    v = np.arange(h, dtype=float)
    x = -extent + 2 * extent * u / (w - 1)
    y = -extent + 2 * extent * v / (h - 1)
    X, Y = np.meshgrid(x, y)
    return X, Y, 2 * extent / (w - 1), 2 * extent / (h - 1)


def _from_images(name, mask, Z, GX, GY) -> SyntheticSurface:
    domain = build_domain(mask)
    return SyntheticSurface(name, domain, domain.from_image(Z), domain.from_image(GX), domain.from_image(GY))


def peaks_surface(w: int, h: int, amplitude: float = 1.0, extent: float = 3.0, mask=None) -> SyntheticSurface:
    """The classic ``peaks`` function sampled on ``[-extent, extent]^2``.

    Pixel ``u`` maps to ``x = -extent + 2 extent u / (w - 1)`` and likewise
    ``v`` to ``y``.
    """
    if w < 8 or h < 8:
        raise ValueError("peaks surface needs at least 8x8 pixels")
    x, y, hx, hy = _grid(w, h, extent)
    ea = np.exp(-x ** 2 - (y + 1) ** 2)
    eb = np.exp(-x ** 2 - y ** 2)
    ec = np.exp(-(x + 1) ** 2 - y ** 2)
    poly = x / 5 - x ** 3 - y ** 5
    z = 3 * (1 - x) ** 2 * ea - 10 * poly * eb - ec / 3
    dzdx = (3 * ea * (-2 * (1 - x) - 2 * x * (1 - x) ** 2)
            - 10 * eb * ((0.2 - 3 * x ** 2) - 2 * x * poly)
            + (2 / 3) * (x + 1) * ec)
    dzdy = (-6 * (1 - x) ** 2 * (y + 1) * ea
            - 10 * eb * (-5 * y ** 4 - 2 * y * poly)
            + (2 / 3) * y * ec)
    if mask is None:
        mask = np.ones((h, w), dtype=bool)
    return _from_images("peaks", mask, amplitude * z, amplitude * dzdx * hx, amplitude * dzdy * hy)


def bumps_surface(w: int, h: int, amplitude: float = 1.0, mask=None) -> SyntheticSurface:
    """Sum of three Gaussian bumps of different widths on ``[-3, 3]^2``."""
    x, y, hx, hy = _grid(w, h, 3.0)
    z = np.zeros_like(x)
    gx = np.zeros_like(x)
    gy = np.zeros_like(x)
    for a, cx, cy, s in ((2.0, -1.0, -0.8, 0.9), (-1.2, 1.2, 0.5, 0.6), (1.5, 0.3, 1.6, 1.2)):
        g = a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
        z += g
        gx += -g * (x - cx) / (s * s)
        gy += -g * (y - cy) / (s * s)
    if mask is None:
        mask = np.ones((h, w), dtype=bool)
    return _from_images("bumps", mask, amplitude * z, amplitude * gx * hx, amplitude * gy * hy)


def sphere_surface(w: int, h: int, radius: float | None = None, coverage: float = 0.9) -> SyntheticSurface:
    """Sphere cap ``z = sqrt(R^2 - r^2)`` in pixel units over a disc mask.

    The mask keeps ``r <= coverage R`` so gradients stay bounded.
    """
    R = radius if radius is not None else 0.5 * min(w, h) - 1
    u, v = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    du, dv = u - (w - 1) / 2, v - (h - 1) / 2
    r2 = du ** 2 + dv ** 2
    mask = r2 <= (coverage * R) ** 2
    z = np.sqrt(np.maximum(R * R - r2, 0.0))
    zs = np.where(mask, z, 1.0)
    return _from_images("sphere", mask, z, -du / zs, -dv / zs)


def make_surface(name: str, w: int, h: int, **kwargs) -> SyntheticSurface:
    factories = {"peaks": peaks_surface, "bumps": bumps_surface, "sphere": sphere_surface}
    if name not in factories:
        raise ValueError(f"unknown surface {name!r}; expected one of {sorted(factories)}")
    return factories[name](w, h, **kwargs)


def gradients_to_normals(gx, gy, domain: PixelDomain) -> NormalField:
    """``n = (-gx, -gy, 1) / ||(-gx, -gy, 1)||``."""
    gx = np.asarray(gx, dtype=float)
    gy = np.asarray(gy, dtype=float)
    n = np.stack([-gx, -gy, np.ones_like(gx)], axis=1)
    return NormalField(domain, n / np.linalg.norm(n, axis=1, keepdims=True))


def normals_to_gradients(normals: NormalField) -> tuple[np.ndarray, np.ndarray]:
    return -normals.nx / normals.nz, -normals.ny / normals.nz


def _rng(seed: int, *stream: int) -> np.random.Generator:
    # Philox is counter based: each (seed, stream) key is an independent sequence
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def add_gradient_noise(surface: SyntheticSurface, spec: NoiseSpec, stream: tuple = ()):
    """Add i.i.d. ``N(0, sigma^2)`` noise to both gradient channels.

    Draws are interleaved per pixel ``(gx_0, gy_0, gx_1, ...)`` from a stream
    keyed by ``(seed, *stream)``.
    """
    if spec.sigma == 0:
        return surface.gx.copy(), surface.gy.copy()
    noise = _rng(spec.seed, *stream).standard_normal((surface.domain.n, 2))
    return surface.gx + spec.sigma * noise[:, 0], surface.gy + spec.sigma * noise[:, 1]


def _values(field_) -> np.ndarray:
    return np.asarray(getattr(field_, "z", field_), dtype=float)


def rmse_aligned(z, z_gt, mode: str = "offset") -> float:
    """RMSE after the optimal constant shift (``offset``) or scale (``scale``)."""
    z, z_gt = _values(z), _values(z_gt)
    if z.shape != z_gt.shape:
        raise ValueError("depth fields differ in size")
    if mode == "offset":
        diff = z - z_gt
        diff = diff - diff.mean()
    elif mode == "scale":
        zz = float(z @ z)
        if zz == 0:
            raise ValueError("cannot scale-align an all-zero reconstruction")
        diff = z * (float(z @ z_gt) / zz) - z_gt
    elif mode == "none":
        diff = z - z_gt
    else:
        raise ValueError(f"unknown alignment {mode!r}")
    return float(np.sqrt(np.mean(diff ** 2)))


def _unit_rows(n) -> np.ndarray:
    return np.asarray(getattr(n, "normals", n), dtype=float).reshape(-1, 3)


def angular_errors(n, n_gt) -> np.ndarray:
    """Per-pixel angle in degrees between two unit normal fields."""
    a, b = _unit_rows(n), _unit_rows(n_gt)
    if a.shape != b.shape:
        raise ValueError("normal fields differ in size")
    cos = np.clip(np.einsum("ij,ij->i", a, b), -1.0, 1.0)
    return np.degrees(np.arccos(cos))


def median_angular_error(n, n_gt, valid=None) -> float:
    """Lower median of the per-pixel angular error in degrees.

    Pixels flagged invalid in either field (or in ``valid``) are skipped.
    """
    err = angular_errors(n, n_gt)
    keep = np.ones(len(err), dtype=bool)
    for f in (n, n_gt):
        if getattr(f, "valid", None) is not None:
            keep &= f.valid
    if valid is not None:
        keep &= np.asarray(valid, dtype=bool)
    err = np.sort(err[keep])
    if not len(err):
        raise ValueError("no valid pixels")
    return float(err[(len(err) - 1) // 2])


def method_options(method: str, lam: float = 0.1, size: int = 5, order: int = 3) -> ReconstructionOptions:
    """Orthographic options for a named derivative scheme (``sg`` or a classic stencil)."""
    if method == "sg":
        kernel = KernelConfig("sg", size, order)
    else:
        kernel = KernelConfig(method)
    return ReconstructionOptions(lam=lam, kernel=kernel)


def noise_sweep(surface: SyntheticSurface, sigmas, methods, trials: int = 5, seed: int = 0,
                lam: float = 3.0) -> list[dict]:
    """Offset-aligned RMSE of orthographic integration under gradient noise.

    ``methods`` maps names to :class:`ReconstructionOptions`, or is a list of
    names understood by :func:`method_options` (using ``lam``; the default is
    strong smoothing, under which the methods separate clearly).  Trial ``t``
    at sigma index ``i`` draws noise from stream ``(seed, t, i)`` so every
    method sees the same perturbed gradients.  Returns one row per
    ``(sigma, method, trial)``.
    """
    if not isinstance(methods, dict):
        methods = {m: method_options(m, lam) for m in methods}
    bundles = {name: assemble_operators(surface.domain, opts.kernel) for name, opts in methods.items()}
    rows = []
    for i, sigma in enumerate(sigmas):
        for t in range(trials):
            gx, gy = add_gradient_noise(surface, NoiseSpec(float(sigma), seed), (t, i))
            normals = gradients_to_normals(gx, gy, surface.domain)
            for name, opts in methods.items():
                z = height_from_normals(normals, opts, bundle=bundles[name])
                rows.append({"sigma": float(sigma), "method": name, "trial": t,
                             "rmse": rmse_aligned(z, surface.z, "offset")})
    return rows


def sweep_summary(rows) -> dict[tuple[str, float], float]:
    """Mean RMSE per ``(method, sigma)``."""
    acc: dict[tuple[str, float], list[float]] = {}
    for r in rows:
        acc.setdefault((r["method"], r["sigma"]), []).append(r["rmse"])
    return {k: float(np.mean(v)) for k, v in acc.items()}


def write_sweep_csv(rows, fh=None) -> str | None:
    """Write ``sigma,method,trial,rmse`` rows to ``fh``, or return them as text."""
    out = fh if fh is not None else io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["sigma", "method", "trial", "rmse"])
    for r in rows:
        writer.writerow([repr(r["sigma"]), r["method"], r["trial"], repr(r["rmse"])])
    return out.getvalue() if fh is None else None


def plot_sweep(rows, path) -> None:
    """Mean RMSE against sigma, one line per method (needs matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    summary = sweep_summary(rows)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for method in dict.fromkeys(r["method"] for r in rows):
        sig = sorted(s for m, s in summary if m == method)
        ax.plot(sig, [summary[(method, s)] for s in sig], marker="o", label=method)
    ax.set_xlabel("gradient noise sigma")
    ax.set_ylabel("RMSE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
