"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .domain import build_domain
from .operators import KernelConfig
from .reconstruct import (
    DepthField,
    NormalField,
    ReconstructionOptions,
    height_from_normals,
    normals_from_depth,
)
from .sgfilter import classic_kernel, format_kernel, sg_kernel, square_offsets
from .synth import (
    NoiseSpec,
    add_gradient_noise,
    gradients_to_normals,
    make_surface,
    median_angular_error,
    noise_sweep,
    plot_sweep,
    rmse_aligned,
    write_sweep_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _kernel_config(args, mode="2d") -> KernelConfig:
    try:
        return KernelConfig(args.deriv, args.ksize, args.order, mode, getattr(args, "window", 15))
    except ValueError as exc:
        raise UsageError(f"--deriv/--ksize/--order: {exc}") from None


def _load_mask_and_map(map_path, mask_path, channels):
    mask = io.read_mask(mask_path)
    fmap = io.read_pfm(map_path)
    if fmap.channels != channels:
        raise ValueError(f"{map_path}: expected {channels}-channel PFM, got {fmap.channels}")
    if fmap.data.shape[:2] != mask.shape:
        raise ValueError(f"{map_path}: size {fmap.width}x{fmap.height} does not match mask "
                         f"{mask_path} ({mask.shape[1]}x{mask.shape[0]})")
    domain = build_domain(mask)
    values = domain.from_image(fmap.data).astype(float)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{map_path}: non-finite values inside the mask")
    return domain, values


def _projection(args):
    proj = "perspective" if args.projection == "persp" else "orthographic"
    intrinsics = io.read_intrinsics(args.intrinsics) if args.intrinsics else None
    if proj == "perspective" and intrinsics is None:
        raise UsageError("--projection persp requires --intrinsics")
    return proj, intrinsics


def cmd_hfn(args) -> int:
    if (args.prior is None) != (args.omega is None):
        raise UsageError("--prior and --omega must be given together")
    proj, intrinsics = _projection(args)
    kernel = _kernel_config(args)
    domain, n = _load_mask_and_map(args.normals, args.mask, 3)
    length = np.linalg.norm(n, axis=1)
    if np.any(length == 0):
        raise ValueError(f"{args.normals}: zero-length normal inside the mask")
    n /= length[:, None]
    prior = None
    if args.prior:
        _, prior = _load_mask_and_map(args.prior, args.mask, 1)
    opts = ReconstructionOptions(proj, lam=args.lam, prior=prior, omega=args.omega or 0.0,
                                 kernel=kernel, tol_rel=args.tol, max_iters=args.max_iters)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        depth = height_from_normals(NormalField(domain, n), opts, intrinsics)
    io.write_pfm(depth.to_image(0.0), args.out)
    if args.export_obj:
        io.write_obj(depth, args.export_obj, intrinsics)
    if not depth.solution.converged:
        raise NumericalFailure(f"solver did not converge in {depth.solution.iterations} iterations "
                               f"(best iterate written to {args.out})")
    return EXIT_OK


def cmd_nfd(args) -> int:
    proj, intrinsics = _projection(args)
    if args.knn3d and intrinsics is None:
        raise UsageError("--knn3d requires --intrinsics")
    kernel = _kernel_config(args, "3d" if args.knn3d else "2d")
    domain, z = _load_mask_and_map(args.depth, args.mask, 1)
    opts = ReconstructionOptions(proj, kernel=kernel)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        normals = normals_from_depth(DepthField(domain, z), intrinsics, opts)
    io.write_pfm(normals.to_image(), args.out)
    if normals.n_invalid:
        print(f"{normals.n_invalid} pixels with degenerate tangents", file=sys.stderr)
    return EXIT_OK


def cmd_kernels(args) -> int:
    direction = {"du": "u", "dv": "v"}.get(args.target)
    target = {"smooth": "smooth", "du": "deriv_u", "dv": "deriv_v"}[args.target]
    if args.kind != "sg":
        if direction is None:
            raise UsageError("classic kernels only estimate du or dv")
        kernel = classic_kernel(args.kind, direction)
    else:
        if args.neighborhood:
            offsets = np.loadtxt(args.neighborhood, dtype=np.int64, ndmin=2, comments="#")
            if offsets.shape[1] != 2:
                raise ValueError(f"{args.neighborhood}: expected 'du dv' lines")
        else:
            if args.ksize < 1 or args.ksize % 2 == 0:
                raise UsageError("--ksize must be a positive odd integer")
            offsets = square_offsets(args.ksize)
        kernel = sg_kernel(offsets, args.order, target)
    sys.stdout.write(format_kernel(kernel))
    return EXIT_OK


def _parse_size(text):
    try:
        w, h = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--size must look like WxH, got {text!r}") from None
    return w, h


def cmd_synth(args) -> int:
    w, h = _parse_size(args.size)
    surface = make_surface(args.surface, w, h)
    gx, gy = add_gradient_noise(surface, NoiseSpec(args.sigma, args.seed))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = surface.domain
    io.write_pgm(d.mask, out / "mask.pgm")
    io.write_pfm(d.to_image(surface.z), out / "depth_gt.pfm")
    io.write_pfm(surface.normals.to_image(), out / "normals_gt.pfm")
    io.write_pfm(gradients_to_normals(gx, gy, d).to_image(), out / "normals.pfm")
    return EXIT_OK


def _float_list(text):
    return [float(t) for t in text.replace(",", " ").split()]


def cmd_sweep(args) -> int:
    w, h = _parse_size(args.size)
    surface = make_surface(args.surface, w, h)
    methods = args.methods.replace(",", " ").split()
    for m in methods:
        if m not in ("sg", "fw", "bw", "c", "sc"):
            raise UsageError(f"--methods: unknown method {m!r}")
    rows = noise_sweep(surface, _float_list(args.sigmas), methods, args.trials, args.seed, args.lam)
    if args.out:
        with open(args.out, "w") as fh:
            write_sweep_csv(rows, fh)
    else:
        write_sweep_csv(rows, sys.stdout)
    if args.plot:
        plot_sweep(rows, args.plot)
    return EXIT_OK


def cmd_eval(args) -> int:
    channels = 3 if args.metric == "mae-normals" else 1
    domain, pred = _load_mask_and_map(args.pred, args.mask, channels)
    _, gt = _load_mask_and_map(args.gt, args.mask, channels)
    if args.metric == "mae-normals":
        value = median_angular_error(pred / np.linalg.norm(pred, axis=1, keepdims=True),
                                     gt / np.linalg.norm(gt, axis=1, keepdims=True))
    else:
        value = rmse_aligned(pred, gt, "offset" if args.metric == "rmse-offset" else "scale")
    print(repr(float(value)))
    return EXIT_OK


def _add_kernel_flags(p, default_kind="sg"):
    p.add_argument("--ksize", type=int, default=5, help="kernel side d (odd)")
    p.add_argument("--order", type=int, default=3, help="SG polynomial order k")
    p.add_argument("--deriv", choices=["sg", "fw", "bw", "c", "sc"], default=default_kind)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sgrecon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("hfn", help="height from normals")
    p.add_argument("--normals", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--projection", choices=["ortho", "persp"], default="ortho")
    p.add_argument("--intrinsics")
    _add_kernel_flags(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--prior")
    p.add_argument("--omega", type=float)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--export-obj")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hfn)

    p = sub.add_parser("nfd", help="normals from depth")
    p.add_argument("--depth", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--projection", choices=["ortho", "persp"], default="ortho")
    p.add_argument("--intrinsics")
    _add_kernel_flags(p)
    p.add_argument("--knn3d", action="store_true")
    p.add_argument("--window", type=int, default=15)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_nfd)

    p = sub.add_parser("kernels", help="print a kernel as 'du dv weight' lines")
    p.add_argument("--ksize", type=int, default=5)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--target", choices=["smooth", "du", "dv"], required=True)
    p.add_argument("--kind", choices=["sg", "fw", "bw", "c", "sc"], default="sg")
    p.add_argument("--neighborhood", help="file of 'du dv' offset lines")
    p.set_defaults(func=cmd_kernels)

    p = sub.add_parser("synth", help="write a synthetic test case")
    p.add_argument("--surface", choices=["peaks", "bumps", "sphere"], default="peaks")
    p.add_argument("--size", default="64x64")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="RMSE against gradient noise")
    p.add_argument("--surface", choices=["peaks", "bumps", "sphere"], default="peaks")
    p.add_argument("--size", default="128x128")
    p.add_argument("--sigmas", default="0.02,0.05,0.1,0.2")
    p.add_argument("--methods", default="sg,fw")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=3.0)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--plot", help="optional SVG/PNG plot path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="compare a prediction with ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--metric", choices=["rmse-offset", "rmse-scale", "mae-normals"], required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"sgrecon: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"sgrecon: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"sgrecon: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
