"""Sparse depth measurements fix the unknown offset of normal integration.

Run: python3 demos/depth_prior.py
"""
import numpy as np

from sgrecon import ReconstructionOptions, height_from_normals
from sgrecon.synth import peaks_surface, rmse_aligned

s = peaks_surface(64, 64)
plain = height_from_normals(s.normals, ReconstructionOptions(lam=0.1))
print(f"no prior:   offset-aligned RMSE {rmse_aligned(plain, s.z, 'offset'):.2e}, "
      f"unaligned {rmse_aligned(plain, s.z, 'none'):.2e}")

rng = np.random.default_rng(0)
omega = np.where(rng.random(s.domain.n) < 0.2, 10.0, 0.0)
z = height_from_normals(s.normals, ReconstructionOptions(lam=0.1, prior=s.z, omega=omega))
print(f"20% prior:  unaligned RMSE {rmse_aligned(z, s.z, 'none'):.2e}")
