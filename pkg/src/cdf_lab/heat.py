"""Hyperbolic heat conduction in rigid bodies.

State U = (u, w) with internal energy u and a dissipative vector w
conjugate to the heat flux: q = -w/alpha0.  Entropy
s(u, w) = c_v ln u - |w|^2 / (2 alpha0) gives temperature theta = u / c_v,
dissipation matrix M = I / (lambda theta^2), and the w-equation is a
regularized Cattaneo law whose stationary limit is Fourier's law.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import CdfModel


@dataclass(frozen=True)
class HeatParams:
    c_v: float = 1.0
    lambda_: float = 1.0
    alpha0: float = 1.0
    space_dim: int = 1

    def __post_init__(self):
        for name in ("c_v", "lambda_", "alpha0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.space_dim not in (1, 2):
            raise ValueError("space_dim must be 1 or 2")


def heat_model(params: HeatParams,
               dissipation: Optional[Callable[[np.ndarray], np.ndarray]] = None,
               ) -> CdfModel:
    """Build the heat-conduction model.

    `dissipation` optionally replaces the default M = I/(lambda theta^2)
    with a user-supplied state-dependent matrix (the generalized,
    anisotropic variant); the exact exponential source step is then
    unavailable and the solver falls back to an implicit update.
    """
    c_v, lam, a0 = params.c_v, params.lambda_, params.alpha0
    m = params.space_dim

    def entropy(U):
        u = U[..., 0]
        w2 = np.sum(U[..., 1:] ** 2, axis=-1)
        return c_v * np.log(u) - w2 / (2.0 * a0)

    def entropy_grad(U):
        g = np.empty_like(U)
        g[..., 0] = c_v / U[..., 0]
        g[..., 1:] = -U[..., 1:] / a0
        return g

    def flux(U, j):
        out = np.zeros_like(U)
        out[..., 0] = -U[..., 1 + j] / a0          # q_j
        out[..., 1 + j] = c_v / U[..., 0]          # theta^{-1}
        return out

    def default_dissipation(U):
        theta = U[..., 0] / c_v
        coeff = 1.0 / (lam * theta ** 2)
        M = np.zeros(U.shape[:-1] + (m, m))
        idx = np.arange(m)
        M[..., idx, idx] = coeff[..., None]
        return M

    def admissible(U):
        return np.isfinite(U).all(axis=-1) & (U[..., 0] > 0)

    def max_wave_speed(U):
        return np.sqrt(c_v / a0) / U[..., 0]

    def source_decay_rates(U):
        theta = U[..., 0] / c_v
        rate = 1.0 / (a0 * lam * theta ** 2)
        return np.broadcast_to(rate[..., None], U.shape[:-1] + (m,)).copy()

    def derived(U):
        u = U[..., 0]
        q = -U[..., 1:] / a0
        theta = u / c_v
        sigma = np.sum(q ** 2, axis=-1) / (lam * theta ** 2)
        return {"theta": theta,
                "q": q[..., 0] if m == 1 else q,
                "tau": np.zeros_like(u),
                "sigma": sigma}

    box = np.array([(0.5, 2.0)] + [(-1.0, 1.0)] * m)
    return CdfModel(
        name="heat",
        n_conserved=1,
        n_dissipative=m,
        space_dim=m,
        flux=flux,
        entropy=entropy,
        dissipation_matrix=dissipation or default_dissipation,
        admissible=admissible,
        entropy_grad=entropy_grad,
        max_wave_speed=max_wave_speed,
        source_decay_rates=None if dissipation else source_decay_rates,
        sample_box=box,
        derived=derived,
    )


def sign_flipped_heat_model(params: HeatParams) -> CdfModel:
    """Deliberately broken fixture: the w-part of the entropy has the wrong
    sign, so concavity (and with it symmetrizable hyperbolicity) fails."""
    good = heat_model(params)
    c_v, a0 = params.c_v, params.alpha0

    def entropy(U):
        u = U[..., 0]
        w2 = np.sum(U[..., 1:] ** 2, axis=-1)
        return c_v * np.log(u) + w2 / (2.0 * a0)

    def entropy_grad(U):
        g = np.empty_like(U)
        g[..., 0] = c_v / U[..., 0]
        g[..., 1:] = U[..., 1:] / a0
        return g

    return CdfModel(
        name="heat-signflip",
        n_conserved=1,
        n_dissipative=good.n_dissipative,
        space_dim=good.space_dim,
        flux=good.flux,
        entropy=entropy,
        dissipation_matrix=good.dissipation_matrix,
        admissible=good.admissible,
        entropy_grad=entropy_grad,
        max_wave_speed=good.max_wave_speed,
        sample_box=good.sample_box,
    )


def fourier_flux(params: HeatParams, grad_theta) -> np.ndarray:
    """Stationary-limit heat flux q = -lambda grad(theta)."""
    return -params.lambda_ * np.asarray(grad_theta, dtype=float)


def generalized_fourier(M, grad_theta_inv) -> np.ndarray:
    """Solve M q = grad(theta^{-1}), the anisotropic stationary limit."""
    M = np.asarray(M, dtype=float)
    return np.linalg.solve(M, np.asarray(grad_theta_inv, dtype=float))
