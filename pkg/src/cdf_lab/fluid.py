"""1D non-isothermal compressible Maxwell fluid.

Conserved block (rho, rho v, rho e); dissipative block (rho w, rho C) with
w conjugate to the heat flux and the scalar C conjugate to the extra
stress.  Specific entropy

    s = c_v ln u + R ln nu - w^2/(2 nu alpha0) - C^2/(2 nu alpha1)

with nu = 1/rho and u = e - v^2/2.  Closures: theta^{-1} = s_u,
pi = theta s_nu, q = s_w = -rho w / alpha0, tau = theta s_C.  The sources
relax (q, tau) so that the stationary limit is Fourier-Newton-Stokes and,
for stress-dependent viscosity kappa = mu0 |tau|^alpha, a power-law fluid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CdfModel


@dataclass(frozen=True)
class FluidParams:
    R: float = 1.0
    c_v: float = 1.0
    alpha0: float = 1.0
    alpha1: float = 1.0
    lambda_: float = 1.0
    kappa_: float = 1.0

    def __post_init__(self):
        for name in ("R", "c_v", "alpha0", "alpha1", "lambda_", "kappa_"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


def primitive_from_conserved(U):
    """(rho, rho v, rho e, rho w, rho C) -> (rho, v, u, w, C)."""
    U = np.asarray(U, dtype=float)
    rho = U[..., 0]
    v = U[..., 1] / rho
    e = U[..., 2] / rho
    u = e - 0.5 * v ** 2
    w = U[..., 3] / rho
    C = U[..., 4] / rho
    return rho, v, u, w, C


def conserved_from_primitive(rho, v, u, w, C):
    rho, v, u, w, C = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (rho, v, u, w, C)))
    e = u + 0.5 * v ** 2
    return np.stack([rho, rho * v, rho * e, rho * w, rho * C], axis=-1)


def _closures(params: FluidParams, U):
    """theta, pi (generalized pressure), q, tau from a conserved state."""
    rho, v, u, w, C = primitive_from_conserved(U)
    theta = u / params.c_v
    # s_nu of the full generalized entropy, quadratic terms included
    s_nu = params.R * rho + rho ** 2 * (w ** 2 / (2.0 * params.alpha0)
                                        + C ** 2 / (2.0 * params.alpha1))
    pi = theta * s_nu
    q = -rho * w / params.alpha0
    tau = -theta * rho * C / params.alpha1
    return theta, pi, q, tau


def fluid_model(params: FluidParams) -> CdfModel:
    R, c_v = params.R, params.c_v
    a0, a1 = params.alpha0, params.alpha1
    lam, kap = params.lambda_, params.kappa_

    def entropy(U):
        rho, v, u, w, C = primitive_from_conserved(U)
        s = (c_v * np.log(u) + R * np.log(1.0 / rho)
             - rho * w ** 2 / (2.0 * a0) - rho * C ** 2 / (2.0 * a1))
        return rho * s

    def entropy_grad(U):
        rho, v, u, w, C = primitive_from_conserved(U)
        s = (c_v * np.log(u) + R * np.log(1.0 / rho)
             - rho * w ** 2 / (2.0 * a0) - rho * C ** 2 / (2.0 * a1))
        s_u = c_v / u
        s_nu = R * rho + rho ** 2 * (w ** 2 / (2.0 * a0) + C ** 2 / (2.0 * a1))
        s_w = -rho * w / a0
        s_C = -rho * C / a1
        g = np.empty_like(U)
        g[..., 0] = (s - s_nu / rho + s_u * (0.5 * v ** 2 - u)
                     - s_w * w - s_C * C)
        g[..., 1] = -s_u * v
        g[..., 2] = s_u
        g[..., 3] = s_w
        g[..., 4] = s_C
        return g

    def flux(U, j):
        rho, v, u, w, C = primitive_from_conserved(U)
        theta, pi, q, tau = _closures(params, U)
        P = pi + tau
        out = np.empty_like(U)
        out[..., 0] = U[..., 1]
        out[..., 1] = U[..., 1] * v + P
        out[..., 2] = v * U[..., 2] + q + P * v
        out[..., 3] = v * U[..., 3] + 1.0 / theta
        out[..., 4] = v * U[..., 4] - v
        return out

    def dissipation_matrix(U):
        theta, _, _, _ = _closures(params, U)
        M = np.zeros(U.shape[:-1] + (2, 2))
        M[..., 0, 0] = 1.0 / (lam * theta ** 2)
        M[..., 1, 1] = theta / kap
        return M

    def admissible(U):
        rho = U[..., 0]
        with np.errstate(all="ignore"):
            u = U[..., 2] / rho - 0.5 * (U[..., 1] / rho) ** 2
        return np.isfinite(U).all(axis=-1) & (rho > 0) & (u > 0)

    def source_decay_rates(U):
        # d(rho w)/dt = q/(theta^2 lam) = -(rho w)/(a0 lam theta^2)
        # d(rho C)/dt = tau/kap       = -theta (rho C)/(a1 kap)
        theta, _, _, _ = _closures(params, U)
        rates = np.empty(U.shape[:-1] + (2,))
        rates[..., 0] = 1.0 / (a0 * lam * theta ** 2)
        rates[..., 1] = theta / (a1 * kap)
        return rates

    def derived(U):
        theta, pi, q, tau = _closures(params, U)
        sigma = q ** 2 / (lam * theta ** 2) + tau ** 2 / (theta * kap)
        return {"theta": theta, "q": q, "tau": tau, "sigma": sigma}

    def from_sample(sample):
        sample = np.asarray(sample, dtype=float)
        return conserved_from_primitive(sample[..., 0], sample[..., 1],
                                        sample[..., 2], sample[..., 3],
                                        sample[..., 4])

    # sample box in primitive coordinates (rho, v, u, w, C)
    box = np.array([(0.5, 2.0), (-1.0, 1.0), (0.5, 2.0),
                    (-0.3, 0.3), (-0.3, 0.3)])
    return CdfModel(
        name="fluid",
        n_conserved=3,
        n_dissipative=2,
        space_dim=1,
        flux=flux,
        entropy=entropy,
        dissipation_matrix=dissipation_matrix,
        admissible=admissible,
        entropy_grad=entropy_grad,
        source_decay_rates=source_decay_rates,
        sample_box=box,
        from_sample=from_sample,
        derived=derived,
    )


def orthogonal_decompose(A):
    """Spherical and deviatoric-symmetric parts of a 3x3 matrix.

    bullet = (1/3) Tr(A) I,  ring = sym(A) - bullet; the two are orthogonal
    under double contraction.
    """
    A = np.asarray(A, dtype=float)
    bullet = (np.trace(A) / 3.0) * np.eye(3)
    ring = 0.5 * (A + A.T) - bullet
    return bullet, ring


@dataclass(frozen=True)
class PowerLawParams:
    mu0: float
    alpha: float

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError("mu0 must be > 0")
        if self.alpha >= 1.0:
            raise ValueError("alpha must be < 1 for a well-posed "
                             "stationary stress")


def powerlaw_stress(p: PowerLawParams, gamma_dot: float) -> float:
    """Closed-form power-law stress tau = -mu0^n |g|^(n-1) g, n = 1/(1-alpha)."""
    n = 1.0 / (1.0 - p.alpha)
    g = float(gamma_dot)
    if g == 0.0:
        return 0.0
    return -(p.mu0 ** n) * abs(g) ** (n - 1.0) * g


def powerlaw_stress_fixed_point(p: PowerLawParams, gamma_dot: float,
                                rel_tol: float = 1e-13) -> float:
    """Independent route: bisection on the implicit relation
    |tau| = mu0 |tau|^alpha |gamma_dot|."""
    g = abs(float(gamma_dot))
    if g == 0.0:
        return 0.0

    def f(T):
        return T - p.mu0 * T ** p.alpha * g

    lo, hi = 1e-30, 1.0
    while f(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError("bisection bracket blew up")
    while f(lo) >= 0.0:
        lo *= 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * hi:
            break
    T = 0.5 * (lo + hi)
    return -T if gamma_dot > 0 else T


def fns_limit_fluxes(params: FluidParams, grad_theta, grad_v):
    """Fourier-Newton-Stokes stationary fluxes: q = -lambda d(theta)/dx,
    tau = -kappa dv/dx (single merged 1D viscosity)."""
    q = -params.lambda_ * np.asarray(grad_theta, dtype=float)
    tau = -params.kappa_ * np.asarray(grad_v, dtype=float)
    return q, tau


@dataclass(frozen=True)
class MaxwellGradients:
    """Time/space derivative estimates for the relaxation-law residuals."""
    dq_dt: float = 0.0
    d_vq_dx: float = 0.0
    dtheta_inv_dx: float = 0.0
    dthetainv_tau_dt: float = 0.0
    d_vthetainv_tau_dx: float = 0.0
    dv_dx: float = 0.0


def maxwell_relaxation_residual(params: FluidParams, state,
                                grads: MaxwellGradients) -> np.ndarray:
    """Residuals of the Maxwell relaxation laws

        alpha0 [dq/dt + d(vq)/dx] - d(theta^-1)/dx + q/(theta^2 lambda)
        alpha1 [d(theta^-1 tau)/dt + d(v theta^-1 tau)/dx] + dv/dx + tau/kappa

    which vanish on exact solutions of the density-form system.
    """
    U = np.asarray(state, dtype=float) if not hasattr(state, "data") \
        else state.data
    theta, _, q, tau = _closures(params, U)
    r0 = (params.alpha0 * (grads.dq_dt + grads.d_vq_dx)
          - grads.dtheta_inv_dx + q / (theta ** 2 * params.lambda_))
    r1 = (params.alpha1 * (grads.dthetainv_tau_dt + grads.d_vthetainv_tau_dx)
          + grads.dv_dx + tau / params.kappa_)
    return np.array([r0, r1])
