"""Conservation and second-law audits, limit studies, error norms.

Includes a small explicit reference solver for the limiting heat equation
so the relaxation-limit claims can be tested against an independent
discretization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import core, solver
from .core import CdfModel
from .fluid import FluidParams, primitive_from_conserved
from .heat import HeatParams, heat_model
from .solver import Grid1D, Scenario, Trajectory

POINTWISE_SIGMA_TOL = 1e-14
ENTROPY_STEP_TOL = 1e-10  # relative, absorbs roundoff accumulation


@dataclass
class ConservationReport:
    drift: np.ndarray                 # max relative drift per conserved var
    flux_accounting_error: np.ndarray  # |delta total - boundary inflow|, rel

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift))


def conservation_audit(traj: Trajectory) -> ConservationReport:
    """Drift of the conserved totals.

    For periodic runs the drift itself must vanish; for open boundaries the
    drift must be accounted for by the accumulated boundary fluxes.
    """
    totals = np.asarray(traj.totals)
    t0 = totals[0]
    # zero totals (e.g. momentum of a symmetric pulse) are scaled by the
    # largest conserved total so "relative" stays meaningful
    scale = np.maximum(np.abs(t0), max(np.max(np.abs(t0)), 1e-30))
    if traj.boundary == "periodic" or traj.boundary_inflow is None:
        drift = np.max(np.abs(totals - t0), axis=0) / scale
        accounting = drift.copy()
    else:
        drift = np.max(np.abs(totals - t0), axis=0) / scale
        accounting = np.abs((totals[-1] - t0) - traj.boundary_inflow) / scale
    return ConservationReport(drift=drift, flux_accounting_error=accounting)


@dataclass
class EntropyAudit:
    total_entropy: np.ndarray
    min_sigma: np.ndarray                    # per recorded step
    snapshot_min_sigma: np.ndarray           # recomputed per snapshot
    pointwise_violations: list = field(default_factory=list)
    monotonicity_violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.pointwise_violations and \
            not self.monotonicity_violations


def entropy_audit(traj: Trajectory, model: CdfModel,
                  sigma_tol: float = POINTWISE_SIGMA_TOL,
                  step_tol: float = ENTROPY_STEP_TOL) -> EntropyAudit:
    """Recompute sigma per cell per snapshot and check the second law."""
    snap_min = []
    pointwise = []
    for k, snap in enumerate(traj.snapshots):
        sig = core.entropy_production(model, snap)
        mn = float(np.min(sig))
        snap_min.append(mn)
        if mn < -sigma_tol:
            pointwise.append((k, mn))
    totals = np.asarray(traj.total_entropy)
    mono = []
    for k in range(1, len(totals)):
        dS = totals[k] - totals[k - 1]
        if dS < -step_tol * max(abs(totals[k - 1]), 1.0):
            mono.append((k, float(dS)))
    return EntropyAudit(total_entropy=totals,
                        min_sigma=np.asarray(traj.min_sigma),
                        snapshot_min_sigma=np.asarray(snap_min),
                        pointwise_violations=pointwise,
                        monotonicity_violations=mono)


def error_norms(field_a, field_b, grid: Grid1D):
    """Discrete (L1, L2, Linf) norms of the difference, weighted by dx."""
    a = np.asarray(field_a, dtype=float)
    b = np.asarray(field_b, dtype=float)
    d = np.abs(a - b)
    dx = grid.dx
    l1 = float(np.sum(d) * dx)
    l2 = float(np.sqrt(np.sum(d ** 2) * dx))
    linf = float(np.max(d))
    return l1, l2, linf


def reference_diffusion_solve(params: HeatParams, u0, grid: Grid1D,
                              t_end: float, boundary: str = "periodic",
                              safety: float = 0.4) -> np.ndarray:
    """Explicit central-difference solve of the Fourier-limit heat equation
    du/dt = (lambda/c_v) u_xx with dt <= safety dx^2 c_v / lambda."""
    D = params.lambda_ / params.c_v
    u = np.asarray(u0, dtype=float).copy()
    if t_end <= 0:
        return u
    dx = grid.dx
    dt_max = safety * dx ** 2 / D
    n_steps = max(1, int(np.ceil(t_end / dt_max)))
    dt = t_end / n_steps
    coeff = D * dt / dx ** 2
    for _ in range(n_steps):
        if boundary == "periodic":
            lap = np.roll(u, 1) - 2.0 * u + np.roll(u, -1)
        elif boundary == "zero-gradient":
            up = np.empty(u.size + 2)
            up[1:-1] = u
            up[0] = u[0]
            up[-1] = u[-1]
            lap = up[:-2] - 2.0 * u + up[2:]
        else:
            raise ValueError(f"unsupported boundary '{boundary}'")
        u = u + coeff * lap
    return u


@dataclass
class ConvergenceStudy:
    parameter_values: np.ndarray
    errors_l1: np.ndarray
    errors_l2: np.ndarray
    errors_linf: np.ndarray
    slope: float            # log-log fit of the L2 error
    monotone: bool
    inconclusive: bool

    def to_dict(self) -> dict:
        return {
            "parameter_values": [float(v) for v in self.parameter_values],
            "errors_l1": [float(v) for v in self.errors_l1],
            "errors_l2": [float(v) for v in self.errors_l2],
            "errors_linf": [float(v) for v in self.errors_linf],
            "slope": float(self.slope),
            "monotone": bool(self.monotone),
            "inconclusive": bool(self.inconclusive),
        }


def fit_loglog_slope(values, errors) -> float:
    values = np.asarray(values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if values.size < 3:
        raise ValueError("need at least 3 points for a slope fit")
    if np.any(errors <= 0):
        raise ValueError("errors must be positive for a log-log fit")
    return float(np.polyfit(np.log(values), np.log(errors), 1)[0])


def heat_sine_scenario(params: HeatParams, grid: Grid1D, t_end: float,
                       amplitude: float = 0.1, cfl: float = 0.45,
                       output_every: Optional[float] = None) -> Scenario:
    model = heat_model(params)

    def ic(x):
        return np.array([1.0 + amplitude * np.sin(2.0 * np.pi * x), 0.0])

    return Scenario(model=model, grid=grid, initial_condition=ic,
                    boundary="periodic", cfl=cfl, t_end=t_end,
                    output_every=output_every or t_end,
                    name="heat-sine")


def fluid_pulse_scenario(params: FluidParams, n_cells: int = 512,
                         t_end: float = 0.05, amplitude: float = 0.05,
                         cfl: float = 0.45,
                         output_every: Optional[float] = None) -> Scenario:
    """Smooth periodic temperature bump on a length-2 domain.

    The heat-flux conjugate starts on its stationary closure so the
    relaxation-limit flux comparison is not polluted by the initial layer;
    the stress conjugate starts at zero (so does the velocity).
    """
    from .fluid import fluid_model

    model = fluid_model(params)
    k = np.pi / 1.0  # one sine period over the length-2 domain

    def ic(x):
        u = 1.0 + amplitude * np.sin(k * x)
        q0 = -params.lambda_ * amplitude * k * np.cos(k * x) / params.c_v
        return np.array([1.0, 0.0, u, -params.alpha0 * q0, 0.0])

    return Scenario(model=model, grid=Grid1D(n_cells, 0.0, 2.0),
                    initial_condition=ic, boundary="periodic", cfl=cfl,
                    t_end=t_end, output_every=output_every or t_end,
                    name="fluid-pulse")


def relaxation_convergence(base: HeatParams, alpha0_values: Sequence[float],
                           grid: Grid1D, t_end: float,
                           amplitude: float = 0.1,
                           map_fn=map) -> ConvergenceStudy:
    """L2 distance between the relaxation solution and the diffusion limit
    as the relaxation parameter shrinks; fits the log-log rate.

    `map_fn` lets callers parallelize the sweep (e.g. an executor's map);
    results are consumed in submission order, so output stays deterministic.
    """
    alpha0_values = np.asarray(sorted(alpha0_values, reverse=True),
                               dtype=float)
    if alpha0_values.size < 3:
        raise ValueError("need at least 3 relaxation values")
    x = grid.centers()
    u0 = 1.0 + amplitude * np.sin(2.0 * np.pi * x)
    u_ref = reference_diffusion_solve(base, u0, grid, t_end)
    ref_l2 = float(np.sqrt(np.sum(u_ref ** 2) * grid.dx))

    scenarios = []
    for a0 in alpha0_values:
        p = HeatParams(c_v=base.c_v, lambda_=base.lambda_, alpha0=float(a0),
                       space_dim=1)
        scenarios.append(heat_sine_scenario(p, grid, t_end, amplitude))
    trajs = list(map_fn(solver.run, scenarios))

    e1, e2, einf = [], [], []
    for traj in trajs:
        u_num = traj.snapshots[-1][:, 0]
        l1, l2, linf = error_norms(u_num, u_ref, grid)
        e1.append(l1)
        e2.append(l2 / ref_l2)
        einf.append(linf)
    e2 = np.asarray(e2)
    monotone = bool(np.all(np.diff(e2) < 0))
    slope = fit_loglog_slope(alpha0_values, e2)
    return ConvergenceStudy(parameter_values=alpha0_values,
                            errors_l1=np.asarray(e1), errors_l2=e2,
                            errors_linf=np.asarray(einf), slope=slope,
                            monotone=monotone, inconclusive=not monotone)


@dataclass
class FnsComparison:
    """Pointwise gap between relaxed fluxes and their stationary closures,
    restricted to cells where the closure flux is significant."""
    q_max_rel_gap: float
    tau_max_rel_gap: float
    q_cells_checked: int
    tau_cells_checked: int


def fns_flux_comparison(params: FluidParams, snapshot: np.ndarray,
                        grid: Grid1D, threshold: float = 0.25
                        ) -> FnsComparison:
    """Compare the evolved (q, tau) against -lambda d(theta)/dx and
    -kappa dv/dx using periodic central gradients of the snapshot."""
    rho, v, u, w, C = primitive_from_conserved(snapshot)
    theta = u / params.c_v
    q = -rho * w / params.alpha0
    tau = -theta * rho * C / params.alpha1

    def grad(f):
        return (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * grid.dx)

    q_ref = -params.lambda_ * grad(theta)
    tau_ref = -params.kappa_ * grad(v)

    def masked_gap(val, ref):
        peak = np.max(np.abs(ref))
        if peak == 0.0:
            return 0.0, 0
        mask = np.abs(ref) >= threshold * peak
        if not np.any(mask):
            return 0.0, 0
        gap = np.abs(val[mask] - ref[mask]) / np.abs(ref[mask])
        return float(np.max(gap)), int(np.sum(mask))

    qg, qc = masked_gap(q, q_ref)
    tg, tc = masked_gap(tau, tau_ref)
    return FnsComparison(q_max_rel_gap=qg, tau_max_rel_gap=tg,
                         q_cells_checked=qc, tau_cells_checked=tc)
