"""Action functional I = E - c*P on the torus: values, gradients, certificates.

E is the Ginzburg-Landau energy, P the first momentum component. Critical
points of I at speed c are exactly the T-periodic traveling-wave profiles
solving  i*c*d_x1 psi + Lap psi + (1 - |psi|^2) psi = 0.  The gradient here is
the L2 gradient, so its norm is directly the residual of that equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import (
    ComplexField,
    InconsistentWinding,
    VortexPresent,
    l2_norm,
    lift,
)


@dataclass(frozen=True)
class Params:
    """Wave speed and tolerances shared across operations.

    dealias enables 2/3-rule truncation of the cubic term; off by default
    since solutions are smooth and aliasing sits below solver tolerance at
    the recommended resolutions.
    """

    c: float
    grad_tol: float = 1e-8
    cert_tol: float = 1e-6
    dealias: bool = False

    def __post_init__(self):
        if self.c < 0:
            raise ValueError(f"wave speed must be >= 0, got {self.c}")
        if not (self.grad_tol > 0 and self.cert_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class ActionReport:
    """Energy split, momentum and action of one field at one speed."""

    kinetic: float
    potential: float
    momentum: float
    speed: float
    action: float

    @classmethod
    def assemble(cls, kinetic, potential, momentum, speed) -> "ActionReport":
        return cls(kinetic, potential, momentum, speed,
                   kinetic + potential - speed * momentum)


@dataclass(frozen=True)
class Certificate:
    """Solution certificates: gradient residual, the integrated equation
    int (1-|f|^2) f, and the lifted identity when a lifting exists."""

    residual: float
    integral: complex
    lift_identity: float | None
    windings: tuple[int, ...] | None
    note: str = ""

    @property
    def lifted(self) -> bool:
        return self.lift_identity is not None


def _spectral(values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values) / values.size


def _truncate(grid, values: np.ndarray) -> np.ndarray:
    spec = np.fft.fftn(values)
    spec[~grid.dealias_mask] = 0.0
    return np.fft.ifftn(spec)


def energy(f: ComplexField, dealias: bool = False) -> tuple[float, float]:
    """Kinetic and potential parts, (1/2)int|grad f|^2 and (1/4)int(1-|f|^2)^2."""
    f._require("physical")
    grid = f.grid
    spec = _spectral(f.values)
    kinetic = 0.5 * grid.cell_volume * float(
        np.sum(grid.laplacian_symbol * (spec.real**2 + spec.imag**2))
    )
    v = _truncate(grid, f.values) if dealias else f.values
    dens = 1.0 - (v.real**2 + v.imag**2)
    potential = 0.25 * grid.quad_weight * float(np.sum(dens**2))
    return kinetic, potential


def momentum(f: ComplexField) -> float:
    """First momentum component P = (1/2) int (i d_x1 f) . f."""
    f._require("physical")
    grid = f.grid
    spec = _spectral(f.values)
    xi1 = grid.deriv_symbols[0]
    return -0.5 * grid.cell_volume * float(np.sum(xi1 * (spec.real**2 + spec.imag**2)))


def action(f: ComplexField, p: Params) -> ActionReport:
    kin, pot = energy(f, dealias=p.dealias)
    return ActionReport.assemble(kin, pot, momentum(f), p.c)


def gradient(f: ComplexField, p: Params) -> ComplexField:
    """L2 gradient of the action: -Lap f - c*i*d_x1 f - (1-|f|^2) f.

    This is the negative left-hand side of the traveling-wave equation, so
    l2_norm(gradient) is the equation residual.
    """
    f._require("physical")
    grid = f.grid
    v = f.values
    spec = np.fft.fftn(v)
    neg_lap = np.fft.ifftn(grid.laplacian_symbol * spec)
    d1 = np.fft.ifftn(1j * grid.deriv_symbols[0] * spec)
    if p.dealias:
        vt = _truncate(grid, v)
        nl = _truncate(grid, (1.0 - (vt.real**2 + vt.imag**2)) * vt)
    else:
        nl = (1.0 - (v.real**2 + v.imag**2)) * v
    return f.with_values(neg_lap - p.c * 1j * d1 - nl)


def hessian_apply(base: ComplexField, direction: ComplexField, p: Params) -> ComplexField:
    """Second variation of the action at `base` applied to `direction`:

        H[phi] = -Lap phi - c*i*d_x1 phi - (1-|psi|^2) phi + 2 (psi.phi) psi

    with the pointwise real pairing psi.phi = Re(psi)Re(phi) + Im(psi)Im(phi).
    Symmetric with respect to the L2 pairing.
    """
    if base.grid != direction.grid:
        from .field import GridMismatch

        raise GridMismatch("hessian_apply needs base and direction on one grid")
    base._require("physical")
    direction._require("physical")
    grid = base.grid
    u = direction.values
    spec = np.fft.fftn(u)
    neg_lap = np.fft.ifftn(grid.laplacian_symbol * spec)
    d1 = np.fft.ifftn(1j * grid.deriv_symbols[0] * spec)
    if p.dealias:
        psi = _truncate(grid, base.values)
        ut = _truncate(grid, u)
        pairing = psi.real * ut.real + psi.imag * ut.imag
        nl = _truncate(
            grid,
            -(1.0 - (psi.real**2 + psi.imag**2)) * ut + 2.0 * pairing * psi,
        )
    else:
        psi = base.values
        pairing = psi.real * u.real + psi.imag * u.imag
        nl = -(1.0 - (psi.real**2 + psi.imag**2)) * u + 2.0 * pairing * psi
    return base.with_values(neg_lap - p.c * 1j * d1 + nl)


def _deriv_real(grid, arr: np.ndarray, axis: int) -> np.ndarray:
    spec = np.fft.fftn(arr)
    return np.fft.ifftn(1j * grid.deriv_symbols[axis] * spec).real


def certify(f: ComplexField, p: Params) -> Certificate:
    """Certificates that must vanish at solutions.

    * residual: L2 norm of the action gradient.
    * integral: int (1-|f|^2) f, from integrating the equation over the cell.
    * lift_identity: int |grad rho|^2 + rho^2 |grad theta|^2
      + c rho^2 d_x1 theta - (1-rho^2) rho^2, evaluated when a lifting
      exists. For zero-winding fields the speed term equals the usual
      c (rho^2 - 1) d_x1 theta form since int d_x1 theta = 0.
    """
    f._require("physical")
    grid = f.grid
    residual = l2_norm(gradient(f, p))
    v = f.values
    mod2 = v.real**2 + v.imag**2
    integral = complex(np.sum((1.0 - mod2) * v)) * grid.quad_weight
    try:
        lifted = lift(f)
    except (VortexPresent, InconsistentWinding) as exc:
        return Certificate(residual, integral, None, None,
                           note=f"vortexful; lifted identity skipped ({exc})")
    rho = lifted.rho
    theta_p = lifted.theta_periodic()
    grad_rho2 = np.zeros_like(rho)
    grad_theta2 = np.zeros_like(rho)
    dtheta1 = None
    for ax in range(grid.dim):
        dr = _deriv_real(grid, rho, ax)
        dt = _deriv_real(grid, theta_p, ax) + 2.0 * np.pi * lifted.windings[ax] / grid.period
        grad_rho2 += dr**2
        grad_theta2 += dt**2
        if ax == 0:
            dtheta1 = dt
    rho2 = rho**2
    integrand = grad_rho2 + rho2 * grad_theta2 + p.c * rho2 * dtheta1 - (1.0 - rho2) * rho2
    value = float(np.sum(integrand)) * grid.quad_weight
    return Certificate(residual, integral, value, lifted.windings)


CSV_COLUMNS = (
    "T", "c", "kinetic", "potential", "momentum", "action",
    "residual", "cert_integral_re", "cert_integral_im", "cert_lift",
)


def certificate_csv_header() -> str:
    return ",".join(CSV_COLUMNS)


def certificate_csv_row(grid, p: Params, report: ActionReport, cert: Certificate) -> str:
    lift_val = cert.lift_identity if cert.lifted else float("nan")
    fields = (
        grid.period, p.c, report.kinetic, report.potential, report.momentum,
        report.action, cert.residual, cert.integral.real, cert.integral.imag,
        lift_val,
    )
    return ",".join(f"{x:.17g}" for x in fields)
