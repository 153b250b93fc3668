"""Action descent to critical points and their classification.

The optimizer is nonlinear conjugate gradient (Polak-Ribiere with restarts)
with a backtracking Armijo line search, optionally preconditioned by the
inverse Helmholtz operator (1 - Lap)^(-1) in spectral space. Accepted steps
never increase the action, so descent started below the zero action level of
the modulus-one constants can only end at a nonconstant critical point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .ansatz import fitted_vortex_ansatz, vortex_test_function
from .field import ComplexField, TorusGrid, axis_windings, lift
from .field import VortexPresent, InconsistentWinding
from .functionals import ActionReport, Certificate, Params, action, certify

ZERO_CONSTANT = "ZeroConstant"
UNIT_CONSTANT = "UnitConstant"
PLANE_WAVE = "PlaneWave"
VORTEXFUL = "Vortexful"
OTHER_NONCONSTANT = "OtherNonconstant"

CONSTANT_CLASSES = (ZERO_CONSTANT, UNIT_CONSTANT)


class NonFiniteValue(RuntimeError):
    """The iterate left the finite floating-point range."""


@dataclass
class MinimizeOptions:
    """Knobs for minimize_action.

    grad_tol of None means the volume-scaled default 1e-8 * T^(N/2).
    """

    max_iters: int = 50000
    grad_tol: float | None = None
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 40
    restart_every: int = 100
    precondition: bool = True
    exact_line_search: bool = True
    class_tol: float = 1e-6
    log_stream: TextIO | None = None
    log_every: int = 100

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if not (self.step0 > 0 and 0 < self.armijo < 1):
            raise ValueError("bad line search parameters")


@dataclass(frozen=True)
class CriticalPoint:
    """A converged (or best-so-far) field with its diagnostics."""

    field: ComplexField
    report: ActionReport
    residual: float
    classification: str
    windings: tuple[int, ...] | None
    certificate: Certificate
    converged: bool
    iterations: int


def default_grad_tol(grid: TorusGrid) -> float:
    """Residual target 1e-8 * T^(N/2); the L2 residual scales like sqrt(volume)."""
    return 1e-8 * grid.period ** (grid.dim / 2.0)


class _Engine:
    """Raw-array action/gradient evaluations with cached Fourier symbols."""

    def __init__(self, grid: TorusGrid, p: Params):
        self.grid = grid
        self.c = p.c
        self.dealias = p.dealias
        self.lap = grid.laplacian_symbol
        self.xi1 = grid.deriv_symbols[0]
        self.weight = grid.quad_weight
        self.volume = grid.cell_volume
        self.helmholtz = grid.helmholtz_symbol
        self.mask = grid.dealias_mask if p.dealias else None

    def action(self, v: np.ndarray) -> float:
        # overflow deliberately saturates to inf; callers treat a non-finite
        # value as a rejected trial or raise NonFiniteValue
        with np.errstate(over="ignore", invalid="ignore"):
            spec = np.fft.fftn(v) / v.size
            p2 = spec.real**2 + spec.imag**2
            kinetic = 0.5 * self.volume * float(np.sum(self.lap * p2))
            mom = -0.5 * self.volume * float(np.sum(self.xi1 * p2))
            if self.mask is not None:
                spec[~self.mask] = 0.0
                vt = np.fft.ifftn(spec * v.size)
            else:
                vt = v
            dens = 1.0 - (vt.real**2 + vt.imag**2)
            potential = 0.25 * self.weight * float(np.sum(dens**2))
            return kinetic + potential - self.c * mom

    def gradient(self, v: np.ndarray) -> np.ndarray:
        # -Lap and -c*i*d1 merge into one real multiplier: |xi|^2 + c*xi1
        spec = np.fft.fftn(v)
        out = np.fft.ifftn((self.lap + self.c * self.xi1) * spec)
        if self.mask is not None:
            st = spec.copy()
            st[~self.mask] = 0.0
            vt = np.fft.ifftn(st)
            nl = (1.0 - (vt.real**2 + vt.imag**2)) * vt
            nls = np.fft.fftn(nl)
            nls[~self.mask] = 0.0
            nl = np.fft.ifftn(nls)
        else:
            nl = (1.0 - (v.real**2 + v.imag**2)) * v
        return out - nl

    def precondition(self, g: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(np.fft.fftn(g) / self.helmholtz)

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.vdot(a, b).real) * self.weight

    def ray_coefficients(self, f: np.ndarray, d: np.ndarray) -> np.ndarray:
        """Coefficients p (degree 0..4) of the quartic alpha -> I(f + alpha d).

        The quadratic part comes from the kinetic/momentum symbols, the
        quartic part from the pointwise Ginzburg-Landau density. With
        dealiasing on, f and d are truncated first, which keeps the
        polynomial consistent with action().
        """
        fs = np.fft.fftn(f) / f.size
        ds = np.fft.fftn(d) / d.size
        quad_sym = 0.5 * self.lap + 0.5 * self.c * self.xi1
        k0 = self.volume * float(np.sum(quad_sym * (fs.real**2 + fs.imag**2)))
        k1 = 2.0 * self.volume * float(np.sum(quad_sym * (fs.real * ds.real + fs.imag * ds.imag)))
        k2 = self.volume * float(np.sum(quad_sym * (ds.real**2 + ds.imag**2)))
        if self.mask is not None:
            fs[~self.mask] = 0.0
            ds[~self.mask] = 0.0
            f = np.fft.ifftn(fs * f.size)
            d = np.fft.ifftn(ds * d.size)
        a = 1.0 - (f.real**2 + f.imag**2)
        b = 2.0 * (f.real * d.real + f.imag * d.imag)
        cc = d.real**2 + d.imag**2
        w4 = 0.25 * self.weight
        p = np.array([
            k0 + w4 * float(np.sum(a * a)),
            k1 - w4 * 2.0 * float(np.sum(a * b)),
            k2 + w4 * float(np.sum(b * b - 2.0 * a * cc)),
            w4 * 2.0 * float(np.sum(b * cc)),
            w4 * float(np.sum(cc * cc)),
        ])
        return p

    @staticmethod
    def ray_minimum(p: np.ndarray) -> float | None:
        """argmin over alpha > 0 of the quartic with coefficients p, or None."""
        dp = np.array([p[1], 2.0 * p[2], 3.0 * p[3], 4.0 * p[4]])
        if abs(dp[-1]) < 1e-300:
            return None
        roots = np.roots(dp[::-1])
        best, best_val = None, p[0]
        for r in roots:
            if abs(r.imag) > 1e-10 * (1.0 + abs(r.real)) or r.real <= 0:
                continue
            alpha = float(r.real)
            val = float(np.polyval(p[::-1], alpha))
            if val < best_val:
                best, best_val = alpha, val
        return best


def minimize_action(init: ComplexField, p: Params, opts: MinimizeOptions | None = None) -> CriticalPoint:
    """Descend the action from `init` until the L2 residual meets grad_tol.

    Returns the converged critical point, or the best iterate with
    converged=False after max_iters. Accepted steps are monotone in the
    action. Raises NonFiniteValue if the action or gradient overflows at an
    accepted iterate.
    """
    opts = opts or MinimizeOptions()
    grid = init.grid
    tol = opts.grad_tol if opts.grad_tol is not None else default_grad_tol(grid)
    eng = _Engine(grid, p)
    log = opts.log_stream

    f = init.values.copy()
    val = eng.action(f)
    if not np.isfinite(val):
        raise NonFiniteValue(f"action not finite at the initial field ({val})")
    g = eng.gradient(f)
    res = np.sqrt(eng.dot(g, g))
    z = eng.precondition(g) if opts.precondition else g
    gz = eng.dot(g, z)
    d = -z
    step = opts.step0
    iters = 0
    converged = res <= tol
    steepest = True

    def search(direction, slope):
        """One line search along `direction`; returns (alpha, value) or None.

        Tries the exact minimizer of the quartic ray restriction first, then
        falls back to backtracking with the Armijo test.
        """
        if opts.exact_line_search:
            alpha = eng.ray_minimum(eng.ray_coefficients(f, direction))
            if alpha is not None:
                tv = eng.action(f + alpha * direction)
                if np.isfinite(tv) and tv <= val + 1e-14 * (1.0 + abs(val)):
                    return alpha, tv
        alpha = step
        for _ in range(opts.max_backtracks):
            tv = eng.action(f + alpha * direction)
            if np.isfinite(tv) and tv <= val + opts.armijo * alpha * slope:
                return alpha, tv
            alpha *= opts.backtrack
        return None

    while not converged and iters < opts.max_iters:
        slope = eng.dot(g, d)
        if slope >= 0:
            d, slope, steepest = -z, -gz, True
        hit = search(d, slope)
        if hit is None and not steepest:
            d, slope, steepest = -z, -gz, True
            hit = search(d, slope)
        if hit is None:
            break  # no descent possible at rounding level
        alpha, val = hit
        f = f + alpha * d
        if not np.all(np.isfinite(f.view(np.float64))):
            raise NonFiniteValue("iterate left the finite range")
        g_new = eng.gradient(f)
        res = np.sqrt(eng.dot(g_new, g_new))
        z_new = eng.precondition(g_new) if opts.precondition else g_new
        gz_new = eng.dot(g_new, z_new)
        iters += 1
        if log is not None and (iters % opts.log_every == 0 or res <= tol):
            log.write(f"{iters} {val:.17g} {res:.17g}\n")
        if res <= tol:
            converged = True
            break
        # Preconditioned Polak-Ribiere with nonnegativity restart.
        beta = eng.dot(g_new - g, z_new) / gz if gz > 0 else 0.0
        beta = max(beta, 0.0)
        if iters % opts.restart_every == 0:
            beta = 0.0
        d = -z_new + beta * d
        steepest = beta == 0.0
        g, z, gz = g_new, z_new, gz_new
        step = min(max(2.0 * alpha, 1e-10), 1e6)

    final = ComplexField(grid, f)
    return _finalize(final, p, opts, converged, iters)


def _finalize(field: ComplexField, p: Params, opts: MinimizeOptions,
              converged: bool, iters: int) -> CriticalPoint:
    rep = action(field, p)
    cert = certify(field, p)
    cls = classify(field, opts.class_tol)
    return CriticalPoint(
        field=field,
        report=rep,
        residual=cert.residual,
        classification=cls,
        windings=cert.windings,
        certificate=cert,
        converged=converged,
        iterations=iters,
    )


def classify(f: ComplexField, class_tol: float = 1e-6) -> str:
    """Bucket a field by its constancy structure.

    Order of the tie-breaking tests: ZeroConstant, UnitConstant, PlaneWave,
    Vortexful, OtherNonconstant.
    """
    if not class_tol > 0:
        raise ValueError("class_tol must be positive")
    v = f.values
    mod = np.abs(v)
    if float(mod.max()) <= class_tol:
        return ZERO_CONSTANT
    mean = v.mean()
    if float(np.abs(v - mean).max()) <= class_tol and float(np.abs(mod - 1.0).max()) <= class_tol:
        return UNIT_CONSTANT
    mod_variation = float(mod.max() - mod.min())
    if mod_variation <= class_tol:
        windings, dev = axis_windings(f)
        if dev <= 1e-3 and any(windings):
            return PLANE_WAVE
    try:
        lift(f)
    except (VortexPresent, InconsistentWinding):
        return VORTEXFUL
    return OTHER_NONCONSTANT


def minimizer_experiment(c: float, T: float, resolution: int, R: float,
                         init: ComplexField | None = None,
                         opts: MinimizeOptions | None = None,
                         dim: int = 2) -> tuple[CriticalPoint, dict]:
    """Minimize from the vortex test function 1 + w_R (or a caller-supplied
    init) and summarize the outcome as a CSV-ready row."""
    grid = TorusGrid((resolution,) * dim, T)
    p = Params(c=c)
    if init is None:
        ans = fitted_vortex_ansatz(R, T)
        init = vortex_test_function(ans, grid)
    elif init.grid != grid:
        raise ValueError("init field lives on a different grid")
    point = minimize_action(init, p, opts)
    row = {
        "c": c,
        "T": T,
        "action": point.report.action,
        "residual": point.residual,
        "classification": point.classification,
    }
    return point, row
