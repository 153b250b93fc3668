"""Min-max saddle search: relax paths from 1 to 1 + w_R, then refine the
max-action node to a critical point.

The path functional gamma = inf over paths of the max action along the path
is estimated by the string method: interior nodes take preconditioned
descent steps, then the path is reparametrized to uniform L2 arclength.
Endpoints stay fixed. The max node is refined by minimizing the squared
gradient norm, whose own gradient is the Hessian applied to the gradient,
and a negative-direction witness certifies the saddle index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ansatz import VortexAnsatz, fitted_vortex_ansatz, vortex_test_function
from .field import ComplexField, TorusGrid, l2_product
from .functionals import Params, action, hessian_apply
from .minimize import CriticalPoint, MinimizeOptions, _Engine, _finalize, default_grad_tol
from .spectrum import _lanczos_pass, hessian_operator, _unflatten


class StalledPath(RuntimeError):
    """Relaxation stopped making progress; carries the current path and gamma."""

    def __init__(self, message, path=None, gamma=None):
        super().__init__(message)
        self.path = path
        self.gamma = gamma


class NotASaddle(RuntimeError):
    """The refined point has no negative Hessian direction."""


@dataclass(frozen=True)
class Path:
    """Ordered fields joining two fixed endpoints on one grid."""

    nodes: tuple[ComplexField, ...]

    def __post_init__(self):
        nodes = tuple(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if len(nodes) < 3:
            raise ValueError("a path needs at least 3 nodes")
        grid = nodes[0].grid
        if any(n.grid != grid for n in nodes):
            raise ValueError("path nodes must share one grid")

    @property
    def grid(self) -> TorusGrid:
        return self.nodes[0].grid

    def actions(self, p: Params) -> np.ndarray:
        return np.array([action(n, p).action for n in self.nodes])


@dataclass
class RelaxOptions:
    """String-method knobs: per-node descent steps, sweep budget, stall test."""

    sweeps: int = 60
    node_steps: int = 2
    step0: float = 0.5
    rel_tol: float = 1e-4
    patience: int = 8
    precondition: bool = True

    def __post_init__(self):
        if self.sweeps < 1 or self.node_steps < 1 or self.patience < 1:
            raise ValueError("sweeps, node_steps and patience must be >= 1")


@dataclass(frozen=True)
class SaddleResult:
    saddle: CriticalPoint
    gamma: float
    upper_bound: float
    index_witness: ComplexField
    witness_value: float


def init_path(grid: TorusGrid, R: float, node_count: int = 33,
              ansatz: VortexAnsatz | None = None) -> Path:
    """The straight path 1 + t*w_R at uniform t in [0, 1]."""
    if node_count < 3:
        raise ValueError("node_count must be >= 3")
    if ansatz is None:
        ansatz = fitted_vortex_ansatz(R, grid.period)
    top = vortex_test_function(ansatz, grid)
    w = top.values - 1.0
    nodes = []
    for t in np.linspace(0.0, 1.0, node_count):
        nodes.append(ComplexField(grid, 1.0 + t * w))
    return Path(tuple(nodes))


def _reparametrize(values: list[np.ndarray], weight: float) -> list[np.ndarray]:
    """Linear interpolation onto uniform L2 arclength; endpoints untouched."""
    count = len(values)
    seg = np.array([
        np.linalg.norm(values[i + 1] - values[i]) for i in range(count - 1)
    ]) * np.sqrt(weight)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0:
        return values
    targets = np.linspace(0.0, total, count)
    out = [values[0]]
    for i in range(1, count - 1):
        s = targets[i]
        j = min(int(np.searchsorted(cum, s, side="right")) - 1, count - 2)
        span = cum[j + 1] - cum[j]
        t = 0.0 if span <= 0 else (s - cum[j]) / span
        out.append((1.0 - t) * values[j] + t * values[j + 1])
    out.append(values[-1])
    return out


def relax_path(path: Path, p: Params, opts: RelaxOptions | None = None) -> tuple[Path, float]:
    """String-method relaxation of the interior nodes.

    Returns (relaxed path, gamma estimate). gamma never increases across
    accepted sweeps; a sweep that would raise it is rejected and retried with
    a smaller step. Raises StalledPath (with the current state attached) when
    gamma stops improving by rel_tol over `patience` sweeps before the sweep
    budget runs out.
    """
    opts = opts or RelaxOptions()
    grid = path.grid
    eng = _Engine(grid, p)
    nodes = [n.values.copy() for n in path.nodes]
    endpoints = (path.nodes[0], path.nodes[-1])

    def gamma_of(vals):
        return max(eng.action(v) for v in vals)

    gamma = gamma_of(nodes)
    step_scale = opts.step0
    stall = 0
    for _ in range(opts.sweeps):
        trial = [v.copy() for v in nodes]
        for i in range(1, len(trial) - 1):
            v = trial[i]
            for _ in range(opts.node_steps):
                g = eng.gradient(v)
                z = eng.precondition(g) if opts.precondition else g
                znorm = np.sqrt(eng.dot(z, z))
                if znorm == 0.0:
                    break
                alpha = eng.ray_minimum(eng.ray_coefficients(v, -z))
                if alpha is None:
                    alpha = step_scale / max(znorm, 1.0)
                v = v - min(alpha, step_scale) * z
            trial[i] = v
        trial = _reparametrize(trial, grid.quad_weight)
        new_gamma = gamma_of(trial)
        if new_gamma <= gamma + 1e-14 * (1.0 + abs(gamma)):
            improved = gamma - new_gamma > opts.rel_tol * (1.0 + abs(gamma))
            nodes = trial
            gamma = min(gamma, new_gamma)
            stall = 0 if improved else stall + 1
        else:
            step_scale *= 0.5
            stall += 1
        if stall >= opts.patience:
            relaxed = Path((endpoints[0],)
                           + tuple(ComplexField(grid, v) for v in nodes[1:-1])
                           + (endpoints[1],))
            raise StalledPath(
                f"gamma stalled at {gamma:.6g} after {opts.patience} flat sweeps",
                path=relaxed, gamma=gamma,
            )
    relaxed = Path((endpoints[0],)
                   + tuple(ComplexField(grid, v) for v in nodes[1:-1])
                   + (endpoints[1],))
    return relaxed, gamma


@dataclass
class SaddleOptions:
    """Refinement knobs for the squared-residual descent and the witness."""

    max_iters: int = 20000
    grad_tol: float | None = None
    probe_count: int = 50
    witness_tol: float = 1e-8
    seed: int = 0
    precondition: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def _pick_max_node(path: Path, p: Params) -> int:
    acts = path.actions(p)
    top = float(acts.max())
    for i, a in enumerate(acts):
        if a >= top - 1e-12:
            return i
    return int(np.argmax(acts))


def find_saddle(path: Path, p: Params, opts: SaddleOptions | None = None,
                upper_bound: float | None = None) -> SaddleResult:
    """Refine the max-action node of a relaxed path to a critical point and
    certify its index.

    The refinement minimizes F = 0.5*||grad I||^2 by conjugate gradient with
    gradient H[g]; it stops when the action residual meets grad_tol. The
    index witness is the smallest-eigenvalue Hessian direction; when the
    quadratic form is nonnegative there and on a random probe set,
    NotASaddle is raised (the path collapsed to a minimizer).
    """
    opts = opts or SaddleOptions()
    grid = path.grid
    tol = opts.grad_tol if opts.grad_tol is not None else default_grad_tol(grid)
    eng = _Engine(grid, p)
    idx = _pick_max_node(path, p)
    gamma = float(path.actions(p).max())
    f = path.nodes[idx].values.copy()
    # The squared-residual objective carries the Hessian twice, so the
    # natural spectral metric is the squared Helmholtz symbol.
    pre_sym = eng.helmholtz**2

    def precond(v):
        return np.fft.ifftn(np.fft.fftn(v) / pre_sym)

    def fval_grad(v):
        g = eng.gradient(v)
        phi = ComplexField(grid, g)
        hg = hessian_apply(ComplexField(grid, v), phi, p).values
        return 0.5 * eng.dot(g, g), hg, g

    F, dF, g = fval_grad(f)
    res = np.sqrt(2.0 * F)
    z = precond(dF) if opts.precondition else dF
    gz = eng.dot(dF, z)
    d = -z
    step = 1.0
    iters = 0
    while res > tol and iters < opts.max_iters:
        slope = eng.dot(dF, d)
        if slope >= 0:
            d, slope = -z, -gz
        alpha = step
        hit = None
        for _ in range(60):
            trial = f + alpha * d
            tF, tdF, tg = fval_grad(trial)
            if np.isfinite(tF) and tF <= F + 1e-4 * alpha * slope:
                hit = (alpha, trial, tF, tdF, tg)
                break
            alpha *= 0.5
        if hit is None:
            if np.array_equal(d, -z):
                break
            d = -z
            continue
        alpha, f, F_new, dF_new, g = hit
        z_new = precond(dF_new) if opts.precondition else dF_new
        beta = max(eng.dot(dF_new - dF, z_new) / gz, 0.0) if gz > 0 else 0.0
        gz = eng.dot(dF_new, z_new)
        d = -z_new + beta * d
        z = z_new
        F, dF = F_new, dF_new
        res = np.sqrt(2.0 * F)
        iters += 1
        step = min(max(2.0 * alpha, 1e-12), 1e6)

    saddle_field = ComplexField(grid, f)
    mopts = MinimizeOptions(grad_tol=tol)
    point = _finalize(saddle_field, p, mopts, res <= tol, iters)

    # Index witness: an approximate smallest-eigenvalue direction. Only its
    # Rayleigh quotient matters (a negative value certifies the index), so a
    # loose Ritz residual target keeps this cheap on large grids.
    rng = np.random.default_rng(opts.seed)
    matvec = hessian_operator(saddle_field, p)
    vals, vecs, _ = _lanczos_pass(matvec, 2 * grid.node_count, 1, rng,
                                  tol=opts.witness_tol,
                                  max_dim=min(2 * grid.node_count, 500),
                                  res_target=1e-3)
    witness = ComplexField(grid, _unflatten(vecs[:, 0], grid))
    quad = l2_product(hessian_apply(saddle_field, witness, p), witness)
    norm2 = l2_product(witness, witness)
    witness_value = quad / norm2
    if witness_value >= 0:
        negative = False
        for _ in range(opts.probe_count):
            probe = rng.standard_normal(grid.sizes) + 1j * rng.standard_normal(grid.sizes)
            phi = ComplexField(grid, probe)
            if l2_product(hessian_apply(saddle_field, phi, p), phi) < 0:
                negative = True
                break
        if not negative:
            raise NotASaddle(
                f"Hessian form nonnegative at the refined point "
                f"(smallest eigenvalue {witness_value:.3e})"
            )
    bound = upper_bound if upper_bound is not None else gamma
    return SaddleResult(
        saddle=point,
        gamma=gamma,
        upper_bound=bound,
        index_witness=witness,
        witness_value=witness_value,
    )


def mountain_pass_pipeline(c: float, grid: TorusGrid, R: float,
                           node_count: int = 33,
                           ansatz: VortexAnsatz | None = None,
                           relax_opts: RelaxOptions | None = None,
                           saddle_opts: SaddleOptions | None = None):
    """init -> relax -> refine. Returns (SaddleResult, relaxed path, M).

    M is the max action over the straight initial path, the T-independent
    upper bound for gamma; relaxation stalls are treated as convergence.
    """
    p = Params(c=c)
    path = init_path(grid, R, node_count, ansatz)
    upper = float(path.actions(p).max())
    try:
        relaxed, gamma = relax_path(path, p, relax_opts)
    except StalledPath as stall:
        relaxed, gamma = stall.path, stall.gamma
    result = find_saddle(relaxed, p, saddle_opts, upper_bound=upper)
    result = SaddleResult(
        saddle=result.saddle,
        gamma=gamma,
        upper_bound=upper,
        index_witness=result.index_witness,
        witness_value=result.witness_value,
    )
    return result, relaxed, upper
