"""Steady states, time evolution, spectra and the perturbative j-hopping analysis."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .analytic import dark_state_coefficients
from .errors import (AmbiguityError, ConvergenceError, DomainError, IntegrationError,
                     LayoutError, NumericalError, StiffnessError)
from .liouvillian import Liouvillian, _local_superop
from .spinspace import DickeSpace
from .state import POSITIVITY_FLOOR, DensityState

__all__ = ["DensityState", "Trajectory", "SpectralResult", "RateMatrix", "steady_state",
           "evolve", "spectrum", "jspace_rate_matrix", "is_block_diagonal"]

RTOL = float(os.environ.get("SPINSQUEEZE_RTOL", 1e-8))
ATOL = float(os.environ.get("SPINSQUEEZE_ATOL", 1e-10))
RESIDUAL_TOL = float(os.environ.get("SPINSQUEEZE_RESIDUAL_TOL", 1e-9))
TRACE_DRIFT_TOL = float(os.environ.get("SPINSQUEEZE_TRACE_DRIFT", 1e-7))
DENSE_LIMIT = 1500
REFINE_STEPS = 3
DARK_TOL = 1e-12
MAX_RHS_EVALS = int(os.environ.get("SPINSQUEEZE_MAX_RHS_EVALS", 5_000_000))


# --------------------------------------------------------------------------
# steady state

def is_block_diagonal(lv: Liouvillian) -> bool:
    """True if no matrix element couples different ``j`` blocks."""
    if lv.layout != "dicke" or len(lv.js) == 1:
        return True
    coo = lv.matrix.tocoo()
    offs = np.array(lv.offsets + [lv.size])
    return bool(np.all(np.searchsorted(offs, coo.row, "right")
                       == np.searchsorted(offs, coo.col, "right")))


def _null_vector_lu(mat: sp.spmatrix, row: np.ndarray, pivot: int) -> np.ndarray:
    a = mat.tolil(copy=True)
    a[pivot, :] = row
    b = np.zeros(mat.shape[0], dtype=complex)
    b[pivot] = 1.0
    a = a.tocsc()
    lu = spla.splu(a)
    x = lu.solve(b)
    for _ in range(REFINE_STEPS):
        x = x + lu.solve(b - a @ x)
    return x


def _null_vector_eig(mat: sp.spmatrix) -> np.ndarray:
    n = mat.shape[0]
    if n <= DENSE_LIMIT:
        vals, vecs = la.eig(mat.toarray())
        return vecs[:, int(np.argmin(np.abs(vals)))]
    vals, vecs = spla.eigs(mat.tocsc(), k=1, sigma=0.0, which="LM")
    return vecs[:, 0]


def _dark_vector(lv: Liouvillian) -> np.ndarray | None:
    """Pure zero mode from the kernel of the sole jump operator, if it exists.

    Far better conditioned than the superoperator null space at large squeezing.
    """
    if lv.single_jump is None or lv.layout != "dicke" or len(lv.js) != 1:
        return None
    jump = lv.single_jump[lv.js[0]]
    _, sv, vh = la.svd(jump)
    if sv[-1] > DARK_TOL * sv[0] or (sv.size > 1 and sv[-2] <= DARK_TOL * sv[0]):
        return None
    psi = vh[-1].conj()
    vec = np.outer(psi, psi.conj()).reshape(-1, order="F")
    norm = max(float(abs(lv.matrix).max()), 1e-300)
    if np.max(np.abs(lv.matrix @ vec)) > RESIDUAL_TOL * norm:
        return None
    return vec


def _solve_single(lv: Liouvillian) -> np.ndarray:
    """Null vector with unit trace of a superoperator with a unique zero mode."""
    dark = _dark_vector(lv)
    if dark is not None:
        return dark
    row = lv.trace_row()
    pivot = int(np.flatnonzero(row)[0])
    norm = max(float(abs(lv.matrix).max()), 1e-300)
    vec = None
    try:
        vec = _null_vector_lu(lv.matrix, row, pivot)
        if not np.all(np.isfinite(vec)):
            vec = None
    except RuntimeError:  # exactly singular factor
        vec = None
    if vec is None or np.max(np.abs(lv.matrix @ vec)) > RESIDUAL_TOL * norm * max(
            1.0, np.max(np.abs(vec))):
        vec = _null_vector_eig(lv.matrix)
    vec = vec / (row @ vec)
    res = float(np.max(np.abs(lv.matrix @ vec)))
    if res > RESIDUAL_TOL * norm:
        raise ConvergenceError(f"steady-state residual {res:.3e} exceeds "
                               f"{RESIDUAL_TOL:.0e} * |L| = {RESIDUAL_TOL * norm:.3e}")
    return vec


def positivity_floor(lv: Liouvillian) -> float:
    """Allowed negative eigenvalue: ``-1e-8``, widened to a few units of roundoff
    times the dynamic range ``|L|_max / rate scale`` for very stiff operators."""
    spread = float(abs(lv.matrix).max()) / max(lv.scale, 1e-300)
    return -max(-POSITIVITY_FLOOR, 4 * np.finfo(float).eps * spread)


def _finalize(state: DensityState, floor: float = POSITIVITY_FLOOR) -> DensityState:
    if state.layout == "dicke":
        blocks = {j: (m + m.conj().T) / 2 for j, m in state.blocks.items()}
        tr = sum(np.trace(m) for m in blocks.values())
        blocks = {j: m / tr for j, m in blocks.items()}
        out = DensityState(layout="dicke", n_spins=state.n_spins, blocks=blocks)
    else:
        m = (state.matrix + state.matrix.conj().T) / 2
        m = m / np.trace(m)
        out = DensityState(layout=state.layout, n_spins=state.n_spins, matrix=m,
                           fock_dim=state.fock_dim, spin_j=state.spin_j)
    return out.check(floor)


def steady_state(lv: Liouvillian, block: float | None = None,
                 initial: DensityState | None = None) -> DensityState:
    """Unit-trace fixed point of ``lv``.

    A block-diagonal Dicke operator over several ``j`` has one zero mode per
    block; then ``block`` (all weight in one ``j``) or ``initial`` (weights
    taken from its conserved block populations) selects the fixed point.
    """
    if lv.layout == "dicke" and len(lv.js) > 1 and is_block_diagonal(lv):
        if block is not None:
            weights = {float(block): 1.0}
        elif initial is not None:
            weights = {j: w for j, w in initial.block_traces().items() if abs(w) > 0}
        else:
            raise AmbiguityError(f"{len(lv.js)} zero modes (one per j block); "
                                 "pass block= or initial=")
        blocks = {}
        for j in lv.js:
            d = round(2 * j) + 1
            if j in weights:
                sub = lv.restrict(j)
                blocks[j] = weights[j] * sub.from_vector(_solve_single(sub)).blocks[j]
            else:
                blocks[j] = np.zeros((d, d), dtype=complex)
        return _finalize(DensityState(layout="dicke", n_spins=lv.n_spins, blocks=blocks),
                         positivity_floor(lv))
    if block is not None and lv.layout == "dicke" and len(lv.js) == 1 and block != lv.js[0]:
        raise DomainError(f"block {block} not present in the operator")
    return _finalize(lv.from_vector(_solve_single(lv)), positivity_floor(lv))


def steady_residual(lv: Liouvillian, state: DensityState) -> float:
    return float(np.max(np.abs(lv.matrix @ lv.to_vector(state))))


# --------------------------------------------------------------------------
# time evolution

@dataclass
class Trajectory:
    times: np.ndarray
    states: list = field(default_factory=list, repr=False)
    observables: dict = field(default_factory=dict)
    steps: int = 0
    rejected: int = 0
    rhs_evals: int = 0
    max_trace_drift: float = 0.0

    def observable(self, name: str) -> np.ndarray:
        return np.asarray(self.observables[name])


class _Budget(Exception):
    pass


def evolve(lv: Liouvillian, rho0: DensityState, t_grid, rtol: float = RTOL,
           atol: float = ATOL, method: str = "RK45",
           observables: dict[str, Callable[[DensityState], float]] | None = None,
           store_states: bool = True, max_rhs_evals: int = MAX_RHS_EVALS) -> Trajectory:
    """Integrate ``d vec(rho)/dt = L vec(rho)`` and sample on ``t_grid``.

    ``method`` is any :func:`scipy.integrate.solve_ivp` method; the default is
    the embedded Dormand-Prince 5(4) pair. Use ``"BDF"`` for stiff runs.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) <= 0):
        raise DomainError("t_grid must be a strictly increasing 1-D sequence")
    if rho0.layout != lv.layout:
        raise LayoutError(f"state layout {rho0.layout} vs operator {lv.layout}")
    y0 = lv.to_vector(rho0)
    mat = lv.matrix.tocsr()
    row = lv.trace_row()
    tr0 = row @ y0
    counter = [0]

    def rhs(_t, y):
        counter[0] += 1
        if counter[0] > max_rhs_evals:
            raise _Budget
        return mat @ y

    if mat.nnz == 0:
        ys = np.repeat(y0[:, None], t.size, axis=1)
        nsteps = 0
    else:
        kwargs = dict(rtol=rtol, atol=atol, t_eval=t)
        if method in ("BDF", "Radau", "LSODA"):
            kwargs["jac"] = mat.tocsc()
        try:
            sol = solve_ivp(rhs, (t[0], t[-1]), y0.astype(complex), method=method, **kwargs)
        except _Budget:
            raise StiffnessError(f"more than {max_rhs_evals} right-hand-side evaluations; "
                                 "the problem is stiff: use method='BDF' or steady_state()")
        if not sol.success:
            raise StiffnessError(f"integrator failed ({sol.message}); consider method='BDF' "
                                 "or the stationary solver")
        ys = sol.y
        nsteps = int(sol.t.size)
    traj = Trajectory(times=t, rhs_evals=counter[0], steps=nsteps)
    drift = float(np.max(np.abs(row @ ys - tr0))) if ys.size else 0.0
    traj.max_trace_drift = drift
    if drift > TRACE_DRIFT_TOL:
        raise IntegrationError(f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_TOL:.0e}")
    obs = observables or {}
    traj.observables = {name: [] for name in obs}
    for k in range(t.size):
        st = lv.from_vector(ys[:, k])
        if store_states:
            traj.states.append(st)
        for name, fn in obs.items():
            traj.observables[name].append(fn(st))
    traj.observables = {k: np.asarray(v) for k, v in traj.observables.items()}
    return traj


# --------------------------------------------------------------------------
# spectra

@dataclass(frozen=True)
class SpectralResult:
    eigenvalues: np.ndarray
    gap: float
    zero_modes: int


def _sort_eigs(vals: np.ndarray) -> np.ndarray:
    order = np.lexsort((np.abs(vals.imag), np.abs(vals.real)))
    return vals[order]


def spectrum(lv: Liouvillian, k: int = 6, zero_tol: float | None = None,
             sigma: float | None = None) -> SpectralResult:
    """``k`` eigenvalues closest to zero, the dissipative gap and the zero-mode count."""
    if k < 2:
        raise DomainError("k must be at least 2")
    n = lv.size
    scale = max(float(abs(lv.matrix).max()), 1e-300)
    tol = 1e-9 * scale if zero_tol is None else zero_tol
    if n <= DENSE_LIMIT or k >= n - 2:
        vals = la.eigvals(lv.matrix.toarray())
    else:
        shift = 1e-6 * scale if sigma is None else sigma
        try:
            vals = spla.eigs(lv.matrix.tocsc(), k=k, sigma=shift, which="LM",
                             return_eigenvectors=False, tol=1e-12, maxiter=20 * n)
        except spla.ArpackNoConvergence as exc:
            raise NumericalError(f"shift-invert eigensolver did not converge: "
                                 f"{len(exc.eigenvalues)} of {k} eigenvalues found") from exc
    vals = _sort_eigs(np.asarray(vals))
    if np.max(vals.real) > max(1e-10, 1e-10 * scale):
        raise NumericalError(f"eigenvalue with positive real part {np.max(vals.real):.3e}")
    zero = np.abs(vals) <= tol
    nonzero = vals[~zero]
    gap = float(np.min(np.abs(nonzero.real))) if nonzero.size else math.nan
    return SpectralResult(eigenvalues=vals[:k], gap=gap, zero_modes=int(zero.sum()))


# --------------------------------------------------------------------------
# perturbative j-hopping

@dataclass(frozen=True)
class RateMatrix:
    js: tuple[float, ...]
    matrix: np.ndarray       # M[j', j]: rate j -> j' per unit epsilon
    epsilon: float = 1.0     # 2 gamma_phi / Gamma

    @property
    def gap(self) -> float:
        """Smallest nonzero relaxation rate of ``M`` (dimensionless)."""
        vals = np.linalg.eigvals(self.matrix)
        vals = vals[np.argsort(np.abs(vals))]
        return float(np.abs(vals[1].real))

    @property
    def physical_gap(self) -> float:
        """First-order decay rate in units of ``Gamma``."""
        return self.gap * self.epsilon


def jspace_rate_matrix(space: DickeSpace, r: float, gamma_phi: float = 0.0,
                       gamma: float = 1.0) -> RateMatrix:
    """Degenerate first-order perturbation theory in local dephasing.

    The unperturbed zero modes are the per-block dark states; the left zero
    modes are the block identities. ``M[j', j] = Tr_{j'}[L1 rho_dk(j)]`` with
    ``L1 = sum_k D[sigma_z^(k)/2]``; the physical rates are ``M * 2 gamma_phi / Gamma``.
    """
    if space.n_spins % 2:
        raise DomainError("rate-matrix analysis requires even N")
    js = space.js
    lv1 = _local_superop(space, js, gamma_phi=0.5, gamma_rel=0.0).tocsr()
    dims = [round(2 * j) + 1 for j in js]
    offs = np.concatenate([[0], np.cumsum([d * d for d in dims])])
    m = np.zeros((len(js), len(js)))
    for i, j in enumerate(js):
        c = dark_state_coefficients(j, r)
        vec = np.zeros(int(offs[-1]), dtype=complex)
        vec[offs[i]:offs[i + 1]] = np.outer(c, c).reshape(-1, order="F")
        out = lv1 @ vec
        for i2, d in enumerate(dims):
            m[i2, i] = out[offs[i2] + np.arange(d) * (d + 1)].real.sum()
    return RateMatrix(js=tuple(js), matrix=m, epsilon=2 * gamma_phi / gamma)
