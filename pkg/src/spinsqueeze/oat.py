"""One-axis-twist baseline in a dispersively coupled cavity."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize, minimize_scalar

from .errors import DomainError, SearchError
from .liouvillian import (Liouvillian, ModelParams, adiabatic_rates, build_spin_model,
                          commutator)
from .meanfield import optimize_kappa_sqz
from .measure import wineland
from .solver import evolve, steady_state
from .spinspace import DickeSpace, dicke_space, spin_matrices
from .state import DensityState


@dataclass(frozen=True)
class OatParams:
    g: float = 1.0
    kappa_int: float = 1.0
    gamma_rel: float = 0.0
    delta_c: float = 0.0
    n_spins: int = 2

    def __post_init__(self):
        if not self.kappa_int > 0:
            raise DomainError("kappa_int must be positive")
        if self.g < 0 or self.gamma_rel < 0:
            raise DomainError("g and gamma_rel must be non-negative")

    @property
    def chi(self) -> float:
        return oat_chi(self.g, self.delta_c, self.kappa_int)

    @property
    def collective_decay(self) -> float:
        return oat_decay(self.g, self.delta_c, self.kappa_int)


def oat_chi(g: float, delta_c: float, kappa_int: float) -> float:
    """Twisting strength ``g^2 D / (D^2 + (kappa/2)^2)``."""
    return g * g * delta_c / (delta_c ** 2 + (kappa_int / 2) ** 2)


def oat_decay(g: float, delta_c: float, kappa_int: float) -> float:
    """Cavity-induced collective decay rate."""
    return kappa_int * g * g / (delta_c ** 2 + (kappa_int / 2) ** 2)


def build_oat(space: DickeSpace, p: OatParams) -> Liouvillian:
    """``-i[chi (S^2 - Sz^2), .] + decay D[S-] + gamma_rel sum D[sigma_-]`` over all blocks."""
    base = build_spin_model(space, ModelParams(gamma=0.0, gamma_coll=p.collective_decay,
                                               gamma_rel=p.gamma_rel))
    chi = p.chi
    if chi == 0.0:
        return base

    def twist(j):
        sz = spin_matrices(j)["z"].real
        d = sz.shape[0]
        h = chi * (j * (j + 1) * np.eye(d) - sz @ sz)
        return commutator(h)

    ham = sp.block_diag([twist(j) for j in base.js], format="csr")
    return replace(base, matrix=(base.matrix + ham).tocsr(),
                   scale=max(base.scale, abs(chi) * space.n_spins), single_jump=None)


def coherent_x(n_spins: int) -> DensityState:
    """Spin coherent state along ``+x`` in the symmetric block."""
    j = n_spins / 2
    vals, vecs = np.linalg.eigh(spin_matrices(j)["x"])
    psi = vecs[:, int(np.argmax(vals))]
    return DensityState(layout="dicke", n_spins=n_spins, blocks={j: np.outer(psi, psi.conj())})


@dataclass(frozen=True)
class TransientMinimum:
    t_opt: float
    xi2: float
    times: np.ndarray
    xi2_trace: np.ndarray


def _refine_minimum(t: np.ndarray, xi: np.ndarray) -> tuple[float, float]:
    i = int(np.argmin(xi))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]
    if not np.all(np.isfinite(xi)):
        return float(t[i]), float(xi[i])
    spline = CubicSpline(t, xi)
    res = minimize_scalar(spline, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 * max(hi, 1.0)})
    if res.fun < xi[i]:
        return float(res.x), float(res.fun)
    return float(t[i]), float(xi[i])


def transient_minimum(p: OatParams, t_max: float | None = None, samples: int = 80,
                      space: DickeSpace | None = None, extensions: int = 2
                      ) -> TransientMinimum:
    """Earliest-time minimum of ``xi^2(t)`` starting from the ``+x`` coherent state.

    The window is doubled (at most ``extensions`` times) while the minimum sits
    on its right edge.
    """
    n = p.n_spins
    space = space or dicke_space(n)
    lv = build_oat(space, p)
    rho0 = coherent_x(n)
    chi = abs(p.chi)
    if t_max is None:
        if chi == 0:
            raise DomainError("no twisting (delta_c = 0); give t_max explicitly")
        t_max = 2.0 / (chi * n ** (2 / 3))
    for _ in range(extensions + 1):
        t = np.linspace(0.0, t_max, samples)
        traj = evolve(lv, rho0, t, observables={"xi2": wineland}, store_states=False,
                      rtol=1e-9, atol=1e-11)
        xi = traj.observable("xi2")
        if np.min(xi) >= xi[0] - 1e-10:
            # twisting too weak to beat the losses: no squeezing at any time
            return TransientMinimum(0.0, float(xi[0]), t, xi)
        if int(np.argmin(xi)) < samples - 2:
            t_opt, x_opt = _refine_minimum(t, xi)
            return TransientMinimum(t_opt, x_opt, t, xi)
        t_max *= 2
    raise SearchError("xi^2(t) minimum stays on the time-window boundary")


@dataclass(frozen=True)
class OatOptimum:
    delta_c: float
    t_opt: float
    xi2: float


def optimize_oat(g: float, kappa_int: float, gamma_rel: float, n_spins: int,
                 t_max: float | None = None, grid: int = 12,
                 delta_range: tuple[float, float] | None = None) -> OatOptimum:
    """Minimize the transient ``xi^2`` over the cavity detuning.

    A log grid over ``delta_c`` is refined by golden section in ``log delta_c``;
    the grid is extended twice if the best point lies on its edge.
    """
    base = OatParams(g=g, kappa_int=kappa_int, gamma_rel=gamma_rel, n_spins=n_spins)
    space = dicke_space(n_spins)
    lo, hi = delta_range or (kappa_int / 2, kappa_int * 10 * n_spins)
    lo, hi = math.log(lo), math.log(hi)
    cache: dict[float, TransientMinimum] = {}

    def f(logd: float) -> float:
        if logd not in cache:
            cache[logd] = transient_minimum(replace(base, delta_c=math.exp(logd)), t_max,
                                            space=space)
        return cache[logd].xi2

    for _ in range(3):
        xs = np.linspace(lo, hi, grid)
        vals = np.array([f(x) for x in xs])
        i = int(np.argmin(vals))
        if 0 < i < grid - 1:
            break
        width = hi - lo
        lo, hi = (lo - width, lo + (xs[1] - xs[0])) if i == 0 else (hi - (xs[1] - xs[0]),
                                                                     hi + width)
    else:
        raise SearchError("detuning optimum stays on the grid boundary")
    minimize_scalar(f, bracket=(xs[i - 1], xs[i], xs[i + 1]), method="golden", tol=1e-4)
    best = min(cache, key=lambda k: cache[k].xi2)
    tm = cache[best]
    return OatOptimum(delta_c=math.exp(best), t_opt=tm.t_opt, xi2=tm.xi2)


@dataclass(frozen=True)
class DissipativeOptimum:
    r: float
    kappa_sqz: float
    xi2: float


def dissipative_steady_xi2(g: float, kappa_sqz: float, kappa_int: float, gamma_rel: float,
                           r: float, n_spins: int, space: DickeSpace | None = None) -> float:
    """Steady ``xi^2`` of the adiabatically eliminated squeezed-cavity model."""
    gamma, gamma_coll = adiabatic_rates(g, kappa_sqz, kappa_int)
    space = space or dicke_space(n_spins)
    p = ModelParams(gamma=gamma, r=r, gamma_coll=gamma_coll, gamma_rel=gamma_rel)
    lv = build_spin_model(space, p)
    return wineland(steady_state(lv, block=None if p.has_local else n_spins / 2))


def optimize_dissipative(g: float, kappa_int: float, gamma_rel: float, n_spins: int,
                         r_grid: int = 13) -> DissipativeOptimum:
    """Minimize the steady ``xi^2`` jointly over ``r`` and ``kappa_sqz``.

    Starts from the mean-field optimal ``kappa_sqz`` and the best ``r`` on a
    coarse grid, then runs Nelder-Mead in ``(r, log kappa_sqz)``.
    """
    if gamma_rel <= 0:
        raise DomainError("gamma_rel must be positive")
    space = dicke_space(n_spins)
    k0 = optimize_kappa_sqz(math.sqrt(n_spins) * g, kappa_int, gamma_rel, n_spins).kappa_opt

    def f(x):
        return dissipative_steady_xi2(g, math.exp(x[1]), kappa_int, gamma_rel, x[0],
                                      n_spins, space)

    r0 = min(np.linspace(0.1, 0.5 * math.log(4 * n_spins), r_grid),
             key=lambda r: f((r, math.log(k0))))
    res = minimize(f, [r0, math.log(k0)], method="Nelder-Mead",
                   options={"xatol": 1e-3, "fatol": 1e-7})
    return DissipativeOptimum(r=float(res.x[0]), kappa_sqz=float(math.exp(res.x[1])),
                              xi2=float(res.fun))
