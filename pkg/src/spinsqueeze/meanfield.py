"""Second-order cumulant mean-field theory for the collective spin.

State vector ``(Sz, X, Y, C)`` with ``X = <Sx^2>``, ``Y = <Sy^2>`` and
``C = <Sz^2> - <Sz>^2``; the mean spin is assumed to lie along ``z``.

The collective-reservoir contribution is written once for ``D[Sigma(r)]``.
``D[S-]`` is the same expression at ``r = 0``; ``D[Sigma^dag]`` and ``D[S+]``
follow from the pi rotation about ``x`` that maps ``Sigma^dag`` onto ``Sigma``
and flips the sign of ``Sz`` while leaving ``X``, ``Y`` and ``C`` unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .errors import ConvergenceError, DomainError, SearchError
from .liouvillian import ModelParams


@dataclass(frozen=True)
class CumulantState:
    sz: float
    sx2: float
    sy2: float
    czz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.sz, self.sx2, self.sy2, self.czz])

    @classmethod
    def from_array(cls, a) -> "CumulantState":
        return cls(*(float(x) for x in a))

    @classmethod
    def polarized(cls, n_spins: int) -> "CumulantState":
        return cls(-n_spins / 2, n_spins / 4, n_spins / 4, 0.0)

    def xi2(self, n_spins: int) -> float:
        if self.sz == 0:
            return math.inf
        return n_spins * min(self.sx2, self.sy2) / self.sz ** 2


def _reservoir(s: np.ndarray, rate: float, r: float) -> np.ndarray:
    """Contribution of ``rate * D[cosh(r) S- - sinh(r) S+]``."""
    sz, x, y, c = s
    ep, em = math.exp(2 * r), math.exp(-2 * r)
    return rate * np.array([
        -(em + ep) / 2 * sz - (x + y),
        ep * sz ** 2 + (2 * x - 0.5) * sz - ep * x + ep * c,
        em * sz ** 2 + (2 * y - 0.5) * sz - em * y + em * c,
        sz + ep * x - (em + ep) * c + em * y,
    ])


def _reservoir_dagger(s: np.ndarray, rate: float, r: float) -> np.ndarray:
    flip = np.array([-1.0, 1.0, 1.0, 1.0])
    return flip * _reservoir(flip * s, rate, r)


def _local(s: np.ndarray, n: int, gamma_phi: float, gamma_rel: float) -> np.ndarray:
    sz, x, y, c = s
    diffusion = n * (gamma_phi + gamma_rel / 2) / 2
    return np.array([
        -gamma_rel * sz - gamma_rel * n / 2,
        -(2 * gamma_phi + gamma_rel) * x + diffusion,
        -(2 * gamma_phi + gamma_rel) * y + diffusion,
        gamma_rel * sz - 2 * gamma_rel * c + gamma_rel * n / 2,
    ])


def cumulant_rhs_array(s: np.ndarray, p: ModelParams, n_spins: int) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    out = _reservoir(s, p.gamma * (p.n_th + 1), p.r)
    if p.n_th:
        out = out + _reservoir_dagger(s, p.gamma * p.n_th, p.r)
    if p.gamma_coll:
        out = out + _reservoir(s, p.gamma_coll, 0.0)
    if p.gamma_up:
        out = out + _reservoir_dagger(s, p.gamma_up, 0.0)
    if p.gamma_phi or p.gamma_rel:
        out = out + _local(s, n_spins, p.gamma_phi, p.gamma_rel)
    return out


def cumulant_rhs(s: CumulantState, p: ModelParams, n_spins: int) -> CumulantState:
    """Time derivatives of the four cumulants."""
    return CumulantState.from_array(cumulant_rhs_array(s.as_array(), p, n_spins))


@dataclass(frozen=True)
class CumulantSteady:
    state: CumulantState
    xi2: float
    residual: float
    method: str


def _tolerance(p: ModelParams, n: int) -> float:
    # the reservoir enters with weights up to Gamma (2n+1) e^{2|r|}
    rate = max(p.max_rate, p.gamma * (2 * p.n_th + 1) * math.exp(2 * abs(p.r)))
    return 1e-10 * n * rate


def _newton(f, x0: np.ndarray, tol: float, max_iter: int = 100) -> np.ndarray | None:
    x = x0.astype(float).copy()
    fx = f(x)
    for _ in range(max_iter):
        if np.max(np.abs(fx)) <= tol:
            return x
        jac = np.empty((x.size, x.size))
        for k in range(x.size):
            h = 1e-7 * max(1.0, abs(x[k]))
            e = np.zeros_like(x)
            e[k] = h
            jac[:, k] = (f(x + e) - f(x - e)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError:
            return None
        lam, base = 1.0, np.max(np.abs(fx))
        while lam > 1e-6:
            trial = x + lam * step
            ft = f(trial)
            if np.all(np.isfinite(ft)) and np.max(np.abs(ft)) < base:
                x, fx = trial, ft
                break
            lam /= 2
        else:
            return None
    return x if np.max(np.abs(fx)) <= tol else None


def cumulant_evolve(p: ModelParams, n_spins: int, t_grid, s0: CumulantState | None = None,
                    rtol: float = 1e-8, atol: float = 1e-10):
    """Integrate the cumulant equations; returns ``(times, states (T, 4), xi2 (T,))``."""
    t = np.asarray(t_grid, dtype=float)
    y0 = (s0 or CumulantState.polarized(n_spins)).as_array()
    sol = solve_ivp(lambda _t, y: cumulant_rhs_array(y, p, n_spins), (t[0], t[-1]), y0,
                    method="Radau", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise ConvergenceError(f"cumulant integration failed: {sol.message}")
    ys = sol.y.T
    xi2 = np.array([CumulantState.from_array(y).xi2(n_spins) for y in ys])
    return t, ys, xi2


def _linearized(p: ModelParams, n: int) -> CumulantState:
    """Steady state with ``Sz = -N/2`` and ``C = 0`` held fixed."""
    sz = -n / 2
    zero = np.array([sz, 0.0, 0.0, 0.0])
    unit_x = np.array([sz, 1.0, 0.0, 0.0])
    unit_y = np.array([sz, 0.0, 1.0, 0.0])
    f0 = cumulant_rhs_array(zero, p, n)
    ax = cumulant_rhs_array(unit_x, p, n)[1] - f0[1]
    ay = cumulant_rhs_array(unit_y, p, n)[2] - f0[2]
    return CumulantState(sz, -f0[1] / ax, -f0[2] / ay, 0.0)


def cumulant_steady(p: ModelParams, n_spins: int, method: str = "newton",
                    linearized: bool = False) -> CumulantSteady:
    """Stationary cumulants by damped Newton (default) or integration to convergence."""
    n = n_spins
    if linearized:
        st = _linearized(p, n)
        return CumulantSteady(st, st.xi2(n), 0.0, "linearized")
    if method not in ("newton", "integrate"):
        raise DomainError(f"unknown method {method!r}")
    f = lambda x: cumulant_rhs_array(x, p, n)  # noqa: E731
    tol = _tolerance(p, n)
    casimir = n / 2 * (n / 2 + 1)
    # collective channels conserve Sx^2 + Sy^2 + <Sz>^2 + C; the stationary
    # set is then a family of shells and the symmetric one must be selected
    conserving = p.gamma_phi == 0 and p.gamma_rel == 0

    def g(x):
        out = f(x)
        if conserving:
            out[3] = x[1] + x[2] + x[0] ** 2 + x[3] - casimir
        return out

    x = None
    used = method
    if method == "newton":
        x = _newton(g, _linearized(p, n).as_array(), tol)
        if x is not None and (x[0] > 0 or x[0] < -n / 2 * (1 + 1e-9) or x[1] < 0 or x[2] < 0):
            x = None  # unphysical branch
    if x is None:
        used = "integrate"
        y = CumulantState.polarized(n).as_array()
        horizon = 10.0 / max(min(r for r in (p.gamma, p.gamma_coll, p.gamma_rel, p.gamma_phi,
                                               1.0) if r > 0), 1e-300)
        for _ in range(12):
            sol = solve_ivp(lambda _t, yy: f(yy), (0.0, horizon), y, method="Radau",
                            rtol=1e-10, atol=1e-12)
            y = sol.y[:, -1]
            if np.max(np.abs(f(y))) <= tol:
                break
            polished = _newton(f, y, tol, max_iter=20)
            if polished is not None:
                y = polished
                break
            horizon *= 4
        x = y
    res = float(np.max(np.abs(f(x))))
    if res > tol:
        raise ConvergenceError(f"cumulant steady state residual {res:.3e} > {tol:.3e}")
    st = CumulantState.from_array(x)
    return CumulantSteady(st, st.xi2(n), res, used)


def linearized_wineland(n_spins: int, gamma: float, gamma_coll: float, gamma_rel: float,
                        r: float | None = None, gamma_phi: float = 0.0,
                        dephasing_substitution: bool = False) -> float:
    """Linearized steady-state Wineland parameter.

    With ``r=None`` the large-``r`` expression
    ``(N g_c + G + g_rel) / (N g_c + N G + g_rel)`` is returned; a finite ``r``
    gives the full linearized result
    ``((N+1) g_c + (N e^{-2r} + 1) G + g_rel) / ((N+1) g_c + (N + e^{-2r}) G + g_rel)``.
    ``dephasing_substitution`` replaces ``g_rel`` by ``g_rel + 2 g_phi``.
    """
    if min(gamma, gamma_coll, gamma_rel, gamma_phi) < 0:
        raise DomainError("rates must be non-negative")
    n = n_spins
    g_rel = gamma_rel + 2 * gamma_phi if dephasing_substitution else gamma_rel
    if r is None:
        num = n * gamma_coll + gamma + g_rel
        den = n * gamma_coll + n * gamma + g_rel
    else:
        e = math.exp(-2 * r)
        num = (n + 1) * gamma_coll + (n * e + 1) * gamma + g_rel
        den = (n + 1) * gamma_coll + (n + e) * gamma + g_rel
    if den == 0:
        raise DomainError("all rates vanish")
    return num / den


def cooperativity(big_g: float, kappa_int: float, gamma_rel: float) -> float:
    """Collective cooperativity ``4 G^2 / (kappa_int gamma_rel)`` with ``G = sqrt(N) g``."""
    return 4 * big_g ** 2 / (kappa_int * gamma_rel)


def wineland_vs_kappa_sqz(kappa_sqz: float, big_g: float, kappa_int: float,
                          gamma_rel: float, n_spins: int) -> float:
    """Large-``r`` linearized Wineland parameter as a function of ``kappa_sqz``."""
    n = n_spins
    common = (n + 1) / n * kappa_int + (kappa_sqz + kappa_int) ** 2 * gamma_rel / (4 * big_g ** 2)
    return (common + kappa_sqz / n) / (common + kappa_sqz)


@dataclass(frozen=True)
class KappaOptimum:
    kappa_opt: float
    xi2_opt: float
    kappa_closed_form: float   # kappa_int * sqrt(C_rel)
    kappa_exact_form: float    # sqrt(kappa_int^2 + 4 G^2 kappa_int / gamma_rel)
    c_rel: float


def optimize_kappa_sqz(big_g: float, kappa_int: float, gamma_rel: float,
                       n_spins: int, grid_points: int = 40) -> KappaOptimum:
    """Minimize the linearized Wineland parameter over the engineered-bath rate."""
    if kappa_int <= 0 or gamma_rel <= 0:
        raise DomainError("kappa_int and gamma_rel must be positive")
    c_rel = cooperativity(big_g, kappa_int, gamma_rel)
    exact = math.sqrt(kappa_int ** 2 + 4 * big_g ** 2 * kappa_int / gamma_rel)
    f = lambda lk: wineland_vs_kappa_sqz(math.exp(lk), big_g, kappa_int,  # noqa: E731
                                         gamma_rel, n_spins)
    grid = np.linspace(math.log(exact) - 8, math.log(exact) + 8, grid_points)
    vals = np.array([f(x) for x in grid])
    i = int(np.clip(np.argmin(vals), 1, grid_points - 2))
    res = minimize_scalar(f, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
                          tol=1e-10)
    return KappaOptimum(kappa_opt=math.exp(res.x), xi2_opt=float(res.fun),
                        kappa_closed_form=kappa_int * math.sqrt(c_rel),
                        kappa_exact_form=exact, c_rel=c_rel)


def direct_drive_wineland(eta: float, n_spins: int) -> float:
    """``(eta + 1) / (N eta + 1)``; meaningful for ``eta <= 1`` and ``N eta >> 1``."""
    if eta < 0:
        raise DomainError("eta must be non-negative")
    return (eta + 1) / (n_spins * eta + 1)


@dataclass(frozen=True)
class ThermalOptimum:
    r_opt: float
    xi2_opt: float
    heisenberg_ratio: float   # xi2_opt / (2 / (N + 2))


def optimize_thermal_r(n_spins: int, n_th: float, gamma: float = 1.0,
                       r_max: float | None = None) -> ThermalOptimum:
    """Minimize the mean-field steady Wineland parameter over ``r`` at fixed ``n_th``."""
    n = n_spins
    r_hi = r_max if r_max is not None else 0.5 * math.log(4 * n) + 1.0

    def f(r):
        return cumulant_steady(ModelParams(gamma=gamma, r=r, n_th=n_th), n).xi2

    grid = np.linspace(0.05, r_hi, 40)
    vals = np.array([f(r) for r in grid])
    i = int(np.argmin(vals))
    if not 0 < i < len(grid) - 1:
        raise SearchError(f"xi^2(r) minimum on the search boundary r={grid[i]:.3f}")
    res = minimize_scalar(f, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
                          tol=1e-8)
    return ThermalOptimum(r_opt=float(res.x), xi2_opt=float(res.fun),
                          heisenberg_ratio=float(res.fun) * (n + 2) / 2)
