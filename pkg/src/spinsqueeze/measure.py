"""Collective-spin observables: moments, Wineland parameter, purity, S_y statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spinspace import full_space_ops, spin_matrices
from .state import DensityState

_AXES = ("x", "y", "z")


def _collective(state: DensityState):
    """Yield ``(rho, {x,y,z: S_k}, degeneracy-free weight)`` pieces of a spin state."""
    state = state.spin_state()
    if state.layout == "dicke":
        for j, rho in state.blocks.items():
            s = spin_matrices(j)
            yield rho, {k: s[k] for k in _AXES}
    else:
        ops = full_space_ops(state.n_spins)
        yield state.matrix, {k: ops.collective[k] for k in _AXES}


def _expect(rho, op) -> complex:
    if hasattr(op, "multiply"):  # sparse
        return complex(op.multiply(rho.T).sum())
    return complex(np.einsum("ij,ji->", op, rho))


@dataclass(frozen=True)
class SpinMoments:
    mean: np.ndarray      # <S_x>, <S_y>, <S_z>
    second: np.ndarray    # symmetrized <S_k S_l>
    n_spins: int

    @property
    def covariance(self) -> np.ndarray:
        return self.second - np.outer(self.mean, self.mean)

    @property
    def sx2(self) -> float:
        return float(self.second[0, 0])

    @property
    def sy2(self) -> float:
        return float(self.second[1, 1])

    @property
    def sz(self) -> float:
        return float(self.mean[2])

    @property
    def min_perp_variance(self) -> float:
        return _perp_analysis(self)[0]


def spin_moments(state: DensityState, space=None) -> SpinMoments:
    """First and symmetrized second moments of the collective spin."""
    mean = np.zeros(3)
    second = np.zeros((3, 3))
    for rho, ops in _collective(state):
        for a, ka in enumerate(_AXES):
            mean[a] += _expect(rho, ops[ka]).real
            for b in range(a, 3):
                prod = ops[ka] @ ops[_AXES[b]]
                val = _expect(rho, prod)
                if a == b:
                    second[a, a] += val.real
                else:
                    # (<AB> + <BA>)/2 = Re <AB> for Hermitian A, B
                    second[a, b] += val.real
                    second[b, a] += val.real
    return SpinMoments(mean=mean, second=second, n_spins=state.n_spins)


def _perp_analysis(m: SpinMoments):
    norm = float(np.linalg.norm(m.mean))
    if norm == 0.0:
        return math.nan, None, norm
    n = m.mean / norm
    ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = ref - n * (ref @ n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    basis = np.stack([e1, e2])
    cov = basis @ m.covariance @ basis.T
    cov = (cov + cov.T) / 2
    vals, vecs = np.linalg.eigh(cov)
    direction = basis.T @ vecs[:, 0]
    if direction[1] < 0 or (direction[1] == 0 and direction[0] < 0):
        direction = -direction
    return float(vals[0]), direction, norm


@dataclass(frozen=True)
class Squeezing:
    xi2: float
    divergent: bool
    direction: np.ndarray | None  # squeezed axis (unit vector) or None
    mean_length: float


def squeezing(state: DensityState, space=None) -> Squeezing:
    """Wineland parameter with the squeezed direction and divergence flag."""
    m = spin_moments(state)
    var, direction, norm = _perp_analysis(m)
    n = state.n_spins
    if norm < 1e-12 * n:
        return Squeezing(xi2=math.inf, divergent=True, direction=None, mean_length=norm)
    return Squeezing(xi2=n * max(var, 0.0) / norm ** 2, divergent=False,
                     direction=direction, mean_length=norm)


def wineland(state: DensityState, space=None) -> float:
    """``N * min perpendicular variance / |<S>|^2``; ``inf`` if ``<S>`` vanishes."""
    return squeezing(state).xi2


def purity(state: DensityState, space=None) -> float:
    """``Tr rho^2``.

    For the Dicke layout the representative blocks are weighted by the inverse
    degeneracy when ``space`` is given, giving the purity of the product-space
    state; without ``space`` each block counts once.
    """
    state = state.spin_state() if state.layout == "hybrid" and space is not None else state
    if state.layout == "dicke" and space is not None:
        return float(sum(np.real(np.vdot(m, m)) / space.block(j).degeneracy
                         for j, m in state.blocks.items()))
    return state.purity()


def sy_distribution(state: DensityState, space=None) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities of the ``S_y`` outcomes ``m_y`` (ascending)."""
    state = state.spin_state()
    acc: dict[float, float] = {}
    if state.layout == "dicke":
        for j, rho in state.blocks.items():
            vals, vecs = np.linalg.eigh(spin_matrices(j)["y"])
            pops = np.real(np.einsum("ik,ij,jk->k", vecs.conj(), rho, vecs))
            for v, p in zip(np.round(vals * 2) / 2, pops):
                acc[float(v)] = acc.get(float(v), 0.0) + float(p)
    else:
        sy = full_space_ops(state.n_spins).collective["y"].toarray()
        vals, vecs = np.linalg.eigh(sy)
        pops = np.real(np.einsum("ik,ij,jk->k", vecs.conj(), state.matrix, vecs))
        for v, p in zip(np.round(vals * 2) / 2, pops):
            acc[float(v)] = acc.get(float(v), 0.0) + float(p)
    keys = np.array(sorted(acc))
    return keys, np.array([acc[k] for k in keys])


def summary(state: DensityState, space=None) -> dict:
    """Standard record used by the CLI: xi2, purity, Sz, Sy2, Sx2."""
    m = spin_moments(state)
    return dict(xi2=squeezing(state).xi2, purity=purity(state, space), Sz=m.sz,
                Sy2=m.sy2, Sx2=m.sx2)
