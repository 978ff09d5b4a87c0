"""Closed-form results for the ideal squeezed-reservoir model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .spinspace import spin_matrices
from .state import DensityState


SINGULAR_TOL = 1e-14


def _is_integer_j(j: float) -> bool:
    return round(2 * j) % 2 == 0


@dataclass(frozen=True)
class DarkState:
    j: float
    r: float
    coefficients: np.ndarray  # over m = -j..j, real and normalized

    @property
    def vector(self) -> np.ndarray:
        return self.coefficients.astype(complex)

    def density(self, n_spins: int) -> DensityState:
        psi = self.vector
        return DensityState(layout="dicke", n_spins=n_spins,
                            blocks={self.j: np.outer(psi, psi.conj())})


def dark_state_coefficients(j: float, r: float) -> np.ndarray:
    """Normalized kernel vector of ``cosh(r) S_- - sinh(r) S_+`` on integer ``j``.

    ``c_{-j+2k} = C(j,k) C(2j,2k)^{-1/2} tanh(r)^k c_{-j}``, evaluated in the
    log domain so that large ``j`` does not overflow.
    """
    if not _is_integer_j(j):
        raise DomainError(f"no dark state in half-integer block j={j}")
    jj = round(j)
    dim = 2 * jj + 1
    t = math.tanh(r)
    out = np.zeros(dim)
    if t == 0.0:
        out[0] = 1.0
        return out
    k = np.arange(jj + 1)
    lg = math.lgamma
    log_binom = np.array([lg(jj + 1) - lg(x + 1) - lg(jj - x + 1) for x in k])
    log_binom2 = np.array([lg(2 * jj + 1) - lg(2 * x + 1) - lg(2 * jj - 2 * x + 1) for x in k])
    logs = log_binom - 0.5 * log_binom2 + k * math.log(abs(t))
    logs -= logs.max()
    vals = np.exp(logs) * np.sign(t) ** k
    out[2 * k] = vals
    return out / np.linalg.norm(out)


def dark_state(n_spins: int, j: float, r: float) -> DarkState:
    """Pure steady state of the ideal model in block ``j`` (even ``N`` only)."""
    if n_spins % 2:
        raise DomainError("odd N has no dark state")
    if j > n_spins / 2 or j < 0 or not _is_integer_j(j):
        raise DomainError(f"j={j} is not a block of N={n_spins}")
    return DarkState(j=float(j), r=float(r), coefficients=dark_state_coefficients(j, r))


def dark_state_rotated(j: float, r: float) -> np.ndarray:
    """Same state built as ``exp(theta S_z)|j, 0>_y`` with ``theta = ln sqrt(tanh r)``."""
    s = spin_matrices(j)
    vals, vecs = np.linalg.eigh(s["y"])
    y0 = vecs[:, int(np.argmin(np.abs(vals)))]
    theta = 0.5 * math.log(math.tanh(r))
    m = -j + np.arange(round(2 * j) + 1)
    psi = np.exp(theta * m) * y0
    psi = psi / np.linalg.norm(psi)
    # fix the global phase so the m=-j amplitude is real positive
    return psi * np.exp(-1j * np.angle(psi[0]))


def lmg_hamiltonian(j: float, r: float) -> np.ndarray:
    s = spin_matrices(j)
    sx2 = (s["x"] @ s["x"]).real
    sy2 = (s["y"] @ s["y"]).real
    return math.exp(-2 * r) * sx2 + math.exp(2 * r) * sy2 + s["z"].real


@dataclass(frozen=True)
class LmgSpectrum:
    j: float
    r: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns in the (j, m) basis


def lmg_spectrum(j: float, r: float) -> LmgSpectrum:
    """Spectrum of ``e^{-2r} Sx^2 + e^{2r} Sy^2 + Sz``.

    Computed as squared singular values of ``Sigma(r)`` (the Hamiltonian equals
    ``Sigma^dag Sigma``), which resolves the exponentially small odd-N ground
    energy far better than diagonalizing the Hamiltonian directly.
    """
    if not math.isfinite(r):
        raise DomainError("r must be finite")
    s = spin_matrices(j)
    sig = (math.cosh(r) * s["m"] - math.sinh(r) * s["p"]).real
    _, sv, vh = np.linalg.svd(sig)
    order = np.argsort(sv)
    vals = sv[order] ** 2
    vecs = vh[order].T
    return LmgSpectrum(j=float(j), r=float(r), eigenvalues=vals, eigenvectors=vecs)


def odd_steady_state(j: float, r: float, n_spins: int | None = None) -> DensityState:
    """``rho ∝ (Sigma^dag Sigma)^{-1}`` on a half-integer block."""
    if _is_integer_j(j):
        raise DomainError("odd steady state requires half-integer j")
    if r <= 0:
        raise DomainError("r must be positive")
    spec = lmg_spectrum(j, r)
    lam = spec.eigenvalues
    if lam[0] <= SINGULAR_TOL:
        raise NumericalError(f"LMG spectrum is singular (lambda_0={lam[0]:.3e})")
    w = 1 / lam
    w /= w.sum()
    v = spec.eigenvectors
    rho = (v * w) @ v.T
    n = round(2 * j) if n_spins is None else n_spins
    return DensityState(layout="dicke", n_spins=n, blocks={float(j): rho.astype(complex)})


def odd_purity(j: float, r: float) -> float:
    lam = lmg_spectrum(j, r).eigenvalues
    inv = 1 / lam
    return float(np.sum(inv ** 2) / np.sum(inv) ** 2)


@dataclass(frozen=True)
class Asymptotics:
    heisenberg_xi2: float
    breakdown_r: float
    even_Sy2_largeR: float
    odd_Sy2_largeR: float
    dephasing_floor_xi2: float
    dephasing_opt_r: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def asymptotics(n_spins: int, r: float) -> Asymptotics:
    if n_spins < 2:
        raise DomainError("need at least two spins")
    n = n_spins
    return Asymptotics(
        heisenberg_xi2=2 / (n + 2),
        breakdown_r=math.log(n) / 2,
        even_Sy2_largeR=n * n * math.exp(-4 * r) / 8,
        odd_Sy2_largeR=n / math.pi ** 2,
        dephasing_floor_xi2=0.5 + math.sqrt(n) / (n + 1),
        dephasing_opt_r=math.log(n) / 8,
    )
