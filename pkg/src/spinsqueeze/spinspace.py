"""Angular-momentum bases for N spin-1/2 particles.

Two representations are provided:

* the permutation-symmetric Dicke representation, one ``(2j+1)``-dimensional
  block per total angular momentum ``j`` (degenerate copies folded in), and
* the full ``2**N`` product space, used as a brute-force oracle.

Conventions: single-spin basis ordered ``(|down>, |up>)``, the first spin is
the most significant bit of a product-state index, and Dicke blocks are listed
with ``j`` descending from ``N/2`` while ``m`` ascends from ``-j``.
"""
from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import ConsistencyError, DomainError, ResourceError

MAX_DICKE_SPINS = int(os.environ.get("SPINSQUEEZE_MAX_DICKE", 512))
MAX_FULL_SPINS = int(os.environ.get("SPINSQUEEZE_MAX_FULL", 12))


def degeneracy(n_spins: int, j: float) -> int:
    """Number of copies of the spin-``j`` irrep in ``N`` spin-1/2 particles.

    Exact integer arithmetic: ``(2j+1) N! / ((N/2+j+1)! (N/2-j)!)``.
    """
    two_j = round(2 * j)
    if two_j < 0 or two_j > n_spins or (n_spins - two_j) % 2:
        return 0
    up = (n_spins + two_j) // 2 + 1
    down = (n_spins - two_j) // 2
    num = (two_j + 1) * math.factorial(n_spins)
    den = math.factorial(up) * math.factorial(down)
    return num // den


def degeneracy_ratio(n_num: int, j_num: float, n_den: int, j_den: float) -> float:
    """``d_{n_num}(j_num) / d_{n_den}(j_den)`` evaluated without overflow."""
    return float(Fraction(degeneracy(n_num, j_num), degeneracy(n_den, j_den)))


@dataclass(frozen=True)
class Block:
    j: float
    dim: int
    degeneracy: int


@dataclass(frozen=True)
class DickeSpace:
    n_spins: int
    blocks: tuple[Block, ...]

    @property
    def js(self) -> tuple[float, ...]:
        return tuple(b.j for b in self.blocks)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(b.dim for b in self.blocks)

    @property
    def j_max(self) -> float:
        return self.n_spins / 2

    def block(self, j: float) -> Block:
        for b in self.blocks:
            if b.j == j:
                return b
        raise DomainError(f"j={j} is not a block of N={self.n_spins}")

    def has_block(self, j: float) -> bool:
        return any(b.j == j for b in self.blocks)

    def basis_order(self) -> list[tuple[float, float]]:
        """Flattened ``(j, m)`` labels: j descending, m ascending."""
        out = []
        for b in self.blocks:
            out.extend((b.j, -b.j + k) for k in range(b.dim))
        return out


def dicke_space(n_spins: int, max_spins: int | None = None) -> DickeSpace:
    limit = MAX_DICKE_SPINS if max_spins is None else max_spins
    if not isinstance(n_spins, (int, np.integer)) or n_spins < 1:
        raise DomainError(f"number of spins must be a positive integer, got {n_spins!r}")
    if n_spins > limit:
        raise DomainError(f"N={n_spins} exceeds the configured maximum {limit}")
    n_spins = int(n_spins)
    blocks = []
    two_j = n_spins
    while two_j >= 0:
        j = two_j / 2
        blocks.append(Block(j=j, dim=two_j + 1, degeneracy=degeneracy(n_spins, j)))
        two_j -= 2
    return DickeSpace(n_spins=n_spins, blocks=tuple(blocks))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@functools.lru_cache(maxsize=None)
def spin_matrices(j: float) -> dict[str, np.ndarray]:
    """Dense ``S_x, S_y, S_z, S_+, S_-`` for a single spin-``j`` irrep."""
    two_j = round(2 * j)
    if two_j < 0 or abs(two_j - 2 * j) > 1e-12:
        raise DomainError(f"j must be a non-negative half-integer, got {j}")
    dim = two_j + 1
    m = -j + np.arange(dim)
    sz = np.diag(m).astype(complex)
    # <m+1|S+|m> = sqrt(j(j+1) - m(m+1))
    amp = np.sqrt(np.maximum(j * (j + 1) - m[:-1] * (m[:-1] + 1), 0.0))
    sp_ = np.diag(amp, -1).astype(complex)
    sm = sp_.conj().T.copy()
    sx = (sp_ + sm) / 2
    sy = (sp_ - sm) / 2j
    return {k: _readonly(v) for k, v in
            dict(x=sx, y=sy, z=sz, p=sp_, m=sm).items()}


@dataclass(frozen=True)
class CollectiveOps:
    j: float
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    sp: np.ndarray
    sm: np.ndarray


def collective_ops(space: DickeSpace, j: float) -> CollectiveOps:
    if not space.has_block(j):
        raise DomainError(f"j={j} is not a block of N={space.n_spins}")
    s = spin_matrices(j)
    return CollectiveOps(j=j, sx=s["x"], sy=s["y"], sz=s["z"], sp=s["p"], sm=s["m"])


# --------------------------------------------------------------------------
# full product space (oracle)

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),  # basis (down, up)
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
    "p": np.array([[0, 0], [1, 0]], dtype=complex),      # |up><down|
    "m": np.array([[0, 1], [0, 0]], dtype=complex),      # |down><up|
}


@dataclass(frozen=True)
class FullOps:
    n_spins: int
    single: dict = field(repr=False)      # k -> list of per-site sparse ops
    collective: dict = field(repr=False)  # k -> sparse S_k

    @property
    def dim(self) -> int:
        return 2 ** self.n_spins


def _embed(op: np.ndarray, site: int, n_spins: int) -> sp.csr_matrix:
    left = sp.identity(2 ** site, format="csr", dtype=complex)
    right = sp.identity(2 ** (n_spins - site - 1), format="csr", dtype=complex)
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


@functools.lru_cache(maxsize=16)
def full_space_ops(n_spins: int, max_spins: int | None = None) -> FullOps:
    limit = MAX_FULL_SPINS if max_spins is None else max_spins
    if n_spins < 1:
        raise DomainError("number of spins must be positive")
    if n_spins > limit:
        raise ResourceError(f"full-space oracle limited to N <= {limit}, got {n_spins}")
    single = {k: [_embed(p, s, n_spins) for s in range(n_spins)] for k, p in _PAULI.items()}
    coll = {}
    for k in ("x", "y", "z"):
        coll[k] = (sum(single[k]) / 2).tocsr()
    coll["p"] = sum(single["p"]).tocsr()
    coll["m"] = sum(single["m"]).tocsr()
    return FullOps(n_spins=n_spins, single=single, collective=coll)


def permutation_operator(n_spins: int, perm: tuple[int, ...]) -> sp.csr_matrix:
    """Unitary moving the state of site ``k`` to site ``perm[k]``."""
    dim = 2 ** n_spins
    idx = np.arange(dim)
    bits = (idx[:, None] >> (n_spins - 1 - np.arange(n_spins))) & 1
    new_bits = np.empty_like(bits)
    new_bits[:, list(perm)] = bits
    new_idx = (new_bits << (n_spins - 1 - np.arange(n_spins))).sum(axis=1)
    return sp.csr_matrix((np.ones(dim), (new_idx, idx)), shape=(dim, dim))


@functools.lru_cache(maxsize=16)
def dicke_basis_full(n_spins: int) -> dict[float, np.ndarray]:
    """Orthonormal vectors ``|j, m, alpha>`` in the product space.

    Returns ``j -> array(dim_j, d_j, 2**N)``; families built by lowering from
    highest-weight vectors so they carry the standard ladder phases.
    """
    ops = full_space_ops(n_spins)
    sp_full = ops.collective["p"].toarray()
    sm_full = ops.collective["m"].toarray()
    n_up = np.array([bin(i).count("1") for i in range(2 ** n_spins)])
    out = {}
    for blk in dicke_space(n_spins).blocks:
        j = blk.j
        k_up = round(n_spins / 2 + j)
        cols = np.flatnonzero(n_up == k_up)
        # highest weight: S_+ v = 0 within the m = j sector
        kernel = la.null_space(sp_full[:, cols])
        hw = np.zeros((kernel.shape[1], 2 ** n_spins), dtype=complex)
        hw[:, cols] = kernel.T
        fam = np.empty((blk.dim, blk.degeneracy, 2 ** n_spins), dtype=complex)
        fam[-1] = hw
        for idx in range(blk.dim - 1, 0, -1):
            m = -j + idx
            coef = math.sqrt(j * (j + 1) - m * (m - 1))
            fam[idx - 1] = (sm_full @ fam[idx].T).T / coef
        out[j] = fam
    return out


def symmetry_residual(rho_full: np.ndarray, n_spins: int) -> float:
    """Max deviation of ``rho`` from invariance under adjacent transpositions."""
    worst = 0.0
    for k in range(n_spins - 1):
        perm = list(range(n_spins))
        perm[k], perm[k + 1] = perm[k + 1], perm[k]
        p = permutation_operator(n_spins, tuple(perm))
        worst = max(worst, float(np.max(np.abs(p @ rho_full @ p.T - rho_full))))
    return worst


def project_to_dicke(rho_full, space: DickeSpace, tol: float = 1e-8):
    """Fold a permutation-symmetric product-space state into Dicke blocks."""
    from .state import DensityState

    mat = rho_full.matrix if hasattr(rho_full, "matrix") else np.asarray(rho_full)
    n = space.n_spins
    if mat.shape != (2 ** n, 2 ** n):
        raise DomainError(f"expected a {2**n}x{2**n} matrix for N={n}")
    resid = symmetry_residual(mat, n)
    if resid > tol:
        raise ConsistencyError(f"state is not permutation symmetric (residual {resid:.3e})")
    basis = dicke_basis_full(n)
    blocks = {}
    for blk in space.blocks:
        fam = basis[blk.j]  # (dim, d, 2**N)
        # rho_j[M, M'] = sum_alpha <J M alpha| rho |J M' alpha>
        proj = np.einsum("mai,ij,naj->mn", fam.conj(), mat, fam)
        blocks[blk.j] = proj
    return DensityState.dicke(space, blocks)


def embed_dicke(state, space: DickeSpace) -> np.ndarray:
    """Inverse of :func:`project_to_dicke`: ``(+)_j rho_j (x) I_{d_j}/d_j``."""
    n = space.n_spins
    basis = dicke_basis_full(n)
    out = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for blk in space.blocks:
        rho_j = state.blocks.get(blk.j)
        if rho_j is None:
            continue
        fam = basis[blk.j]
        out += np.einsum("mai,mn,naj->ij", fam, rho_j, fam.conj()) / blk.degeneracy
    return out
