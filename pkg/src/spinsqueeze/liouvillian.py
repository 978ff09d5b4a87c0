"""Sparse Lindblad superoperators for the spin-squeezing models.

Vectorization is column stacking throughout: ``vec(A rho B) = (B^T kron A)
vec(rho)``.  A Dicke-layout state vector is the concatenation of
``vec(rho_j)`` over the blocks present, in the block order of the space
(j descending); coherences between different ``j`` are never stored.

Local (single-spin) channels in the Dicke layout are obtained by coupling
the first ``N-1`` spins to the last one with Clebsch-Gordan coefficients:
for a jump ``sum_k A_k rho A_k^dag`` the image in block ``J`` of block
``j`` is ``N * sum_{j1} (d_{N-1}(j1)/d_N(j)) a rho_j a^dag`` with
``a[M, m] = <J M; j1| A_last |j m; j1>``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import CutoffError, DomainError, LayoutError, ResourceError, ValidityError
from .spinspace import (DickeSpace, degeneracy_ratio, dicke_space, full_space_ops,
                        spin_matrices)
from .state import DensityState

DROP_TOL = 1e-15
MAX_ORACLE_SPINS = 6


@dataclass(frozen=True)
class ModelParams:
    """Rates of the spin-only master equation (all in the same unit)."""

    gamma: float = 1.0          # engineered reservoir, Gamma
    r: float = 0.0
    n_th: float = 0.0
    gamma_coll: float = 0.0
    gamma_phi: float = 0.0
    gamma_rel: float = 0.0
    gamma_up: float = 0.0       # collective excitation D[S+]

    def __post_init__(self):
        for name in ("gamma", "n_th", "gamma_coll", "gamma_phi", "gamma_rel", "gamma_up"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if not math.isfinite(self.r):
            raise DomainError("r must be finite")

    @property
    def has_local(self) -> bool:
        return self.gamma_phi > 0 or self.gamma_rel > 0

    @property
    def max_rate(self) -> float:
        return max(self.gamma * (1 + self.n_th), self.gamma_coll, self.gamma_phi,
                   self.gamma_rel, self.gamma_up, 1e-300)


@dataclass(frozen=True)
class HybridParams:
    g: float = 1.0
    kappa_sqz: float = 10.0
    kappa_int: float = 0.0
    r: float = 0.0
    n_cut: int | None = None
    detunings: tuple[float, ...] | None = None
    gamma_phi: float = 0.0
    gamma_rel: float = 0.0

    def __post_init__(self):
        for name in ("g", "kappa_sqz", "kappa_int", "gamma_phi", "gamma_rel"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if self.n_cut is not None and self.n_cut < 2:
            raise DomainError("n_cut must be at least 2")

    @property
    def cutoff(self) -> int:
        return self.n_cut if self.n_cut is not None else fock_cutoff(self.r, self.kappa_sqz,
                                                                    self.kappa_int)

    @property
    def needs_full_spin_space(self) -> bool:
        det = self.detunings is not None and any(d != 0 for d in self.detunings)
        return det or self.gamma_phi > 0 or self.gamma_rel > 0


@dataclass(frozen=True)
class Liouvillian:
    """Sparse superoperator tagged with the layout of the states it acts on."""

    matrix: sp.csr_matrix = field(repr=False)
    layout: str
    n_spins: int
    js: tuple[float, ...] = ()
    spin_dim: int = 0
    fock_dim: int = 0
    spin_j: float | None = None
    scale: float = 1.0
    # j -> sole jump operator, when the operator is Gamma D[jump] on each block
    single_jump: dict | None = field(default=None, repr=False, compare=False)

    @property
    def hilbert_dims(self) -> tuple[int, ...]:
        if self.layout == "dicke":
            return tuple(round(2 * j) + 1 for j in self.js)
        if self.layout == "full":
            return (2 ** self.n_spins,)
        return (self.spin_dim * self.fock_dim,)

    @property
    def offsets(self) -> list[int]:
        out, acc = [], 0
        for d in self.hilbert_dims:
            out.append(acc)
            acc += d * d
        return out

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def trace_row(self) -> np.ndarray:
        row = np.zeros(self.size)
        for off, d in zip(self.offsets, self.hilbert_dims):
            row[off + np.arange(d) * (d + 1)] = 1.0
        return row

    def to_vector(self, state: DensityState) -> np.ndarray:
        if state.layout != self.layout:
            raise LayoutError(f"state layout {state.layout} vs operator {self.layout}")
        if self.layout == "dicke":
            parts = []
            for j, d in zip(self.js, self.hilbert_dims):
                blk = state.blocks.get(j)
                parts.append(np.zeros(d * d, complex) if blk is None
                             else np.asarray(blk).reshape(-1, order="F"))
            return np.concatenate(parts)
        if state.matrix.shape[0] ** 2 != self.size:
            raise LayoutError("state dimension does not match the superoperator")
        return state.matrix.reshape(-1, order="F").astype(complex)

    def from_vector(self, vec: np.ndarray) -> DensityState:
        if self.layout == "dicke":
            blocks = {}
            for j, off, d in zip(self.js, self.offsets, self.hilbert_dims):
                blocks[j] = np.asarray(vec[off:off + d * d]).reshape(d, d, order="F")
            return DensityState(layout="dicke", n_spins=self.n_spins, blocks=blocks)
        d = self.hilbert_dims[0]
        mat = np.asarray(vec).reshape(d, d, order="F")
        if self.layout == "full":
            return DensityState(layout="full", n_spins=self.n_spins, matrix=mat)
        return DensityState.hybrid(mat, self.n_spins, self.fock_dim, self.spin_j)

    def restrict(self, j: float) -> "Liouvillian":
        """Sub-block acting on a single ``j`` (valid when L is block diagonal)."""
        if self.layout != "dicke":
            raise LayoutError("only Dicke-layout operators have j blocks")
        idx = self.js.index(j)
        off, d = self.offsets[idx], self.hilbert_dims[idx]
        sub = self.matrix[off:off + d * d, off:off + d * d].tocsr()
        return replace(self, matrix=sub, js=(j,))

    def __add__(self, other: "Liouvillian") -> "Liouvillian":
        if (self.layout, self.js, self.hilbert_dims) != (other.layout, other.js,
                                                         other.hilbert_dims):
            raise LayoutError("cannot add superoperators with different layouts")
        return replace(self, matrix=(self.matrix + other.matrix).tocsr(),
                       scale=max(self.scale, other.scale), single_jump=None)


# --------------------------------------------------------------------------
# superoperator primitives (column stacking)

def _csr(a) -> sp.csr_matrix:
    return a.tocsr() if sp.issparse(a) else sp.csr_matrix(np.asarray(a, dtype=complex))


def dissipator(op, rate: float = 1.0) -> sp.csr_matrix:
    """``rate * D[op]`` with ``D[A]rho = A rho A^dag - {A^dag A, rho}/2``."""
    a = _csr(op)
    d = a.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    ada = (a.conj().T @ a).tocsr()
    out = sp.kron(a.conj(), a) - 0.5 * sp.kron(eye, ada) - 0.5 * sp.kron(ada.T, eye)
    return (rate * out).tocsr()


def commutator(h) -> sp.csr_matrix:
    """``-i[H, .]`` as a superoperator."""
    hm = _csr(h)
    eye = sp.identity(hm.shape[0], dtype=complex, format="csr")
    return (-1j * (sp.kron(eye, hm) - sp.kron(hm.T, eye))).tocsr()


def sandwich(left, right) -> sp.csr_matrix:
    """``rho -> left rho right^dag``."""
    return sp.kron(_csr(right).conj(), _csr(left)).tocsr()


def anticommutator(op) -> sp.csr_matrix:
    """``rho -> -(op rho + rho op)/2`` for a Hermitian ``op``."""
    o = _csr(op)
    eye = sp.identity(o.shape[0], dtype=complex, format="csr")
    return (-0.5 * (sp.kron(eye, o) + sp.kron(o.T, eye))).tocsr()


def _prune(m: sp.spmatrix) -> sp.csr_matrix:
    m = m.tocsr()
    if m.nnz:
        cut = DROP_TOL * np.max(np.abs(m.data))
        m.data[np.abs(m.data) < cut] = 0
        m.eliminate_zeros()
    return m


def sigma_op(j: float, r: float) -> np.ndarray:
    """Bogoliubov spin operator ``cosh(r) S_- - sinh(r) S_+`` on block ``j``."""
    s = spin_matrices(j)
    return np.cosh(r) * s["m"] - np.sinh(r) * s["p"]


# --------------------------------------------------------------------------
# local channels in the Dicke layout

_SINGLE = {
    "z": np.array([[-1, 0], [0, 1]], dtype=float),
    "m": np.array([[0, 1], [0, 0]], dtype=float),
    "p": np.array([[0, 0], [1, 0]], dtype=float),
}


def _cg_half(j1: float, big_j: float, big_m: float, mu: float) -> float:
    """``<j1, M-mu; 1/2, mu | J, M>`` (Condon-Shortley)."""
    m1 = big_m - mu
    if abs(m1) > j1 + 1e-12 or abs(big_m) > big_j + 1e-12:
        return 0.0
    den = 2 * j1 + 1
    if abs(big_j - (j1 + 0.5)) < 1e-12:
        num = j1 + big_m + 0.5 if mu > 0 else j1 - big_m + 0.5
        return math.sqrt(max(num, 0.0) / den)
    if abs(big_j - (j1 - 0.5)) < 1e-12:
        if mu > 0:
            return -math.sqrt(max(j1 - big_m + 0.5, 0.0) / den)
        return math.sqrt(max(j1 + big_m + 0.5, 0.0) / den)
    return 0.0


@functools.lru_cache(maxsize=None)
def local_jump_kernel(n_spins: int, op: str, big_j: float, j: float):
    """Terms ``(weight, a)`` of ``sum_k A_k rho_j A_k^dag`` landing in block ``J``.

    ``op`` is one of ``"z"`` (sigma_z), ``"m"`` (sigma_-), ``"p"`` (sigma_+).
    """
    a_single = _SINGLE[op]
    mus = (-0.5, 0.5)
    terms = []
    for j1 in {j - 0.5, j + 0.5} & {big_j - 0.5, big_j + 0.5}:
        if j1 < 0 or j1 > (n_spins - 1) / 2 + 1e-12:
            continue
        if round(2 * j1) % 2 != (n_spins - 1) % 2:
            continue
        w = n_spins * degeneracy_ratio(n_spins - 1, j1, n_spins, j)
        if w == 0:
            continue
        dj, dJ = round(2 * j) + 1, round(2 * big_j) + 1
        a = np.zeros((dJ, dj))
        for im in range(dj):
            m = -j + im
            for iu, mu in enumerate(mus):
                c_in = _cg_half(j1, j, m, mu)
                if c_in == 0.0:
                    continue
                m1 = m - mu
                for iu2, mu2 in enumerate(mus):
                    amp = a_single[iu2, iu]
                    if amp == 0:
                        continue
                    big_m = m1 + mu2
                    if abs(big_m) > big_j + 1e-12:
                        continue
                    c_out = _cg_half(j1, big_j, big_m, mu2)
                    a[round(big_m + big_j), im] += c_out * c_in * amp
        if np.any(a):
            a.setflags(write=False)
            terms.append((w, a))
    return tuple(terms)


def _local_superop(space: DickeSpace, js: tuple[float, ...], gamma_phi: float,
                   gamma_rel: float, gamma_pump: float = 0.0) -> sp.csr_matrix:
    """Block-coupling superoperator for identical single-spin channels."""
    n = space.n_spins
    dims = [round(2 * j) + 1 for j in js]
    offs = np.concatenate([[0], np.cumsum([d * d for d in dims])])
    size = int(offs[-1])
    rows, cols, vals = [], [], []

    def put(block, i_to, i_from):
        coo = block.tocoo()
        rows.append(coo.row + offs[i_to])
        cols.append(coo.col + offs[i_from])
        vals.append(coo.data)

    channels = [(r, name) for r, name in ((gamma_phi / 2, "z"), (gamma_rel, "m"),
                                          (gamma_pump, "p")) if r > 0]
    index = {j: i for i, j in enumerate(js)}
    for i_from, j in enumerate(js):
        s = spin_matrices(j)
        eye = np.eye(dims[i_from])
        # no-jump part: sum_k A_k^dag A_k is collective for every channel used here
        if gamma_phi > 0:
            put(anticommutator((gamma_phi / 2) * n * eye), i_from, i_from)
        if gamma_rel > 0:
            put(anticommutator(gamma_rel * (n / 2 * eye + s["z"])), i_from, i_from)
        if gamma_pump > 0:
            put(anticommutator(gamma_pump * (n / 2 * eye - s["z"])), i_from, i_from)
        for big_j in (j - 1, j, j + 1):
            if big_j not in index:
                continue
            for rate, name in channels:
                for w, a in local_jump_kernel(n, name, big_j, j):
                    put(rate * w * sandwich(a, a), index[big_j], i_from)
    if not rows:
        return sp.csr_matrix((size, size), dtype=complex)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(size, size))


def _block_diag_collective(js, per_block) -> sp.csr_matrix:
    return sp.block_diag([per_block(j) for j in js], format="csr")


def _resolve_js(space: DickeSpace, j) -> tuple[float, ...]:
    if j is None:
        return space.js
    if not space.has_block(j):
        raise DomainError(f"j={j} is not a block of N={space.n_spins}")
    return (float(j),)


def _collective_terms(j: float, rates: list[tuple[float, np.ndarray]]) -> sp.csr_matrix:
    d = round(2 * j) + 1
    out = sp.csr_matrix((d * d, d * d), dtype=complex)
    for rate, op in rates:
        if rate:
            out = out + dissipator(op, rate)
    return out.tocsr()


def build_general_collective(space: DickeSpace, j, gamma: float, gamma_p: float,
                             gamma_down: float, gamma_up: float, r: float) -> Liouvillian:
    """``G D[Sigma] + G' D[Sigma^dag] + g D[S-] + g' D[S+]`` on block(s) ``j``."""
    for v in (gamma, gamma_p, gamma_down, gamma_up):
        if v < 0:
            raise DomainError("rates must be non-negative")
    js = _resolve_js(space, j)

    def per_block(jj):
        s = spin_matrices(jj)
        sig = sigma_op(jj, r)
        return _collective_terms(jj, [(gamma, sig), (gamma_p, sig.conj().T),
                                      (gamma_down, s["m"]), (gamma_up, s["p"])])

    mat = _prune(_block_diag_collective(js, per_block))
    scale = max(gamma, gamma_p, gamma_down, gamma_up, 1e-300)
    jumps = None
    if gamma > 0 and gamma_p == gamma_down == gamma_up == 0:
        jumps = {jj: sigma_op(jj, r) for jj in js}
    return Liouvillian(matrix=mat, layout="dicke", n_spins=space.n_spins, js=js, scale=scale,
                       single_jump=jumps)


def build_ideal(space: DickeSpace, j, gamma: float, r: float) -> Liouvillian:
    """``Gamma D[Sigma(r)]`` on block ``j`` (all blocks when ``j`` is None)."""
    return build_general_collective(space, j, gamma, 0.0, 0.0, 0.0, r)


def build_thermal(space: DickeSpace, j, gamma: float, r: float, n_th: float) -> Liouvillian:
    if n_th < 0:
        raise DomainError("n_th must be non-negative")
    return build_general_collective(space, j, gamma * (n_th + 1), gamma * n_th, 0.0, 0.0, r)


def build_spin_model(space: DickeSpace, p: ModelParams, j=None) -> Liouvillian:
    """Dicke-layout Liouvillian of the full spin-only model.

    Collective part: ``Gamma(n+1) D[Sigma] + Gamma n D[Sigma^dag] + gamma_coll
    D[S-] + gamma_up D[S+]``; local part: ``gamma_phi/2 sum D[sigma_z]`` and
    ``gamma_rel sum D[sigma_-]``.  Local channels couple neighbouring ``j``
    blocks, so ``j`` may only be fixed when they are absent.
    """
    if p.has_local and j is not None:
        raise DomainError("local channels couple j blocks; build over all blocks")
    coll = build_general_collective(space, j, p.gamma * (p.n_th + 1), p.gamma * p.n_th,
                                    p.gamma_coll, p.gamma_up, p.r)
    if not p.has_local:
        return replace(coll, scale=p.max_rate)
    loc = _local_superop(space, coll.js, p.gamma_phi, p.gamma_rel)
    return replace(coll, matrix=_prune(coll.matrix + loc), scale=p.max_rate, single_jump=None)


def build_full_oracle(n_spins: int, p: ModelParams, max_spins: int = MAX_ORACLE_SPINS
                      ) -> Liouvillian:
    """Same model written literally on the ``2**N`` product space."""
    if n_spins > max_spins:
        raise ResourceError(f"oracle limited to N <= {max_spins}")
    ops = full_space_ops(n_spins)
    sm, spl = ops.collective["m"], ops.collective["p"]
    sig = np.cosh(p.r) * sm - np.sinh(p.r) * spl
    parts = []
    for rate, op in ((p.gamma * (p.n_th + 1), sig), (p.gamma * p.n_th, sig.conj().T),
                     (p.gamma_coll, sm), (p.gamma_up, spl)):
        if rate:
            parts.append(dissipator(op, rate))
    for k in range(n_spins):
        if p.gamma_phi:
            parts.append(dissipator(ops.single["z"][k], p.gamma_phi / 2))
        if p.gamma_rel:
            parts.append(dissipator(ops.single["m"][k], p.gamma_rel))
    d = 2 ** n_spins
    mat = sum(parts) if parts else sp.csr_matrix((d * d, d * d), dtype=complex)
    return Liouvillian(matrix=_prune(mat), layout="full", n_spins=n_spins,
                       spin_dim=d, scale=p.max_rate)


# --------------------------------------------------------------------------
# rate mappings

def adiabatic_rates(g: float, kappa_sqz: float, kappa_int: float) -> tuple[float, float]:
    """Spin-only rates ``(Gamma, gamma_coll)`` after eliminating the cavity."""
    tot = kappa_sqz + kappa_int
    if tot <= 0:
        raise DomainError("kappa_sqz + kappa_int must be positive")
    pref = 4 * g * g / tot ** 2
    return pref * kappa_sqz, pref * kappa_int


@dataclass(frozen=True)
class EffectiveReservoir:
    r: float
    gamma: float
    gamma_p: float
    direction_undefined: bool = False

    @property
    def n_th(self) -> float:
        diff = self.gamma - self.gamma_p
        return self.gamma_p / diff if diff > 0 else math.inf

    @property
    def base_rate(self) -> float:
        """``Gamma_eff`` such that the rates read ``Gamma_eff (n+1)`` and ``Gamma_eff n``."""
        return self.gamma - self.gamma_p


def map_to_effective_reservoir(gamma: float, gamma_p: float, gamma_down: float,
                               gamma_up: float, r: float) -> EffectiveReservoir:
    """Rewrite four collective dissipators as an impure squeezed reservoir.

    Exact at the superoperator level: the returned ``(r~, G~, G~')`` satisfy
    ``G~ D[Sigma(r~)] + G~' D[Sigma(r~)^dag] == G D[Sigma(r)] + G' D[Sigma(r)^dag]
    + g D[S-] + g' D[S+]``.
    """
    tot = gamma + gamma_p
    if tot <= 0:
        raise DomainError("Gamma + Gamma' must be positive")
    extra = gamma_down + gamma_up
    if r == 0.0:
        r_t, undefined = 0.0, extra > 0
        cosh_ratio = (tot + extra) / tot
    else:
        sign = 1.0 if r > 0 else -1.0
        coth = 1 / math.tanh(2 * abs(r)) + extra / (tot * math.sinh(2 * abs(r)))
        r_t = sign * 0.5 * math.atanh(1 / coth)
        cosh_ratio = (tot * math.cosh(2 * r) + extra) / (tot * math.cosh(2 * r_t))
        undefined = False
    g_t = tot * cosh_ratio / 2 + (gamma - gamma_p + gamma_down - gamma_up) / 2
    gp_t = g_t - gamma + gamma_p - gamma_down + gamma_up
    if g_t < -1e-14 or gp_t < -1e-14:
        raise ValidityError(f"mapped rates negative: Gamma~={g_t:.3e}, Gamma~'={gp_t:.3e}")
    return EffectiveReservoir(r=r_t, gamma=max(g_t, 0.0), gamma_p=max(gp_t, 0.0),
                              direction_undefined=undefined)


# --------------------------------------------------------------------------
# hybrid spin-cavity model

def fock_cutoff(r: float, kappa_sqz: float, kappa_int: float) -> int:
    frac = kappa_sqz / (kappa_sqz + kappa_int) if kappa_sqz + kappa_int > 0 else 0.0
    return math.ceil(4 * math.sinh(r) ** 2 * frac) + 10


def _fock_ops(n_cut: int):
    a = np.diag(np.sqrt(np.arange(1, n_cut + 1)), 1).astype(complex)
    return sp.csr_matrix(a)


def hybrid_operators(p: HybridParams, n_spins: int):
    """Spin and cavity operators on spin (x) Fock for the hybrid model."""
    n_cut = p.cutoff
    f = n_cut + 1
    a = _fock_ops(n_cut)
    if p.needs_full_spin_space:
        ops = full_space_ops(n_spins)
        sm, spl = ops.collective["m"], ops.collective["p"]
        sdim, spin_j = 2 ** n_spins, None
        single = ops.single
    else:
        s = spin_matrices(n_spins / 2)
        sm, spl = sp.csr_matrix(s["m"]), sp.csr_matrix(s["p"])
        sdim, spin_j = n_spins + 1, n_spins / 2
        single = None
    eye_s = sp.identity(sdim, dtype=complex, format="csr")
    eye_f = sp.identity(f, dtype=complex, format="csr")
    return dict(a=sp.kron(eye_s, a).tocsr(), sm=sp.kron(sm, eye_f).tocsr(),
                sp=sp.kron(spl, eye_f).tocsr(), single=single, eye_f=eye_f,
                sdim=sdim, fdim=f, spin_j=spin_j)


def hybrid_hamiltonian(p: HybridParams, n_spins: int, ops=None, g: float | None = None,
                       flip_coupling: bool = False, detuning_sign: float = 1.0):
    ops = ops or hybrid_operators(p, n_spins)
    g = p.g if g is None else g
    a, sm, spl = ops["a"], ops["sm"], ops["sp"]
    if flip_coupling:
        sm, spl = spl, sm
    h = g * (a.conj().T @ sm + a @ spl)
    if p.detunings is not None and any(p.detunings):
        if len(p.detunings) != n_spins:
            raise DomainError("one detuning per spin required")
        for k, dk in enumerate(p.detunings):
            if dk:
                h = h + detuning_sign * dk / 2 * sp.kron(ops["single"]["z"][k], ops["eye_f"])
    return h.tocsr()


def hybrid_dissipators(p: HybridParams, n_spins: int, ops=None) -> sp.csr_matrix:
    ops = ops or hybrid_operators(p, n_spins)
    a = ops["a"]
    bog = np.cosh(p.r) * a + np.sinh(p.r) * a.conj().T
    out = dissipator(bog, p.kappa_sqz)
    if p.kappa_int:
        out = out + dissipator(a, p.kappa_int)
    if ops["single"] is not None:
        for k in range(n_spins):
            if p.gamma_phi:
                out = out + dissipator(sp.kron(ops["single"]["z"][k], ops["eye_f"]),
                                       p.gamma_phi / 2)
            if p.gamma_rel:
                out = out + dissipator(sp.kron(ops["single"]["m"][k], ops["eye_f"]),
                                       p.gamma_rel)
    return out.tocsr()


def build_hybrid(p: HybridParams, n_spins: int, g: float | None = None) -> Liouvillian:
    """Spins coupled to a cavity that is damped by a squeezed reservoir."""
    if p.needs_full_spin_space and n_spins > MAX_ORACLE_SPINS:
        raise ResourceError("hybrid model with local channels limited to "
                            f"N <= {MAX_ORACLE_SPINS}")
    ops = hybrid_operators(p, n_spins)
    mat = commutator(hybrid_hamiltonian(p, n_spins, ops, g=g)) + hybrid_dissipators(p, n_spins,
                                                                                      ops)
    scale = max(p.g, p.kappa_sqz * math.cosh(2 * p.r), p.kappa_int, p.gamma_phi, p.gamma_rel,
                1e-300)
    return Liouvillian(matrix=_prune(mat), layout="hybrid", n_spins=n_spins,
                       spin_dim=ops["sdim"], fock_dim=ops["fdim"], spin_j=ops["spin_j"],
                       scale=scale)


def check_cutoff(state: DensityState, margin: int = 3) -> float:
    """Mean photon number; raises if it comes within ``margin`` of the cutoff."""
    nbar = state.mean_photons()
    n_cut = state.fock_dim - 1
    if nbar > n_cut - margin:
        raise CutoffError(f"cavity population {nbar:.2f} within {margin} of cutoff {n_cut}")
    return nbar


def spin_space_for(n_spins: int) -> DickeSpace:
    return dicke_space(n_spins)
