"""Density operators in the three supported layouts."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LayoutError, PositivityError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_FLOOR = -1e-8


@dataclass(frozen=True)
class DensityState:
    """Hermitian, unit-trace operator.

    ``dicke``: ``blocks`` maps ``j`` to the representative block; the trace is
    the plain sum of block traces (degeneracy folded in).
    ``full``: ``matrix`` over the ``2**N`` product space.
    ``hybrid``: ``matrix`` over spin (x) Fock, spin index major; the spin part
    is either the full product space (``spin_j is None``) or the single
    collective block ``spin_j``.
    """

    layout: str
    n_spins: int
    blocks: dict | None = field(default=None, repr=False)
    matrix: np.ndarray | None = field(default=None, repr=False)
    fock_dim: int = 0
    spin_j: float | None = None

    @classmethod
    def dicke(cls, space, blocks: dict) -> "DensityState":
        ordered = {b.j: np.asarray(blocks[b.j], dtype=complex)
                   for b in space.blocks if b.j in blocks}
        return cls(layout="dicke", n_spins=space.n_spins, blocks=ordered)

    @classmethod
    def full(cls, matrix) -> "DensityState":
        m = np.asarray(matrix, dtype=complex)
        n = int(round(np.log2(m.shape[0])))
        if 2 ** n != m.shape[0]:
            raise LayoutError(f"full-space matrix must be 2**N square, got {m.shape}")
        return cls(layout="full", n_spins=n, matrix=m)

    @classmethod
    def hybrid(cls, matrix, n_spins: int, fock_dim: int, spin_j=None) -> "DensityState":
        return cls(layout="hybrid", n_spins=n_spins, matrix=np.asarray(matrix, dtype=complex),
                   fock_dim=fock_dim, spin_j=spin_j)

    @classmethod
    def pure_dicke(cls, space, j: float, psi) -> "DensityState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls.dicke(space, {j: np.outer(psi, psi.conj())})

    # ------------------------------------------------------------------
    def _mats(self):
        if self.layout == "dicke":
            return list(self.blocks.values())
        return [self.matrix]

    def trace(self) -> complex:
        return complex(sum(np.trace(m) for m in self._mats()))

    def purity(self) -> float:
        return float(sum(np.real(np.vdot(m, m)) for m in self._mats()))

    def hermiticity_residual(self) -> float:
        return float(max(np.max(np.abs(m - m.conj().T)) for m in self._mats()))

    def eigenvalues(self) -> np.ndarray:
        vals = [np.linalg.eigvalsh((m + m.conj().T) / 2) for m in self._mats()]
        return np.sort(np.concatenate(vals))

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])

    def check(self, floor: float = POSITIVITY_FLOOR) -> "DensityState":
        """Raise on invariant violations; returns ``self`` for chaining."""
        herm = self.hermiticity_residual()
        if herm > HERMITIAN_TOL:
            raise PositivityError(f"state is not Hermitian (residual {herm:.3e})")
        tr = self.trace()
        if abs(tr - 1) > TRACE_TOL:
            raise PositivityError(f"trace {tr.real:.12f} deviates from 1")
        lo = self.min_eigenvalue()
        if lo < floor:
            raise PositivityError(f"minimum eigenvalue {lo:.3e} below floor {floor:.1e}")
        return self

    def block_traces(self) -> dict:
        if self.layout != "dicke":
            raise LayoutError("block traces require the Dicke layout")
        return {j: float(np.real(np.trace(m))) for j, m in self.blocks.items()}

    def spin_state(self) -> "DensityState":
        """Reduced spin state (identity for non-hybrid layouts)."""
        if self.layout != "hybrid":
            return self
        f = self.fock_dim
        s = self.matrix.shape[0] // f
        red = np.einsum("afbf->ab", self.matrix.reshape(s, f, s, f))
        if self.spin_j is None:
            return DensityState.full(red)
        return DensityState(layout="dicke", n_spins=self.n_spins, blocks={self.spin_j: red})

    def fock_state(self) -> np.ndarray:
        if self.layout != "hybrid":
            raise LayoutError("no bosonic mode in this layout")
        f = self.fock_dim
        s = self.matrix.shape[0] // f
        return np.einsum("afag->fg", self.matrix.reshape(s, f, s, f))

    def mean_photons(self) -> float:
        rho_c = self.fock_state()
        return float(np.real(np.sum(np.arange(self.fock_dim) * np.diag(rho_c))))

    def trace_distance(self, other: "DensityState") -> float:
        if self.layout != other.layout:
            raise LayoutError("trace distance needs matching layouts")
        if self.layout == "dicke":
            keys = set(self.blocks) | set(other.blocks)
            tot = 0.0
            for j in keys:
                a = self.blocks.get(j)
                b = other.blocks.get(j)
                if a is None:
                    a = np.zeros_like(b)
                if b is None:
                    b = np.zeros_like(a)
                tot += np.sum(np.abs(np.linalg.eigvalsh((a - b + (a - b).conj().T) / 2)))
            return float(tot / 2)
        d = self.matrix - other.matrix
        return float(np.sum(np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2))) / 2)

    def fidelity_pure(self, psi, j: float | None = None) -> float:
        """``<psi|rho|psi>`` for a normalized vector (Dicke block ``j``)."""
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        m = self.blocks[j] if self.layout == "dicke" else self.matrix
        return float(np.real(psi.conj() @ m @ psi))
