"""Pulse-sequence and spin-loss protocols built on the hybrid and ideal models."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la

from .errors import LayoutError, ValidationError
from .liouvillian import (HybridParams, build_hybrid, build_ideal, commutator,
                          hybrid_dissipators, hybrid_hamiltonian, hybrid_operators, sandwich)
from .measure import spin_moments, wineland
from .solver import evolve, steady_state
from .spinspace import dicke_space, embed_dicke, project_to_dicke
from .state import DensityState

# --------------------------------------------------------------------------
# dynamical decoupling

HAMILTONIAN_TAGS = ("H0", "H1", "H2", "H1_g_off")
PULSE_TAGS = ("pi_x", "pi_y", "pi_z", "composite_pi_z", "none")


@dataclass(frozen=True)
class Segment:
    fraction: float
    hamiltonian: str
    pulse: str = "none"

    @property
    def coupling_on(self) -> bool:
        return not self.hamiltonian.endswith("g_off")


@dataclass(frozen=True)
class PulseSequence:
    period: float
    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.period > 0:
            raise ValidationError("period must be positive")
        if not self.segments:
            raise ValidationError("a sequence needs at least one segment")
        for k, s in enumerate(self.segments):
            if s.hamiltonian not in HAMILTONIAN_TAGS:
                raise ValidationError(f"segments[{k}].hamiltonian: unknown tag {s.hamiltonian!r}")
            if s.pulse not in PULSE_TAGS:
                raise ValidationError(f"segments[{k}].pulse: unknown tag {s.pulse!r}")
            if not s.fraction > 0:
                raise ValidationError(f"segments[{k}].fraction must be positive")
        total = sum(s.fraction for s in self.segments)
        if abs(total - 1) > 1e-12:
            raise ValidationError(f"segment fractions sum to {total}, not 1")

    def with_period(self, period: float) -> "PulseSequence":
        return replace(self, period=period)


def sequence_a(period: float) -> PulseSequence:
    """``pi_x`` pulses with the coupling switched off every second half period."""
    return PulseSequence(period, (Segment(0.5, "H0", "pi_x"), Segment(0.5, "H1_g_off", "pi_x")))


def sequence_b(period: float) -> PulseSequence:
    """``pi_x``, composite ``pi_z`` and ``pi_y`` with 2:1:1 waiting times."""
    return PulseSequence(period, (Segment(0.5, "H0", "pi_x"),
                                  Segment(0.25, "H1", "composite_pi_z"),
                                  Segment(0.25, "H2", "pi_y")))


def sequence_a_without_switching(period: float) -> PulseSequence:
    return PulseSequence(period, (Segment(0.5, "H0", "pi_x"), Segment(0.5, "H1", "pi_x")))


def _collective_spin(ops) -> dict[str, np.ndarray]:
    sm = ops["sm"].toarray()
    spl = ops["sp"].toarray()
    return {"x": (spl + sm) / 2, "y": (spl - sm) / 2j, "z": (spl @ sm - sm @ spl) / 2}


def _rotation(s: dict, axis: str, angle: float) -> np.ndarray:
    return la.expm(-1j * angle * s[axis])


def pulse_unitary(tag: str, s: dict) -> np.ndarray:
    """Collective instantaneous pulse; the composite ``pi_z`` uses x and y rotations only."""
    d = s["x"].shape[0]
    if tag == "none":
        return np.eye(d, dtype=complex)
    if tag == "composite_pi_z":
        return (_rotation(s, "x", -math.pi / 2) @ _rotation(s, "y", -math.pi)
                @ _rotation(s, "x", math.pi / 2))
    return _rotation(s, tag[-1], math.pi)


def _segment_hamiltonian(p: HybridParams, n_spins: int, ops, coupling_on: bool) -> np.ndarray:
    return hybrid_hamiltonian(p, n_spins, ops, g=p.g if coupling_on else 0.0).toarray()


def _check_closed(units: list[np.ndarray]) -> None:
    total = np.eye(units[0].shape[0], dtype=complex)
    for u in units:
        total = u @ total
    phase = total[0, 0]
    if abs(abs(phase) - 1) > 1e-9 or np.max(np.abs(total - phase * np.eye(total.shape[0]))) > 1e-9:
        raise ValidationError("pulses of one period do not compose to the identity")


@dataclass(frozen=True)
class AverageHamiltonian:
    matrix: np.ndarray
    target: np.ndarray
    residual: float

    @property
    def deviation(self) -> np.ndarray:
        return self.matrix - self.target


def dd_average_hamiltonian(seq: PulseSequence, p: HybridParams, n_spins: int
                           ) -> AverageHamiltonian:
    """First-order toggling-frame average and its distance from ``(g/2)(a^dag S- + a S+)``.

    In segment ``k`` the lab Hamiltonian appears as ``Q_k^dag H Q_k`` where
    ``Q_k`` is the product of the pulses already applied.
    """
    ops = hybrid_operators(p, n_spins)
    s = _collective_spin(ops)
    units = [pulse_unitary(seg.pulse, s) for seg in seq.segments]
    _check_closed(units)
    q = np.eye(units[0].shape[0], dtype=complex)
    avg = np.zeros_like(q)
    for seg, u in zip(seq.segments, units):
        h = _segment_hamiltonian(p, n_spins, ops, seg.coupling_on)
        avg += seg.fraction * (q.conj().T @ h @ q)
        q = u @ q
    a, sm, spl = ops["a"], ops["sm"], ops["sp"]
    target = (p.g / 2 * (a.conj().T @ sm + a @ spl)).toarray()
    return AverageHamiltonian(avg, target, float(np.max(np.abs(avg - target))))


def _cycle_map(seq: PulseSequence, p: HybridParams, n_spins: int) -> tuple[np.ndarray, dict]:
    ops = hybrid_operators(p, n_spins)
    s = _collective_spin(ops)
    diss = hybrid_dissipators(p, n_spins, ops)
    units = [pulse_unitary(seg.pulse, s) for seg in seq.segments]
    _check_closed(units)
    d = units[0].shape[0]
    cycle = np.eye(d * d, dtype=complex)
    for seg, u in zip(seq.segments, units):
        gen = (commutator(hybrid_hamiltonian(p, n_spins, ops,
                                             g=p.g if seg.coupling_on else 0.0)) + diss)
        step = la.expm(gen.toarray() * (seg.fraction * seq.period))
        cycle = sandwich(u, u).toarray() @ step @ cycle
    return cycle, ops


def _hybrid_state(vec: np.ndarray, n_spins: int, ops) -> DensityState:
    d = ops["sdim"] * ops["fdim"]
    mat = vec.reshape(d, d, order="F")
    mat = (mat + mat.conj().T) / 2
    mat = mat / np.trace(mat).real
    return DensityState.hybrid(mat, n_spins, ops["fdim"], ops["spin_j"])


@dataclass
class DDTrajectory:
    cycles: np.ndarray
    times: np.ndarray
    states: list = field(default_factory=list, repr=False)
    xi2: np.ndarray = field(default_factory=lambda: np.zeros(0))


def simulate_dd(seq: PulseSequence, p: HybridParams, n_spins: int, cycles: int,
                rho0: DensityState | None = None) -> DDTrajectory:
    """Stroboscopic evolution over ``cycles`` periods with instantaneous pulses.

    ``rho0`` defaults to all spins down and the cavity in vacuum.
    """
    if cycles < 0:
        raise ValidationError("cycles must be non-negative")
    cycle, ops = _cycle_map(seq, p, n_spins)
    d = ops["sdim"] * ops["fdim"]
    if rho0 is None:
        vec = np.zeros(d * d, dtype=complex)
        vec[0] = 1.0  # |down...down> (x) |0>
    else:
        if rho0.layout != "hybrid" or rho0.matrix.shape[0] != d:
            raise LayoutError("initial state must be a hybrid state of matching dimension")
        vec = rho0.matrix.reshape(-1, order="F").astype(complex)
    states, xi = [], []
    for _ in range(cycles + 1):
        st = _hybrid_state(vec, n_spins, ops)
        states.append(st)
        xi.append(wineland(st))
        vec = cycle @ vec
    idx = np.arange(cycles + 1)
    return DDTrajectory(cycles=idx, times=idx * seq.period, states=states, xi2=np.array(xi))


def dd_steady_state(seq: PulseSequence, p: HybridParams, n_spins: int) -> DensityState:
    """Fixed point of the one-period propagator, sampled at the start of a period."""
    cycle, ops = _cycle_map(seq, p, n_spins)
    vals, vecs = la.eig(cycle)
    k = int(np.argmin(np.abs(vals - 1)))
    if abs(vals[k] - 1) > 1e-8:
        raise ValidationError(f"period map has no fixed point (closest eigenvalue {vals[k]})")
    return _hybrid_state(vecs[:, k], n_spins, ops)


def dd_reference_xi2(p: HybridParams, n_spins: int, t_final: float | None = None) -> float:
    """``xi^2`` of the un-pulsed, unbroadened hybrid model at coupling ``g/2``.

    With ``t_final`` the model is evolved from the all-down vacuum state for
    that long; otherwise its steady state is used.
    """
    clean = replace(p, detunings=None)
    lv = build_hybrid(clean, n_spins, g=p.g / 2)
    if t_final is None:
        return wineland(steady_state(lv))
    d = lv.hilbert_dims[0]
    rho = np.zeros((d, d), complex)
    rho[0, 0] = 1.0
    start = DensityState.hybrid(rho, n_spins, lv.fock_dim, lv.spin_j)
    traj = evolve(lv, start, [0.0, t_final], method="BDF", rtol=1e-10, atol=1e-12)
    return wineland(traj.states[-1])


# --------------------------------------------------------------------------
# spin loss

def remove_spin(state: DensityState, index: int | None = None,
                rng: np.random.Generator | None = None) -> DensityState:
    """Trace out one spin of a product-space state.

    The site is ``index`` when given, otherwise drawn uniformly from ``rng``.
    """
    if state.layout != "full":
        raise LayoutError("spin removal acts on the full product-space layout")
    n = state.n_spins
    if n < 2:
        raise ValidationError("need at least two spins to remove one")
    if index is None:
        index = int((rng or np.random.default_rng()).integers(n))
    if not 0 <= index < n:
        raise ValidationError(f"spin index {index} out of range for N={n}")
    t = state.matrix.reshape((2,) * (2 * n))
    red = np.trace(t, axis1=index, axis2=index + n)
    d = 2 ** (n - 1)
    red = red.reshape(d, d)
    red = (red + red.conj().T) / 2
    return DensityState(layout="full", n_spins=n - 1, matrix=red / np.trace(red).real)


@dataclass(frozen=True)
class LossSchedule:
    """Loss times with a seeded PCG64 generator (``numpy.random.default_rng``)."""

    times: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValidationError("loss times must be strictly increasing")
        if any(t < 0 for t in self.times):
            raise ValidationError("loss times must be non-negative")

    def spin_indices(self, n0: int) -> list[int]:
        """Removed site for each event, uniform over the spins still present."""
        rng = np.random.default_rng(self.seed)
        if len(self.times) >= n0:
            raise ValidationError("schedule removes every spin")
        return [int(rng.integers(n0 - k)) for k in range(len(self.times))]


@dataclass
class SensingTrajectory:
    times: np.ndarray
    sy2: np.ndarray
    n_spins: np.ndarray
    removed: list[int]
    event_times: tuple[float, ...]


def _symmetric_initial(n: int) -> DensityState:
    j = n / 2
    d = n + 1
    rho = np.zeros((d, d), complex)
    rho[0, 0] = 1.0  # all spins down
    return DensityState(layout="dicke", n_spins=n, blocks={j: rho})


def sensing_trajectory(n0: int, gamma: float, r: float, schedule: LossSchedule, t_grid,
                       rho0: DensityState | None = None, max_spins: int = 8
                       ) -> SensingTrajectory:
    """``<Sy^2>(t)`` under the ideal reservoir with spins lost at scheduled times.

    Between losses the symmetric block is evolved exactly; each loss maps the
    state to the product space, traces out the drawn spin and folds back.
    """
    if n0 > max_spins:
        raise ValidationError(f"n0={n0} exceeds the sensing limit {max_spins}")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValidationError("t_grid must be strictly increasing with at least two points")
    if any(not t[0] < e <= t[-1] for e in schedule.times):
        raise ValidationError("loss event outside the time grid")
    picks = schedule.spin_indices(n0)
    state = rho0 or _symmetric_initial(n0)
    n = n0
    bounds = [t[0], *schedule.times, t[-1]]
    out_t, out_sy2, out_n = [], [], []
    for k in range(len(bounds) - 1):
        start, stop = bounds[k], bounds[k + 1]
        inner = t[(t > start) & (t < stop)]
        grid = np.concatenate([[start], inner, [stop]])
        lv = build_ideal(dicke_space(n), n / 2, gamma, r)
        traj = evolve(lv, state, grid, method="BDF", rtol=1e-10, atol=1e-12,
                      observables={"sy2": lambda st: spin_moments(st).sy2})
        sy2 = traj.observable("sy2")
        mask = np.isin(grid, t)
        if k > 0:
            mask[0] = False  # the event time was recorded before the loss
        out_t.extend(grid[mask])
        out_sy2.extend(sy2[mask])
        out_n.extend([n] * int(mask.sum()))
        state = traj.states[-1]
        if k < len(schedule.times):
            space = dicke_space(n)
            full = DensityState(layout="full", n_spins=n, matrix=embed_dicke(state, space))
            reduced = remove_spin(full, picks[k])
            n -= 1
            state = project_to_dicke(reduced, dicke_space(n))
            state = DensityState(layout="dicke", n_spins=n,
                                 blocks={n / 2: state.blocks[n / 2]})
    return SensingTrajectory(times=np.array(out_t), sy2=np.array(out_sy2),
                             n_spins=np.array(out_n), removed=picks,
                             event_times=tuple(schedule.times))


def steady_sy2(n_spins: int, gamma: float, r: float) -> float:
    """``<Sy^2>`` of the ideal steady state in the symmetric block."""
    lv = build_ideal(dicke_space(n_spins), n_spins / 2, gamma, r)
    return spin_moments(steady_state(lv)).sy2


def relaxation_time(traj: SensingTrajectory, event: int, target: float,
                    tol: float = 1e-6) -> float:
    """Time after loss ``event`` until ``<Sy^2>`` stays within ``tol`` of ``target``."""
    start = traj.event_times[event]
    stop = traj.event_times[event + 1] if event + 1 < len(traj.event_times) else math.inf
    sel = (traj.times > start) & (traj.times <= stop)
    ts, ys = traj.times[sel], traj.sy2[sel]
    bad = np.nonzero(np.abs(ys - target) > tol)[0]
    if bad.size == 0:
        return float(ts[0] - start) if ts.size else math.nan
    if bad[-1] == ts.size - 1:
        return math.inf
    return float(ts[bad[-1] + 1] - start)
