import math

import numpy as np
import pytest
import scipy.linalg as la

from spinsqueeze.analytic import dark_state
from spinsqueeze.errors import LayoutError, ValidationError
from spinsqueeze.liouvillian import HybridParams
from spinsqueeze.measure import spin_moments
from spinsqueeze.protocols import (LossSchedule, PulseSequence, Segment, dd_average_hamiltonian,
                                   pulse_unitary, relaxation_time, remove_spin,
                                   sensing_trajectory, sequence_a, sequence_a_without_switching,
                                   sequence_b, simulate_dd, steady_sy2)
from spinsqueeze.spinspace import dicke_space, embed_dicke, full_space_ops, spin_matrices
from spinsqueeze.state import DensityState


def _params(detunings):
    return HybridParams(g=1.0, kappa_sqz=10.0, r=0.5, n_cut=4, detunings=detunings)



def _random_full_state(rng, n):
    a = rng.normal(size=(2 ** n, 2 ** n)) + 1j * rng.normal(size=(2 ** n, 2 ** n))
    rho = a @ a.conj().T
    return DensityState.full(rho / np.trace(rho))


# --- dynamical decoupling --------------------------------------------------

@pytest.mark.parametrize("seed", range(4))
def test_sequence_b_cancels_inhomogeneity(seed):
    det = tuple(np.random.default_rng(seed).uniform(-0.5, 0.5, 2))
    assert dd_average_hamiltonian(sequence_b(1.0), _params(det), 2).residual <= 1e-12


def test_sequence_a_cancels_inhomogeneity():
    assert dd_average_hamiltonian(sequence_a(1.0), _params((0.2, -0.13)), 2).residual <= 1e-12


def test_sequence_a_needs_coupling_switching():
    res = dd_average_hamiltonian(sequence_a_without_switching(1.0), _params((0.2, -0.13)), 2)
    assert res.residual > 0.1


def test_uncancelled_part_is_linear_in_detuning():
    seq = sequence_a_without_switching(1.0)
    dev = [dd_average_hamiltonian(seq, _params((0.2 * k, -0.1 * k)), 2).deviation
           for k in (1, 2, 3)]
    # equal detuning steps give equal deviation steps
    assert np.max(np.abs((dev[2] - dev[1]) - (dev[1] - dev[0]))) < 1e-12
    assert np.max(np.abs(dev[1] - dev[0])) > 0


def test_composite_pulse_is_z_rotation():
    s = spin_matrices(0.5)
    u = pulse_unitary("composite_pi_z", s)
    target = la.expm(-1j * math.pi * s["z"])
    phase = np.vdot(target.ravel(), u.ravel()) / 2
    assert abs(abs(phase) - 1) < 1e-12
    assert np.max(np.abs(u - phase * target)) < 1e-12


def test_sequence_validation_names_the_segment():
    with pytest.raises(ValidationError, match=r"segments\[1\]\.pulse"):
        PulseSequence(1.0, (Segment(0.5, "H0", "pi_x"), Segment(0.5, "H1", "pi_q")))
    with pytest.raises(ValidationError, match=r"segments\[0\]\.hamiltonian"):
        PulseSequence(1.0, (Segment(1.0, "H9"),))
    with pytest.raises(ValidationError, match="sum"):
        PulseSequence(1.0, (Segment(0.5, "H0"), Segment(0.4, "H1")))
    with pytest.raises(ValidationError):
        sequence_b(0.0)


def test_pulses_must_close():
    seq = PulseSequence(1.0, (Segment(1.0, "H0", "pi_x"),))
    # a single pi_x per period is not the identity on the pair
    with pytest.raises(ValidationError, match="identity"):
        dd_average_hamiltonian(seq, _params((0.1, 0.0)), 2)


def test_dd_trajectory_stays_physical():
    tj = simulate_dd(sequence_b(0.1), _params((0.2, -0.13)), 2, 20)
    assert len(tj.xi2) == 21
    assert np.all(np.isfinite(tj.xi2))


# --- spin loss ---------------------------------------------------------------

def test_removal_from_all_down():
    rho = np.zeros((8, 8))
    rho[0, 0] = 1
    red = remove_spin(DensityState.full(rho), 1)
    expect = np.zeros((4, 4))
    expect[0, 0] = 1
    assert np.allclose(red.matrix, expect, atol=1e-15)


@pytest.mark.parametrize("site", [0, 1])
def test_triplet_zero_reduces_to_maximally_mixed(site):
    psi = np.array([0, 1, 1, 0]) / math.sqrt(2)
    red = remove_spin(DensityState.full(np.outer(psi, psi)), site)
    assert np.allclose(red.matrix, np.eye(2) / 2, atol=1e-15)


def test_removal_requires_full_layout():
    st = DensityState.pure_dicke(dicke_space(2), 1.0, np.array([1.0, 0, 0]))
    with pytest.raises(LayoutError):
        remove_spin(st, 0)
    with pytest.raises(ValidationError):
        remove_spin(DensityState.full(np.eye(4) / 4), 2)


def test_removal_preserves_trace_and_hermiticity(rng):
    red = remove_spin(_random_full_state(rng, 4), rng=rng)
    assert red.n_spins == 3
    assert abs(red.trace() - 1) < 1e-12
    assert red.hermiticity_residual() < 1e-14
    assert red.min_eigenvalue() > -1e-14


def test_removal_commutes_with_global_rotation(rng):
    n, axis, angle = 4, np.array([0.3, -0.5, 0.8]), 1.1
    def rot(m):
        ops = full_space_ops(m).collective
        gen = sum(a * ops[k].toarray() for a, k in zip(axis, "xyz"))
        return la.expm(-1j * angle * gen)
    rho = _random_full_state(rng, n)
    u = rot(n)
    a = remove_spin(DensityState.full(u @ rho.matrix @ u.conj().T), 2)
    v = rot(n - 1)
    b = v @ remove_spin(rho, 2).matrix @ v.conj().T
    assert np.max(np.abs(a.matrix - b)) < 1e-12


def test_loss_raises_sy2_of_dark_state():
    n, r = 6, 2.5
    space = dicke_space(n)
    st = DensityState.pure_dicke(space, n / 2, dark_state(n, n / 2, r).vector)
    before = spin_moments(st).sy2
    red = remove_spin(DensityState.full(embed_dicke(st, space)), 0)
    assert spin_moments(red).sy2 > before


def test_loss_schedule_is_deterministic():
    a = LossSchedule((1.0, 2.0, 3.0), seed=7).spin_indices(8)
    assert a == LossSchedule((1.0, 2.0, 3.0), seed=7).spin_indices(8)
    assert all(0 <= k < 8 - i for i, k in enumerate(a))
    with pytest.raises(ValidationError):
        LossSchedule((2.0, 1.0))
    with pytest.raises(ValidationError):
        LossSchedule((1.0, 2.0)).spin_indices(2)


def test_no_losses_gives_plateau():
    tr = sensing_trajectory(4, 1.0, 1.0, LossSchedule(()), np.linspace(0, 200, 41))
    assert tr.sy2[-1] == pytest.approx(steady_sy2(4, 1.0, 1.0), abs=1e-6)
    assert np.all(tr.n_spins == 4)


def test_event_outside_grid_rejected():
    with pytest.raises(ValidationError, match="outside"):
        sensing_trajectory(4, 1.0, 1.0, LossSchedule((500.0,)), np.linspace(0, 100, 11))
    with pytest.raises(ValidationError):
        sensing_trajectory(12, 1.0, 1.0, LossSchedule(()), np.linspace(0, 1, 3))


def test_plateaus_follow_spin_number():
    sch = LossSchedule((150.0, 300.0), seed=3)
    tr = sensing_trajectory(6, 1.0, 1.0, sch, np.linspace(0, 450, 301))
    for event, n in enumerate((5, 4)):
        target = steady_sy2(n, 1.0, 1.0)
        stop = sch.times[event + 1] if event + 1 < len(sch.times) else tr.times[-1]
        at_stop = tr.sy2[np.searchsorted(tr.times, stop)]
        assert at_stop == pytest.approx(target, abs=1e-6)
        assert math.isfinite(relaxation_time(tr, event, target))
