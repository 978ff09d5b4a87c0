"""Property-based checks of structural invariants."""
import math

import numpy as np
from hypothesis import given, settings, strategies as st

from spinsqueeze.analytic import dark_state
from spinsqueeze.liouvillian import (ModelParams, build_general_collective, build_spin_model,
                                     map_to_effective_reservoir, sigma_op)
from spinsqueeze.protocols import remove_spin
from spinsqueeze.spinspace import degeneracy, dicke_space, spin_matrices
from spinsqueeze.state import DensityState

SETTINGS = settings(max_examples=30, deadline=None)
FAST = settings(max_examples=10, deadline=None)
rates = st.floats(0.0, 1.0, allow_nan=False)
squeeze = st.floats(-2.0, 2.0, allow_nan=False)


@SETTINGS
@given(st.integers(1, 300))
def test_degeneracies_fill_the_product_space(n):
    space = dicke_space(n)
    assert sum(degeneracy(n, j) * round(2 * j + 1) for j in space.js) == 2 ** n


@SETTINGS
@given(st.integers(1, 40).map(lambda k: k / 2))
def test_spin_algebra(j):
    s = spin_matrices(j)
    comm = s["x"] @ s["y"] - s["y"] @ s["x"]
    assert np.max(np.abs(comm - 1j * s["z"])) < 1e-10 * max(1.0, j)
    cas = s["x"] @ s["x"] + s["y"] @ s["y"] + s["z"] @ s["z"]
    assert np.max(np.abs(cas - j * (j + 1) * np.eye(int(2 * j + 1)))) < 1e-9 * j * j


@SETTINGS
@given(st.integers(1, 20), st.floats(0.05, 4.0))
def test_dark_state_is_annihilated(half_n, r):
    n = 2 * half_n
    c = dark_state(n, n / 2, r).coefficients
    assert np.linalg.norm(sigma_op(n / 2, r) @ c) <= 1e-10


@SETTINGS
@given(st.integers(2, 5), rates, squeeze, rates, rates, rates, rates)
def test_generator_preserves_trace(n, gamma, r, n_th, gc, gphi, grel):
    lv = build_spin_model(dicke_space(n), ModelParams(gamma=gamma, r=r, n_th=n_th,
                                                      gamma_coll=gc, gamma_phi=gphi,
                                                      gamma_rel=grel))
    assert np.max(np.abs(lv.trace_row() @ lv.matrix)) <= 1e-12 * max(1.0, lv.scale)


@FAST
@given(st.floats(0.05, 1.0), rates, rates, rates, st.floats(0.05, 1.5))
def test_reservoir_mapping_is_exact(g, gp, gd, gu, r):
    eff = map_to_effective_reservoir(g, gp, gd, gu, r)
    space = dicke_space(4)
    a = build_general_collective(space, 2.0, g, gp, gd, gu, r)
    b = build_general_collective(space, 2.0, eff.gamma, eff.gamma_p, 0, 0, eff.r)
    assert abs(a.matrix - b.matrix).max() <= 1e-11 * max(1.0, g + gp + gd + gu)
    assert eff.gamma > 0 and eff.gamma_p >= 0


@SETTINGS
@given(st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_spin_removal_keeps_a_density_matrix(n, seed):
    rng = np.random.default_rng(seed)
    d = 2 ** n
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    red = remove_spin(DensityState.full(rho / np.trace(rho)), rng=rng)
    assert red.n_spins == n - 1
    assert math.isclose(red.trace().real, 1.0, abs_tol=1e-12)
    assert red.hermiticity_residual() < 1e-14
    assert red.min_eigenvalue() > -1e-13
