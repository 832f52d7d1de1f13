"""Shared small-scale fixtures and exact oracles used across the suite."""

import numpy as np
import pytest

from framepick import dptrack, pcabasis, rfsim

M_SMALL, L_SMALL = 192, 48
GRID_SMALL = (64, 48)


def exhaustive_min_cost(line1, line2, d_max, lam):
    """Minimal DP objective by evaluating every displacement path.

    Builds the full (2*d_max+1)^m cost tensor with broadcasting, so it is
    independent of the recursion under test. Only viable for small m.
    """
    line1 = np.asarray(line1, dtype=np.float64)
    line2 = np.asarray(line2, dtype=np.float64)
    m = line1.shape[0]
    offs = np.arange(-d_max, d_max + 1)
    n_d = offs.size
    data = np.empty((m, n_d))
    for i in range(m):
        data[i] = (line1[i] - line2[np.clip(i + offs, 0, m - 1)]) ** 2

    total = np.zeros((n_d,) * m)
    for i in range(m):
        sh = [1] * m
        sh[i] = n_d
        total += data[i].reshape(sh)
    step = lam * np.abs(offs[:, None] - offs[None, :]).astype(np.float64)
    for i in range(m - 1):
        sh = [1] * m
        sh[i] = n_d
        sh[i + 1] = n_d
        total += step.reshape(sh)
    return float(total.min())


@pytest.fixture(scope="session")
def jit_warm():
    """Compile the numba kernels before any timed assertions."""
    rng = np.random.default_rng(0)
    a = rng.standard_normal(96)
    dptrack.dp_displacement(a, a, dptrack.DpParams(d_max=4))
    return True


@pytest.fixture(scope="session")
def psf_small():
    return rfsim.PsfParams()


@pytest.fixture(scope="session")
def basis_small(psf_small):
    fields = rfsim.make_training_fields(21, 60, M_SMALL, L_SMALL, psf=psf_small)
    return pcabasis.fit_pca(fields, 12, grid=GRID_SMALL)


@pytest.fixture(scope="session")
def seq_small(jit_warm):
    root = np.random.SeedSequence(31)
    script = rfsim.make_motion_script(root.spawn(1)[0], 11, "events")
    return rfsim.simulate_sequence(root, 12, script, m=M_SMALL, l=L_SMALL)
