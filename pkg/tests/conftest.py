import cmath

import numpy as np
import pytest
from hypothesis import strategies as st

from floquet_im.params import ModelParams

FF_ETA = 0.5j * cmath.pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def finite_floats(lo, hi):
    return st.floats(lo, hi, allow_nan=False, allow_infinity=False)


def complex_box(re_lo, re_hi, im_lo, im_hi):
    return st.builds(complex, finite_floats(re_lo, re_hi), finite_floats(im_lo, im_hi))


# generic anisotropy away from the sinh poles at i*k*pi
etas = complex_box(0.15, 1.1, 0.05, 1.2)

# spectral arguments in a moderate box; pole-adjacent draws are assumed away
# inside the tests
spectrals = complex_box(-1.2, 1.2, -1.0, 1.0)

gate_params = finite_floats(0.1, 1.5)

bath_weights = finite_floats(0.3, 3.0)


def make_params(eta, u, q=1.0, n_half=1, **kw):
    return ModelParams(eta=eta, u=u, q_weight=q, n_half=n_half, **kw)
