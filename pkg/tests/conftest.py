import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import cir_vix_chain, heston_chain, lognormal_chain  # noqa: E402
from vixlink.models import Heston  # noqa: E402

TAU = 30.0 / 365.0


@pytest.fixture(scope="session")
def heston_model():
    return Heston(kappa=2.0, ybar=0.04, gamma=0.25, rho=-0.7, y0=0.04)


@pytest.fixture(scope="session")
def heston_chain_set(heston_model):
    """Consistent synthetic chains: underlier slices at T and T + tau priced
    by Fourier inversion, vol-index calls priced against the exact
    square-root transition density.  T is short so the Holder margin is
    x i-resolvable and the 50% inflation flip is inside the admissible
    region."""
    T = 5.0 / 365.0
    strikes = np.geomspace(1.0 / 8.0, 8.0, 8001)
    spx_T = heston_chain(heston_model, 0.0, T, strikes)
    spx_Ttau = heston_chain(heston_model, 0.0, T + TAU, strikes)
    vix_slc, vix_fwd = cir_vix_chain(heston_model, TAU, 0.0, T,
                                     np.geomspace(0.005, 1.2, 2501))
    return {"model": heston_model, "t": 0.0, "T": T, "tau": TAU,
            "spx_T": spx_T, "spx_Ttau": spx_Ttau, "vix": vix_slc,
            "vix_forward": vix_fwd}


@pytest.fixture(scope="session")
def flat_chain_400():
    """Flat 20%-vol chain: 400 strikes spanning [F/8, 8F] at the index window."""
    fwd = 100.0
    strikes = np.geomspace(fwd / 8.0, fwd * 8.0, 400)
    return lognormal_chain(fwd, 0.2, 0.0, TAU, 0.0, strikes, kinds="otm")
