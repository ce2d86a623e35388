import numpy as np
import pytest

from edgediff import backend, presets
from edgediff.geometry import PlanarGrid

BACKENDS = ["python"] + (["compiled"] if backend.NAME == "compiled" else [])


@pytest.fixture(scope="session")
def imaging():
    return presets.imaging_preset()


@pytest.fixture(scope="session")
def rx_grid():
    return presets.receiver_grid()


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return backend.get(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_grid(n_u=24, n_v=12, pitch_u=0.05, pitch_v=0.08):
    return PlanarGrid.centered((0, 0, 0), (1, 0, 0), (0, 0, 1), n_u, n_v, pitch_u, pitch_v)


def visible_placements(n, seed, grid, plane, txs, phis, half_length=0.02, min_support=30, margin=5):
    """Random interior edge placements whose midpoint conic hits ``min_support`` receivers in some view."""
    from edgediff.geometry import EdgeSegment, conic_signature

    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        iu = int(rng.integers(margin, plane.n_u - margin))
        iv = int(rng.integers(margin, plane.n_v - margin))
        q = int(rng.integers(len(phis)))
        e = EdgeSegment.in_plane(plane.point(iu, iv), phis.angles[q], half_length)
        if max(len(conic_signature(t, e, grid)) for t in txs) >= min_support:
            out.append((iu, iv, q, e))
    return out


def localized(vol, iu, iv, phi):
    pk = vol.peak_index()
    return max(abs(int(pk[0]) - iu), abs(int(pk[1]) - iv)) <= 1 and vol.orientation_map[pk] == phi
