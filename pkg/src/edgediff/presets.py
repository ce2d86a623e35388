"""Named geometries matching the desk-scale imaging and lattice experiments."""
from __future__ import annotations

import numpy as np

from .forward import wavelength_from_frequency
from .geometry import PlanarGrid
from .imaging import default_plane

IMAGING_FREQ = 5.32e9
IMAGING_TX = ((3.0, 0.0, 0.0), (0.0, 1.3, 1.2), (-3.0, 0.0, 0.0))
GRID_ROWS = 42  # vertical, 3 cm
GRID_COLS = 98  # horizontal, 1.4 cm
GRID_PITCH_V = 0.03
GRID_PITCH_H = 0.014

LATTICE_FREQ = 5.18e9
LATTICE_SPACING = 0.04
LATTICE_CENTER = (0.0, 1.0, 0.0)
LATTICE_TARGET_DEPTH = 2.5


def receiver_grid() -> PlanarGrid:
    """42 x 98 receivers in the plane y = 0, centered on the origin; u runs along +x, v along +z."""
    return PlanarGrid.centered((0.0, 0.0, 0.0), (1, 0, 0), (0, 0, 1),
                               GRID_COLS, GRID_ROWS, GRID_PITCH_H, GRID_PITCH_V)


def imaging_preset() -> dict:
    return {
        "wavelength": wavelength_from_frequency(IMAGING_FREQ),
        "transmitters": [np.array(t) for t in IMAGING_TX],
        "grid": receiver_grid(),
        "plane": default_plane(),
    }


def lattice_preset(name: str) -> dict:
    from .lattice import LatticeSpec

    lam = wavelength_from_frequency(LATTICE_FREQ)
    y = LATTICE_TARGET_DEPTH
    if name == "paper-lattice-1pt":
        spec = LatticeSpec(20, 20, LATTICE_SPACING, LATTICE_CENTER, lam)
        targets = [(0.3, y, 0.2)]
    elif name == "paper-lattice-4pt":
        spec = LatticeSpec(22, 22, LATTICE_SPACING, LATTICE_CENTER, lam)
        targets = [(-0.5, y, 0.4), (0.5, y, 0.4), (-0.5, y, -0.4), (0.5, y, -0.4)]
    else:
        raise KeyError(name)
    return {"spec": spec, "targets": targets, "eval_grid": eval_grid(y)}


def eval_grid(depth: float = LATTICE_TARGET_DEPTH, half_width: float = 1.2, pitch: float = 0.02) -> PlanarGrid:
    n = int(round(2 * half_width / pitch)) + 1
    return PlanarGrid.centered((0.0, depth, 0.0), (1, 0, 0), (0, 0, 1), n, n, pitch, pitch)


IMAGING_PRESETS = ("paper-imaging",)
LATTICE_PRESETS = ("paper-lattice-1pt", "paper-lattice-4pt")
