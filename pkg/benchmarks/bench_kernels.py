"""Time the compiled kernels against the numpy fallback on preset-sized workloads.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import math
import time

from edgediff import backend, presets
from edgediff.forward import DiffractingEdge, Scene, Transmitter, field_parts, subtracted_power
from edgediff.geometry import EdgeSegment
from edgediff.imaging import OrientationSet, intensity_map
from edgediff.lattice import FocalSet, Schedule, design, eligibility, evaluate_field, metropolis_partition


def _workloads():
    im = presets.imaging_preset()
    lam, grid, plane = im["wavelength"], im["grid"], im["plane"]
    tx = im["transmitters"][0]
    edge = EdgeSegment.in_plane((0.1, 1.2, 0.05), math.radians(60), 0.1)
    scene = Scene(lam, [Transmitter(tx)], [DiffractingEdge(edge)])
    s_bar = subtracted_power(scene, grid)
    pixels = plane.points()[::7]
    phis = OrientationSet.uniform(10)
    lat = presets.lattice_preset("paper-lattice-4pt")
    elig = eligibility(lat["spec"], FocalSet(lat["targets"]))
    designed = design(lat["spec"], FocalSet(lat["targets"]), seed=0)
    return {
        "forward edge field (4116 rx)": lambda k: field_parts(scene, grid, kernels=k),
        f"imaging volume ({len(pixels)} px x 18 dirs)": lambda k: intensity_map(s_bar, pixels, tx, phis, lam, kernels=k),
        "metropolis 22x22 K=4, 1e4 steps": lambda k: metropolis_partition(elig, 0, Schedule(), kernels=k),
        "lattice field on 121x121 grid": lambda k: evaluate_field(designed, lat["eval_grid"], kernels=k),
    }


def _best_of(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    names = ["python"] + (["compiled"] if backend.NAME == "compiled" else [])
    if len(names) == 1:
        print("compiled kernels not built; timing the numpy fallback only")
    print(f"{'workload':42s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for label, fn in _workloads().items():
        t = [_best_of(lambda: fn(backend.get(n)), args.repeat) for n in names]
        row = f"{label:42s}" + "".join(f"{x * 1e3:10.1f}ms" for x in t)
        if len(t) == 2:
            row += f"{t[0] / t[1]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
