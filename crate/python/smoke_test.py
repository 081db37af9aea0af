"""Smoke test for the sqgreg extension module.

Build first with
    cargo build --release -p sqg-py --features extension-module
then run `python3 python/smoke_test.py`; the script locates the built library.
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libsqgreg.so"
        if lib.exists():
            break
    else:
        sys.exit("libsqgreg.so not found; build the sqg-py crate with --features extension-module")
    tmp = pathlib.Path(tempfile.mkdtemp()) / "sqgreg.so"
    shutil.copy(lib, tmp)
    spec = importlib.util.spec_from_file_location("sqgreg", tmp)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    sq = load()
    g = sq.Grid(32, 2 * math.pi, 0.45)
    f = sq.Field.random_bandlimited(g, 5.0, seed=3)
    assert abs(f.l2_norm() - 1.0) < 1e-12
    assert abs(f.mean()) < 1e-14

    u1, u2 = f.riesz_velocity()
    assert len(u1.values()) == 32 * 32

    r = sq.run(f, 2e-3, 0.2, stride=10)
    assert r.completed and len(r) == len(r.times)
    assert r.max_relative_energy_defect < 1e-3, r.max_relative_energy_defect
    assert all(b <= a * (1 + 1e-10) for a, b in zip(r.linf, r.linf[1:]))

    e_s, e_v, e_nl, total = r.excess((math.pi, math.pi), 0.2, 0.1)
    assert abs(total - (e_s + e_v + e_nl)) < 1e-12

    _, ratio = f.extension_energy(levels=48)
    assert 0.1 < ratio < 10.0

    beta, limit, a0, _, p = sq.dimensions(0.5)
    assert abs(limit - 2.0) < 1e-12 and abs(p - 6.0) < 1e-12
    assert abs(sq.dimensions(a0)[1] - 3.0) < 1e-9

    slope, _ = sq.box_counting([(0.1, 0.2, 0.3)], [0.5, 0.25, 0.125, 0.0625])
    assert abs(slope) < 1e-12
    assert sq.vitali([(0, 0, 0, 1), (5, 0, 0, 1)]) == [0, 1]

    try:
        sq.Grid(7)
    except ValueError:
        pass
    else:
        raise AssertionError("odd grid accepted")
    print("sqgreg smoke test passed")


if __name__ == "__main__":
    main()
