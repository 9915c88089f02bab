#!/usr/bin/env python3
"""Smoke test for the wisernet_py extension module.

Build the extension first:

    cargo build -p wisernet-py --release

The script locates the built cdylib in target/{release,debug}, exposes
it as an importable module, and exercises the main bindings.
"""

import math
import pathlib
import random
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def import_extension():
    candidates = [
        ROOT / "target" / "release" / "libwisernet_py.so",
        ROOT / "target" / "debug" / "libwisernet_py.so",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit("build the extension first: cargo build -p wisernet-py --release")
    stage = pathlib.Path(tempfile.mkdtemp(prefix="wisernet_py_"))
    shutil.copy2(lib, stage / "wisernet_py.so")
    sys.path.insert(0, str(stage))
    import wisernet_py

    return wisernet_py


def main():
    wn = import_extension()
    rng = random.Random(7)
    checks = 0

    def check(name, ok):
        nonlocal checks
        checks += 1
        status = "PASS" if ok else "FAIL"
        print(f"{status}  {name}")
        if not ok:
            sys.exit(1)

    # Tensor round trip.
    t = wn.Tensor4((1, 2, 4, 4), [rng.uniform(-1, 1) for _ in range(32)])
    check("tensor shape", t.shape == (1, 2, 4, 4))

    # Haar block formulas: [[1,2],[3,4]] -> LL 5, LH -2, HL -1, HH 0.
    block = wn.Tensor4((1, 1, 2, 2), [1.0, 2.0, 3.0, 4.0])
    ll, lh, hl, hh = wn.dwt_haar(block)
    got = (ll.data()[0], lh.data()[0], hl.data()[0], hh.data()[0])
    check("haar block formulas", got == (5.0, -2.0, -1.0, 0.0))

    # Perfect reconstruction.
    x = wn.Tensor4((1, 3, 8, 8), [rng.uniform(-2, 2) for _ in range(3 * 64)])
    rec = wn.idwt_haar(*wn.dwt_haar(x))
    err = max(abs(a - b) for a, b in zip(rec.data(), x.data()))
    check(f"haar round trip (err {err:.2e})", err < 1e-5)

    # Skip filter: shape preserved, decorrelation term in [0, 1].
    s_tilde, ortho = wn.wiser_apply(x, seed=3)
    check("wiser output shape", s_tilde.shape == x.shape)
    check(f"wiser ortho in range ({ortho:.3f})", 0.0 <= ortho <= 1.0)

    # Segmentation metrics.
    a = [[y in (2, 3) and 2 <= x_ < 5 for x_ in range(8)] for y in range(8)]
    check("dsc identity", wn.dsc(a, a) == 100.0)
    b = [[y in (2, 3) and 4 <= x_ < 7 for x_ in range(8)] for y in range(8)]
    hd, degenerate = wn.hd95(a, b)
    check(f"hd95 translated ({hd:.2f}px)", not degenerate and 0 < hd <= 2.0)

    # Distribution distances on identical sets.
    vecs = [[rng.gauss(0, 1) for _ in range(4)] for _ in range(64)]
    check("mmd identical ~ 0", wn.mmd(vecs, vecs) < 1e-6)
    check("jsd identical = 0", wn.jsd(vecs, vecs) < 1e-12)
    check("frechet identical ~ 0", wn.frechet(vecs, vecs) < 1e-6)
    shifted = [[v + 3.0 for v in row] for row in vecs]
    check("mmd separates shifted sets", wn.mmd(vecs, shifted) > 0.1)

    # Ramp schedule branch points.
    check(
        "lambda schedule",
        wn.lambda_schedule(5, 5, 10, 0.1) == 0.0
        and math.isclose(wn.lambda_schedule(10, 5, 10, 0.1), 0.05)
        and wn.lambda_schedule(15, 5, 10, 0.1) == 0.1,
    )

    # Synthetic sample: cup stays inside disc.
    image, mask = wn.generate_sample("shift_lowlight", seed=11, size=32)
    check("sample image shape", image.shape == (1, 3, 32, 32))
    od = mask.data()[: 32 * 32]
    oc = mask.data()[32 * 32 :]
    check("cup inside disc", all(o <= d for o, d in zip(oc, od)) and sum(oc) > 0)

    # Filter adds parameters and compute.
    p0, m0 = wn.model_summary(False)
    p1, m1 = wn.model_summary(True)
    check("filter adds params and MACs", p1 > p0 and m1 > m0)

    print(f"all {checks} smoke checks passed")


if __name__ == "__main__":
    main()
