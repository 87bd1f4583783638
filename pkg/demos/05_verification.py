#!/usr/bin/env python3
"""Numerical verification from first principles.

Every gradient in the library is hand-derived, so the package carries an
independent checking suite: convolutions are re-computed with naive
nested loops, gradients with central finite differences, and the
conv/transposed-conv pair is checked for exact adjointness
(<conv(x), y> == <x, convT(y)> — the property that makes the transposed
convolution the correct backward operator).

The same suite runs behind `symlab gradcheck`.

Run:  python3 demos/05_verification.py   (~4 s)
"""

import time

from symlab.gradcheck import run_all


def main():
    t0 = time.time()
    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL':4} {name:22} {detail}")
    print(f"\n{sum(ok for _, ok, _ in results)}/{len(results)} checks passed "
          f"in {time.time() - t0:.1f}s")
    if not all(ok for _, ok, _ in results):
        raise SystemExit(1)


if __name__ == "__main__":
    main()
