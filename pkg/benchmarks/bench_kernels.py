"""Compare the numba and pure-numpy kernel backends.

Run twice, once per backend (the backend is chosen at import time):

    python benchmarks/bench_kernels.py
    PHKIT_DISABLE_NUMBA=1 python benchmarks/bench_kernels.py

or let the script spawn both variants itself:

    python benchmarks/bench_kernels.py --both
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time


def bench() -> None:
    from dataclasses import replace

    import numpy as np

    from phkit import _kernels
    from phkit.chemistry import BUILTIN, Solution
    from phkit.fluidics import diffuse_step, make_channel, ph_at_cells

    print(f"backend: {_kernels.backend()}")

    fill = Solution(contents={BUILTIN["citric-acid"]: 0.01, BUILTIN["sodium-hydroxide"]: 0.002})
    ch = make_channel(0.002, 0.0006, 257, fill, None, None, diffusivity=1e-9)
    rng = np.random.default_rng(0)
    ch = replace(ch, field=ch.field * rng.uniform(0.2, 1.0, ch.field.shape))
    dt = 0.4 * ch.max_stable_dt

    # warm-up (includes JIT compilation when numba is active)
    warm = diffuse_step(ch, dt)
    ph_at_cells(warm)

    t0 = time.perf_counter()
    cur = ch
    for _ in range(5_000):
        cur = diffuse_step(cur, dt)
    t_diffuse = time.perf_counter() - t0
    print(f"diffusion: 5000 FTCS steps on 2x257 grid: {t_diffuse:.3f}s "
          f"({5000 / t_diffuse:.0f} steps/s)")

    t0 = time.perf_counter()
    for _ in range(50):
        ph_at_cells(cur)
    t_ph = time.perf_counter() - t0
    print(f"pH solve: 50 batched solves of 257 cells: {t_ph:.3f}s "
          f"({50 * 257 / t_ph:.0f} cells/s)")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--both", action="store_true", help="run both backends as subprocesses")
    args = parser.parse_args()
    if not args.both:
        bench()
        return
    for disable in ("", "1"):
        env = dict(os.environ, PHKIT_DISABLE_NUMBA=disable)
        subprocess.run([sys.executable, __file__], env=env, check=True)
        print()


if __name__ == "__main__":
    main()
