"""Benchmark the numba kernels against the pure-numpy fallback.

Runs both implementations on identical inputs for the pairing DP
(inside + outside) and the conv/pool layers, prints per-kernel timings
and speedups, and asserts the two backends agree.

Usage: python3 benchmarks/bench_kernels.py [--quick]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import rnadot.kernels.numba_impl as nb
import rnadot.kernels.numpy_impl as np_impl
from rnadot.bppm import EnergyModel, _log_weight_matrix
from rnadot.seqio import RnaSequence


def timed(fn, *args, repeats: int) -> tuple[float, object]:
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def row(name: str, t_np: float, t_nb: float) -> None:
    print(f"{name:<28} numpy {t_np * 1e3:9.2f} ms   numba {t_nb * 1e3:9.2f} ms"
          f"   speedup {t_np / t_nb:6.1f}x")


def bench_dp(n: int, prune: float, repeats: int, rng) -> None:
    seq = RnaSequence(
        id="bench", family="bench",
        residues="".join(rng.choice(list("ACGU"), size=n)),
    )
    model = EnergyModel()
    logw = _log_weight_matrix(seq, model)

    t_np, q_np = timed(np_impl.inside_log, logw, model.min_hairpin, repeats=repeats)
    t_nb, q_nb = timed(nb.inside_log, logw, model.min_hairpin, repeats=repeats)
    assert np.allclose(q_np, q_nb, atol=1e-12, equal_nan=True)
    row(f"inside n={n}", t_np, t_nb)

    args = (q_np, logw, model.min_hairpin, prune)
    t_np, p_np = timed(np_impl.outside_log, *args, repeats=repeats)
    t_nb, p_nb = timed(nb.outside_log, *args, repeats=repeats)
    assert np.allclose(np.exp(p_np), np.exp(p_nb), atol=1e-12)
    row(f"outside n={n} prune={prune:g}", t_np, t_nb)


def bench_conv(batch: int, cin: int, cout: int, side: int, repeats: int, rng) -> None:
    x = rng.standard_normal((batch, cin, side, side))
    w = rng.standard_normal((cout, cin, 3, 3))
    b = rng.standard_normal(cout)
    gy = rng.standard_normal((batch, cout, side, side))
    shape = f"{batch}x{cin}->{cout}@{side}"

    t_np, y_np = timed(np_impl.conv3x3_fwd, x, w, b, repeats=repeats)
    t_nb, y_nb = timed(nb.conv3x3_fwd, x, w, b, repeats=repeats)
    assert np.allclose(y_np, y_nb, atol=1e-10)
    row(f"conv3x3_fwd {shape}", t_np, t_nb)

    t_np, out_np = timed(np_impl.conv3x3_bwd, x, w, gy, repeats=repeats)
    t_nb, out_nb = timed(nb.conv3x3_bwd, x, w, gy, repeats=repeats)
    for a, c in zip(out_np, out_nb):
        assert np.allclose(a, c, atol=1e-10)
    row(f"conv3x3_bwd {shape}", t_np, t_nb)


def bench_pool(batch: int, ch: int, side: int, repeats: int, rng) -> None:
    x = rng.standard_normal((batch, ch, side, side))
    t_np, (y_np, i_np) = timed(np_impl.maxpool2_fwd, x, repeats=repeats)
    t_nb, (y_nb, i_nb) = timed(nb.maxpool2_fwd, x, repeats=repeats)
    assert np.array_equal(y_np, y_nb) and np.array_equal(i_np, i_nb)
    row(f"maxpool2_fwd {batch}x{ch}@{side}", t_np, t_nb)

    gy = rng.standard_normal(y_np.shape)
    t_np, g_np = timed(np_impl.maxpool2_bwd, i_np, gy, side, side, repeats=repeats)
    t_nb, g_nb = timed(nb.maxpool2_bwd, i_np, gy, side, side, repeats=repeats)
    assert np.array_equal(g_np, g_nb)
    row(f"maxpool2_bwd {batch}x{ch}@{side}", t_np, t_nb)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="smaller sizes, fewer repeats")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    repeats = 2 if args.quick else 3
    dp_sizes = [60, 120] if args.quick else [60, 120, 260]

    print("warming up the jit cache...")
    warm = np.random.default_rng(1)
    bench_conv(1, 1, 1, 8, repeats=1, rng=warm)
    bench_pool(1, 1, 8, repeats=1, rng=warm)
    bench_dp(16, 0.0, repeats=1, rng=warm)
    print()

    print("pairing DP")
    for n in dp_sizes:
        bench_dp(n, 0.0 if n <= 64 else 1e-6, repeats=repeats, rng=rng)
    print()
    print("network layers (training shapes)")
    bench_conv(32, 1, 8, 64, repeats=repeats, rng=rng)
    bench_conv(32, 8, 16, 32, repeats=repeats, rng=rng)
    bench_conv(32, 16, 32, 16, repeats=repeats, rng=rng)
    bench_pool(32, 8, 64, repeats=repeats, rng=rng)


if __name__ == "__main__":
    main()
