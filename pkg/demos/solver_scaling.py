"""Wall-clock scaling of the two solvers with the storage grid size.

Run:  python demos/solver_scaling.py
"""
from storagemdp import benchmark, bundled_day


def main():
    day = bundled_day()
    rep = benchmark(day, [25, 50, 100, 200, 400], repeats=3)
    print(f"{'n_soc':>6}{'SDP (ms)':>11}{'threshold (ms)':>16}{'speedup':>9}{'value gap':>12}")
    for j, n in enumerate(rep.grids):
        gap = rep.values[1, j] / rep.values[0, j] - 1.0
        print(f"{n:6d}{1e3 * rep.seconds[0, j]:11.2f}{1e3 * rep.seconds[1, j]:16.2f}"
              f"{rep.speedup()[j]:8.1f}x{gap:12.2e}")
    print(f"fitted time exponents: SDP {rep.exponent('sdp'):.2f}, threshold {rep.exponent('threshold'):.2f}")


if __name__ == "__main__":
    main()
