"""How much the starting level matters.

Schedules started empty, half full and full follow the same levels after a
few stages and separate again only for the forced return at the end.  The
second table shows the average value per quarter day for several
scheduling periods.

Run:  python demos/initial_level.py
"""
import numpy as np

from storagemdp import backward_induction, bundled_day, bundled_scenario, periodicity_study, rollout


def main():
    day = bundled_day()
    C = day.spec.capacity
    paths = np.array([
        rollout_levels(day.replace(x_init=x0)) for x0 in (0.0, C / 2, C)
    ])
    apart = np.nonzero(np.ptp(paths, axis=0) > 1e-9)[0]
    early = apart[apart < day.T // 2]
    late = apart[apart >= day.T // 2]
    print(f"levels coincide from stage {early.max() + 1 if early.size else 0} "
          f"to stage {late.min() - 1 if late.size else day.T} of {day.T}")

    st = periodicity_study(bundled_scenario(), [72, 144, 216, 288, 360, 432], [0.0, 10.0, 20.0], workers=4)
    print("period (stages)  windows   " + "  ".join(f"x0={x:<5g}" for x in st.x_inits))
    for T, n, row in zip(st.periodicities, st.windows, st.values):
        print(f"{T:15d}{n:9d}   " + "  ".join(f"{v:8.2f}" for v in row))


def rollout_levels(inst):
    return rollout(backward_induction(inst).policy, inst, seed=3).x


if __name__ == "__main__":
    main()
