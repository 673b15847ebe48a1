"""Solve one day of the bundled market with both solvers and simulate it.

Run:  python demos/quickstart.py
"""
import numpy as np

from storagemdp import backward_induction, bundled_day, rollout, solve_threshold


def main():
    day = bundled_day()
    print(f"{day.T} five-minute stages, {day.spec.capacity:g} MWh storage, "
          f"{day.chain.n_states} renewable states, objective {day.mode.value}")

    sdp = backward_induction(day)
    thr = solve_threshold(day)
    print(f"expected value   SDP {sdp.optimal_value:10.3f} $   threshold {thr.optimal_value:10.3f} $")

    # one renewable path, both policies
    for name, res in (("SDP", sdp), ("threshold", thr)):
        tr = rollout(res.policy, day, seed=11)
        print(f"{name:>9}: arbitrage {tr.arbitrage_sum:9.3f} $  welfare {tr.welfare_sum:8.3f} $  "
              f"charged {tr.u.sum():6.2f} MWh  discharged {tr.w.sum():6.2f} MWh")

    # the storage flattens the prices it trades against
    tr = rollout(sdp.policy, day, seed=11)
    print(f"price variance before storage {np.var(tr.p_ante, ddof=1):.2f}, after {np.var(tr.p_post, ddof=1):.2f}")
    hours = np.arange(0, day.T, 24)
    print("level every two hours (MWh):", " ".join(f"{x:4.1f}" for x in tr.x[hours]))


if __name__ == "__main__":
    main()
