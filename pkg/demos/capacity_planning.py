"""Value of storage capacity and the investment that pays off.

Run:  python demos/capacity_planning.py
"""
from storagemdp import bundled_day
from storagemdp.studies import capacity_curve, plan_capacity


def main():
    day = bundled_day()
    curve = capacity_curve(day, [5, 10, 15, 20, 30, 40], workers=4)
    print("capacity (MWh)   value ($)   marginal value ($/MWh)")
    slopes = list(curve.slopes) + [None]
    for c, v, s in zip(curve.capacities, curve.values, slopes):
        print(f"{c:14g}{v:12.2f}   {'' if s is None else f'{s:.2f}'}")
    for rho in (25.0, 30.0, 31.0, 33.0, 40.0):
        plan = plan_capacity(curve, rho)
        print(f"capital cost {rho:5.1f} $/MWh -> build {plan.c_star:g} MWh "
              f"(slope crossing near {plan.c_star_refined:.1f} MWh)")


if __name__ == "__main__":
    main()
