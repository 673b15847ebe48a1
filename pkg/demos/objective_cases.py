"""Price taker vs profit maximizer vs welfare maximizer.

Each objective plans its own schedule; every schedule is then valued in the
same price-impact market, split into arbitrage profit and community welfare.

Run:  python demos/objective_cases.py
"""
from storagemdp import bundled_day, compare_cases


def main():
    day = bundled_day()
    cmp = compare_cases(day)
    print(f"{'case':<6}{'objective':<14}{'planned':>11}{'arbitrage':>11}{'welfare':>10}{'realized':>11}")
    for c in cmp.cases:
        r = c.realized
        print(f"{c.case:<6}{c.mode.value:<14}{c.planned:11.2f}{r.arbitrage:11.2f}{r.welfare:10.2f}{c.total:11.2f}")
    gain = cmp[3].total / cmp[2].total - 1.0
    print(f"welfare-max earns {100 * gain:.2f}% more than profit-max in total;")
    print(f"the price taker expected {cmp[1].planned:.2f} $ but realized {cmp[1].total:.2f} $")


if __name__ == "__main__":
    main()
