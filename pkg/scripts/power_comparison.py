"""Total power of SIM configurations against a fully digital array."""

import argparse

from simbf.experiment import PowerModel, total_power


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p-max", type=float, default=20.0, help="transmit power, dBm")
    args = ap.parse_args(argv)
    model = PowerModel()
    rows = [("SIM", 4, l, n) for n in (49, 100) for l in (2, 4, 6)]
    rows += [("digital", m, 0, 0) for m in (4, 8, 16, 32)]
    print(f"{'scheme':<8} {'M':>3} {'L':>3} {'N':>4} {'watts':>8}")
    for name, m, l, n in rows:
        print(f"{name:<8} {m:>3} {l:>3} {n:>4} {total_power(model, args.p_max, m, l, n):8.2f}")


if __name__ == "__main__":
    main()
