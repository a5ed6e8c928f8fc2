"""Crude Monte Carlo reference price of the Asian call.

Reproduces the frozen reference value used for the option MSE columns.

    python3 scripts/reference_price.py --paths 1000000 --seed 6
"""

import argparse

from adastrat.finance import REFERENCE_PATHS, REFERENCE_SEED, AsianOptionSpec, reference_price


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=REFERENCE_PATHS)
    ap.add_argument("--seed", type=int, default=REFERENCE_SEED)
    ap.add_argument("--strike", type=float, default=120.0)
    args = ap.parse_args()
    price, se = reference_price(AsianOptionSpec(strike=args.strike), args.paths, args.seed)
    print(f"price {price!r} stderr {se!r}")


if __name__ == "__main__":
    main()
