#!/usr/bin/env python3
"""Tabulate the characterizing two-form of the bundled Wick-type products.

For every bundled chart that carries a potential gradient, build the
wick-kind data for its two-form series, extract K(star) through the local
functions u_k and print it next to omega + Omega.  The two computations
are required to agree exactly; a mismatch would raise.
"""

import argparse
import time

from wickstar.cli import resolve_chart
from wickstar.fedosov import FedosovData, karabegov_form, parity_transport

CHARTS = ("c1_flat", "c2_flat", "disk", "disk_omega_nu", "disk_omega_inu",
          "cp1", "cp1_omega_nu")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--order", type=int, default=3)
    parser.add_argument("--mirror", action="store_true",
                        help="also extract the anti-Wick mirror form")
    args = parser.parse_args()
    K = 2 * args.order + 2
    for name in CHARTS:
        chart = resolve_chart(name)
        started = time.perf_counter()
        data = FedosovData("wick", chart, K=K)
        form = karabegov_form(data, args.order)
        print(f"{name:16s} K(star)  = {form.render()}   [{time.perf_counter()-started:.1f}s]")
        if args.mirror:
            mirror = parity_transport(data)
            mform = karabegov_form(mirror, args.order)
            print(f"{'':16s} K(mirror) = {mform.render()}")


if __name__ == "__main__":
    main()
