#!/usr/bin/env python3
"""Characterize all six built-in topologies and print the stacked-vs-baseline
comparison the raw bench table leaves implicit.

Usage:
    python3 scripts/run_bench.py [--tstep 10p-style seconds] [--tstop seconds]

Runs in roughly 15 s at the default grid on one core.
"""

import argparse
import sys
import time

from lsbench.measure import characterize
from lsbench.netlist import elaborate
from lsbench.topologies import TOPOLOGY_IDS, gen

PAIRS = (("cls", "cls_stacked"), ("ssls", "ssls_stacked"), ("cmls", "cmls_stacked"))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tstep", type=float, default=None,
                    help="override transient step, seconds")
    ap.add_argument("--tstop", type=float, default=None,
                    help="override transient stop, seconds")
    args = ap.parse_args(argv)

    reports = {}
    for topo in TOPOLOGY_IDS:
        circ = elaborate(gen(topo))
        t0 = time.perf_counter()
        reports[topo] = characterize(circ, tstep=args.tstep, tstop=args.tstop)
        print(f"  {topo:<13s} characterized in {time.perf_counter() - t0:5.1f} s",
              file=sys.stderr)

    hdr = f"{'topology':<13s} {'P_avg [uW]':>11s} {'P_stat [nW]':>12s} " \
          f"{'t_pd,max [ns]':>14s} {'swing [V]':>18s}"
    print(hdr)
    print("-" * len(hdr))
    for topo in TOPOLOGY_IDS:
        r = reports[topo]
        stat = 0.5 * (r.power_static_lo + r.power_static_hi)
        print(f"{topo:<13s} {r.power_avg * 1e6:>11.4f} {stat * 1e9:>12.4f} "
              f"{r.delay_max * 1e9:>14.3f} {r.swing_lo:>8.3f}..{r.swing_hi:<8.3f}")

    print()
    print(f"{'pair':<6s} {'P_avg ratio':>12s} {'P_stat ratio':>13s} {'delay ratio':>12s}")
    for base, stacked in PAIRS:
        rb, rs = reports[base], reports[stacked]
        sb = 0.5 * (rb.power_static_lo + rb.power_static_hi)
        ss = 0.5 * (rs.power_static_lo + rs.power_static_hi)
        print(f"{base:<6s} {rb.power_avg / rs.power_avg:>12.3f} "
              f"{sb / ss:>13.3f} {rs.delay_max / rb.delay_max:>12.3f}")
    print("\nratios > 1 mean the stacked variant wins on power / loses on delay")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
