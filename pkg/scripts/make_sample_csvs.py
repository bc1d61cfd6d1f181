#!/usr/bin/env python3
"""Generate the small sample CSVs committed for the figure scripts.

Tiny scenario (2 antennas, 4 elements, 1-2 users) so the whole set builds
in a few minutes; rerunning reproduces the files byte-for-byte.
"""

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from starbc.bench import main  # noqa: E402

OUT = os.path.join(os.path.dirname(__file__), "..", "frontend", "samples")


def run(args):
    rc = main(args)
    if rc != 0:
        raise SystemExit(f"bench {' '.join(args)} failed with {rc}")


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    tiny = os.path.join(OUT, "_cfg_tiny.json")
    duo = os.path.join(OUT, "_cfg_duo.json")
    json.dump({"n_antennas": 2, "n_elements": 4, "n_ul": 1, "n_dl": 1},
              open(tiny, "w"))
    json.dump({"n_antennas": 2, "n_elements": 4, "n_ul": 1, "n_dl": 2},
              open(duo, "w"))

    run(["convergence", "--config", tiny, "--schemes", "proposed,cr_noma",
         "--seeds", "2", "--out", os.path.join(OUT, "convergence.csv")])
    run(["sweep_m", "--config", tiny, "--values", "4,6,8",
         "--schemes", "proposed,cr_noma", "--seeds", "2",
         "--out", os.path.join(OUT, "sweep_m.csv")])
    run(["sweep_si", "--config", tiny, "--values", "1e-10,1e-9,1e-8",
         "--schemes", "proposed", "--seeds", "2",
         "--out", os.path.join(OUT, "sweep_si.csv")])
    run(["tradeoff", "--config", tiny, "--values", "0,1,4",
         "--schemes", "proposed,sr_noma_sdma", "--seeds", "2",
         "--out", os.path.join(OUT, "tradeoff.csv")])
    run(["sweep_loc", "--config", tiny, "--values", "3,10,20",
         "--schemes", "proposed", "--seeds", "2",
         "--out", os.path.join(OUT, "sweep_loc.csv")])
    run(["sweep_users", "--config", tiny, "--values", "1,2",
         "--schemes", "proposed", "--seeds", "2",
         "--out", os.path.join(OUT, "sweep_users.csv")])
    run(["order_compare", "--config", duo, "--seeds", "2",
         "--out", os.path.join(OUT, "order_compare.csv")])
    os.remove(tiny)
    os.remove(duo)
    print("samples written to", OUT)
