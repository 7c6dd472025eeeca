#!/usr/bin/env python3
"""Convert a MATPOWER case file (.m) into the plain-text case format read by iface.

Field mapping
-------------
MATPOWER ``mpc.bus``    column 1 (BUS_I)               -> ``bus <id> <kind> <status>``
                        column 2 (BUS_TYPE == 4)       -> status 0 (isolated), else 1
MATPOWER ``mpc.gen``    column 1 (GEN_BUS)             -> ``gen <bus> <status>``
                        column 8 (GEN_STATUS)          -> status (> 0 means in service)
MATPOWER ``mpc.branch`` columns 1, 2 (F_BUS, T_BUS)    -> ``branch <from> <to> <r> <x> <status>``
                        columns 3, 4 (BR_R, BR_X)      -> r, x in per unit
                        column 11 (BR_STATUS)          -> status

A bus is written with kind ``gen`` when at least one row of ``mpc.gen`` references it,
otherwise ``load``. Shunts, line charging, tap ratios and limits are dropped; the solver
only uses series reactances.

Usage: matpower_to_case.py case118.m > case118.txt
"""

import re
import sys


def parse_matrix(text, name):
    m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.S)
    if m is None:
        raise SystemExit("missing mpc.%s" % name)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%", 1)[0].strip().rstrip(";").strip()
        if line:
            rows.append([float(v) for v in line.split()])
    return rows


def convert(text, title):
    bus = parse_matrix(text, "bus")
    gen = parse_matrix(text, "gen")
    branch = parse_matrix(text, "branch")
    gen_buses = {int(g[0]) for g in gen}
    out = ["# iface power case", "# converted from %s" % title]
    out.append("# bus <id> <gen|load> <status>")
    for b in bus:
        bid = int(b[0])
        kind = "gen" if bid in gen_buses else "load"
        status = 0 if int(b[1]) == 4 else 1
        out.append("bus %d %s %d" % (bid, kind, status))
    out.append("# branch <from> <to> <r> <x> <status>")
    for br in branch:
        out.append("branch %d %d %s %s %d" % (int(br[0]), int(br[1]), repr(br[2]), repr(br[3]), int(br[10])))
    out.append("# gen <bus> <status>")
    for g in gen:
        out.append("gen %d %d" % (int(g[0]), 1 if g[7] > 0 else 0))
    return "\n".join(out) + "\n"


def main():
    if len(sys.argv) != 2:
        raise SystemExit(__doc__)
    with open(sys.argv[1]) as f:
        text = f.read()
    sys.stdout.write(convert(text, sys.argv[1].rsplit("/", 1)[-1]))


if __name__ == "__main__":
    main()
