"""Static characteristics of the block cascade with the bare switch model.

Writes the saturation curve against the smooth exponential oracle, the
non-monotone curve, and up/down mirrored-hysteresis sweeps.

    python scripts/static_blocks.py [--out results/static] [--vz 3.3]
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from burstcircuit.blocks import (
    TransistorModel,
    block_gains,
    mirrored_hysteresis_sweep,
    nonmonotone_eval,
    nonmonotone_extrema,
    saturation_eval,
    smooth_ce_oracle,
)
from burstcircuit.circuit import reference_config
from burstcircuit.export import fmt, write_sweep
from burstcircuit.pwl import loop_area


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/static")
    ap.add_argument("--vz", type=float, default=3.3)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cas = reference_config(model=TransistorModel()).cascade
    g = block_gains(cas.nonmono, cas.diffamp, cas.hyst)
    for k in ("g1", "g2", "g3", "g4", "g5", "g6", "g7", "vs1", "vs2", "vs3"):
        print(f"{k} = {getattr(g, k):.6g}")

    vy = np.linspace(0, 5, 5001)
    sat = cas.nonmono.sat
    with open(out / "saturation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("vy", "pwl", "smooth", "nonmonotone"))
        for v in vy:
            w.writerow((fmt(v), fmt(saturation_eval(sat, v)), fmt(smooth_ce_oracle(sat, v)), fmt(nonmonotone_eval(cas.nonmono, v))))
    mx, mn = nonmonotone_extrema(cas.nonmono)
    print(f"non-monotone maximum at {mx.input:.4f} V, minimum at {mn.input:.4f} V")

    grid = np.linspace(0, 5, 1001)
    up = mirrored_hysteresis_sweep(cas, args.vz, grid, "up")
    down = mirrored_hysteresis_sweep(cas, args.vz, grid[::-1], "down")
    write_sweep(up, out / "sweep_up.csv", svg=True)
    write_sweep(down, out / "sweep_down.csv", svg=True)
    print(f"loop area at v_z = {args.vz} V: {loop_area(grid, up.outputs, down.outputs[::-1]):.4f} V^2")
    for vz in np.arange(2.8, 4.21, 0.1):
        u = mirrored_hysteresis_sweep(cas, vz, grid, "up")
        d = mirrored_hysteresis_sweep(cas, vz, grid[::-1], "down")
        print(f"  v_z = {vz:.1f} V: area {loop_area(grid, u.outputs, d.outputs[::-1]):.4f}")


if __name__ == "__main__":
    main()
