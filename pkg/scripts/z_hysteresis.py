"""Frozen-v_z transitions and attractor census for both configurations.

    python scripts/z_hysteresis.py [--step 0.01] [--beta 100]
"""

import argparse

import numpy as np

from burstcircuit.circuit import reference_config
from burstcircuit.engine import attractor_census, z_transition_scan


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--beta", type=float, default=100.0)
    args = ap.parse_args()
    grid = np.round(np.arange(3.0, 5.0 + 1e-9, args.step), 6)
    for name, r_i2 in (("bursting", 47e3), ("tonic", 34.5e3)):
        c = reference_config(r_i2=r_i2).with_beta(args.beta)
        z = z_transition_scan(c, grid)
        print(f"{name}: cycle->node at {z.vz_down:.3f} V, node->cycle at {z.vz_up:.3f} V, width {z.width:.3f} V")
        for vz in (3.4, 3.8, 4.1, 4.7):
            print(f"  v_z = {vz} V: {attractor_census(c, vz)}")


if __name__ == "__main__":
    main()
