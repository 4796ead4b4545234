"""Closed-loop bursting (ri2 = 47k) and tonic spiking (ri2 = 34.5k) runs.

    python scripts/simulate_modes.py [--out results/modes] [--t-end 40e-3] [--beta 100]
"""

import argparse
import time
from pathlib import Path

from burstcircuit.circuit import reference_config
from burstcircuit.engine import circuit_integrate
from burstcircuit.export import write_trace
from burstcircuit.spikes import classify


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/modes")
    ap.add_argument("--t-end", type=float, default=40e-3)
    ap.add_argument("--beta", type=float, default=100.0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, r_i2 in (("bursting", 47e3), ("tonic", 34.5e3)):
        c = reference_config(r_i2=r_i2).with_beta(args.beta)
        t0 = time.time()
        tr = circuit_integrate(None, c, args.t_end)
        write_trace(tr, out / f"{name}.csv", svg=True)
        print(f"{name} (ri2 = {r_i2:g}): {classify(tr)}  [{time.time() - t0:.1f} s]")


if __name__ == "__main__":
    main()
