"""Runs both normal-form presets and reports their firing pattern.

    python scripts/normal_form_presets.py [--out results/nf]
"""

import argparse
from pathlib import Path

from burstcircuit.export import write_trace
from burstcircuit.normal_form import PRESETS, NfState, burst_z_loop, nf_integrate, relaxes_between_spikes
from burstcircuit.spikes import classify


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/nf")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, t_end in (("nf-tonic", 3000.0), ("nf-burst", 20000.0)):
        p = PRESETS[name]
        tr = nf_integrate(NfState(0.0, 0.0, 0.0), p, t_end, dt_max=0.5)
        write_trace(tr, out / f"{name}.csv", svg=True)
        print(f"{name} {p}: {classify(tr)}")
        if name == "nf-tonic":
            print(f"  returns to rest between spikes: {relaxes_between_spikes(tr, p)}")
        else:
            print(f"  {burst_z_loop(tr)}")


if __name__ == "__main__":
    main()
