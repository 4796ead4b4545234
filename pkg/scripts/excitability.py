"""Step-current responses in tonic and bursting configurations.

    python scripts/excitability.py [--amps -40e-6,-80e-6,-160e-6] [--dur 2e-3]
"""

import argparse

from burstcircuit.circuit import reference_config
from burstcircuit.engine import BASELINE_FACTOR, excitability_experiment, holding_current


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--amps", default="-40e-6,-80e-6,-160e-6")
    ap.add_argument("--dur", type=float, default=2e-3)
    ap.add_argument("--beta", type=float, default=100.0)
    args = ap.parse_args()
    amps = [float(a) for a in args.amps.split(",")]
    for mode, r_i2 in (("tonic", 34.5e3), ("bursting", 47e3)):
        c = reference_config(r_i2=r_i2).with_beta(args.beta)
        hold = holding_current(c)
        print(f"{mode}: holding current {hold * 1e6:.1f} uA, baseline {BASELINE_FACTOR[mode]:g}x")
        for r in excitability_experiment(c, mode, amps, args.dur):
            print(
                f"  {r.amplitude * 1e6:+.0f} uA: {r.n_spikes} spikes over {r.response_duration * 1e3:.2f} ms, "
                f"{r.mean_spike_frequency:.0f} Hz"
            )


if __name__ == "__main__":
    main()
