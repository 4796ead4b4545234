"""Command line entry point: ``burstcircuit <command> ...``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from .blocks import TransistorModel, block_gains, mirrored_hysteresis_sweep, nonmonotone_condition
from .engine import circuit_integrate, excitability_experiment
from .export import fmt, read_trace, write_sweep, write_trace
from .netlist import Deck, deck_to_config, load_deck, parse_value
from .normal_form import NF_TAU_FAST, PRESETS, NfState, nf_integrate
from .spikes import TooShort, classify

# Fast time constant assumed for circuit traces read back from CSV (rC4 * 1 nF).
CSV_TAU_FAST = 820e-9


def _grid(spec: str) -> np.ndarray:
    lo, hi, step = (parse_value(s) for s in spec.split(":"))
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def _config(args, deck: Deck | None = None):
    deck = deck or load_deck(args.deck)
    if getattr(args, "ri2", None):
        deck = deck.with_value("ri2", parse_value(args.ri2))
    return deck_to_config(deck, beta_from_model=args.beta_from_model)


def _report(tr) -> None:
    try:
        print(classify(tr))
    except TooShort as e:
        print(f"TooShort: {e}")


def cmd_sim(args) -> int:
    c = _config(args)
    tr = circuit_integrate(None, c, parse_value(args.t_end))
    write_trace(tr, args.out, svg=args.svg)
    _report(tr)
    return 0


def cmd_sweep(args) -> int:
    c = _config(args)
    grid = _grid(args.vy)
    if args.direction == "down":
        grid = grid[::-1]
    # static characteristics use the bare switch model
    bare = TransistorModel(beta=c.model.beta)
    sw = mirrored_hysteresis_sweep(c.cascade.with_model(bare), args.vz, grid, args.direction)
    write_sweep(sw, args.out, svg=args.svg)
    return 0


def cmd_nf(args) -> int:
    p = PRESETS[args.preset]
    tr = nf_integrate(NfState(0.0, 0.0, 0.0), p, args.t_end)
    write_trace(tr, args.out, svg=args.svg)
    _report(tr)
    return 0


def cmd_classify(args) -> int:
    tr = read_trace(args.trace)
    tr.tau_fast = NF_TAU_FAST if "x" in tr.names else CSV_TAU_FAST
    _report(tr)
    return 0


def cmd_excite(args) -> int:
    c = _config(args)
    amps = [parse_value(a) for a in args.amps.split(",")]
    rows = excitability_experiment(c, args.mode, amps, parse_value(args.dur))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("amplitude", "response_duration", "mean_spike_frequency", "n_spikes"))
        for r in rows:
            w.writerow((fmt(r.amplitude), fmt(r.response_duration), fmt(r.mean_spike_frequency), r.n_spikes))
            print(f"{r.amplitude:+.3g} A: {r.n_spikes} spikes over {r.response_duration * 1e3:.3f} ms, {r.mean_spike_frequency:.1f} Hz")
    return 0


def cmd_check(args) -> int:
    c = _config(args)
    cas = c.cascade.with_model(TransistorModel(beta=c.model.beta))
    g = block_gains(cas.nonmono, cas.diffamp, cas.hyst)
    for k in ("g1", "g2", "g3", "g4", "g5", "g6", "g7", "vs1", "vs2", "vs3"):
        print(f"{k} = {getattr(g, k):.6g}")
    ok5 = nonmonotone_condition(g)
    ok7 = g.g7 >= 1
    print(f"non-monotone condition g1*g2 >= g3: {'pass' if ok5 else 'FAIL'}")
    print(f"hysteresis condition g7 >= 1: {'pass' if ok7 else 'FAIL'}")
    return 0 if ok5 and ok7 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="burstcircuit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def deck_cmd(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("deck")
        p.add_argument("--beta-from-model", action="store_true", help="take beta from the .model bf field instead of 100")
        p.add_argument("--ri2", help="override ri2, e.g. 34.5k")
        p.set_defaults(fn=fn)
        return p

    p = deck_cmd("sim", cmd_sim, "integrate the closed-loop circuit")
    p.add_argument("--t-end", default="40ms")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")

    p = deck_cmd("sweep", cmd_sweep, "static vy -> vx characteristic at fixed vz")
    p.add_argument("--vz", type=float, required=True)
    p.add_argument("--vy", default="0:5:0.001", help="lo:hi:step")
    p.add_argument("--direction", choices=("up", "down"), default="up")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")

    p = sub.add_parser("nf", help="integrate a normal-form preset")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--t-end", type=float, default=500.0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(fn=cmd_nf)

    p = sub.add_parser("classify", help="classify the firing pattern of a trace CSV")
    p.add_argument("trace")
    p.set_defaults(fn=cmd_classify)

    p = deck_cmd("excite", cmd_excite, "step-current excitability table")
    p.add_argument("--mode", choices=("tonic", "bursting"), required=True)
    p.add_argument("--amps", required=True, help="comma separated, e.g. -20u,-40u,-80u")
    p.add_argument("--dur", default="5ms")
    p.add_argument("--out", required=True)

    deck_cmd("check", cmd_check, "block gains and design conditions")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
