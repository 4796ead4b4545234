import logging
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from burstcircuit.blocks import TransistorModel, block_gains, nonmonotone_condition
from burstcircuit.circuit import reference_config
from burstcircuit.netlist import (
    Element,
    ParseError,
    TopologyMismatch,
    Tran,
    UndeclaredModel,
    UnknownSuffix,
    reference_deck_text,
    deck_to_config,
    parse_deck,
    parse_value,
    serialize_deck,
)

DECK = reference_deck_text()
SUPPLY = "vcc 5 0 dc 5V\n"


def test_reference_listing_is_bundled_verbatim():
    assert DECK.startswith("* this is complete.cir file\n")
    assert "rC1  5  2 16k" in DECK
    assert DECK.rstrip().endswith(".end")


def test_resistor_card():
    d = parse_deck(SUPPLY + "rC1  5  2 16k\n")
    assert d.elements[1] == Element("resistor", "rC1", (5, 2), 16000.0)


def test_comment_lines_ignored():
    d = parse_deck("* voltage resources\n" + SUPPLY)
    assert len(d.elements) == 1


def test_model_card_keeps_bf(caplog):
    with caplog.at_level(logging.WARNING):
        d = parse_deck(DECK)
    assert d.models["2n2222bis"].beta == 255.9
    assert "ignoring" in caplog.text
    q1 = d.element("q1")
    assert q1.kind == "npn" and q1.nodes == (2, 3, 4) and q1.model == "2n2222bis"


def test_control_block_and_plot_note(caplog):
    with caplog.at_level(logging.INFO):
        d = parse_deck(DECK)
    assert d.controls == (Tran(1e-6, 40e-3),)
    assert "plot directive ignored" in caplog.text


def test_end_terminates():
    d = parse_deck(SUPPLY + ".end\nthis would not parse\n")
    assert len(d.elements) == 1


@pytest.mark.parametrize(
    "tok,val",
    [("16k", 16e3), ("4.7u", 4.7e-6), ("22n", 22e-9), ("14.34f", 14.34e-15), ("1meg", 1e6), ("5V", 5.0), ("40ms", 0.04), ("1us", 1e-6), ("470", 470.0), ("1e3", 1e3), (".2847", 0.2847)],
)
def test_parse_value(tok, val):
    assert parse_value(tok) == pytest.approx(val, rel=1e-15)


def test_unknown_suffix():
    with pytest.raises(UnknownSuffix):
        parse_value("16x")
    with pytest.raises(UnknownSuffix):
        parse_deck(SUPPLY + "r1 1 0 3q\n")


@given(st.decimals(min_value=Decimal("0.001"), max_value=Decimal("999"), places=4), st.sampled_from(["meg", "k", "m", "u", "n", "p", "f"]))
def test_suffix_precision(mant, suf):
    exp = {"meg": 6, "k": 3, "m": -3, "u": -6, "n": -9, "p": -12, "f": -15}[suf]
    exact = mant.scaleb(exp)
    got = parse_value(f"{mant}{suf}")
    assert abs(Decimal(got) - exact) <= abs(exact) * Decimal("1e-9")


def test_errors():
    with pytest.raises(ParseError) as e:
        parse_deck(SUPPLY + "r1 1\n")
    assert e.value.line == 2
    with pytest.raises(ParseError):
        parse_deck(SUPPLY + "x1 1 2 sub\n")
    with pytest.raises(ParseError):
        parse_deck(SUPPLY + ".dc vcc 0 5 1\n")
    with pytest.raises(ParseError):
        parse_deck(SUPPLY + "r1 a 0 1k\n")
    with pytest.raises(UndeclaredModel):
        parse_deck(SUPPLY + "q1 2 3 4 nomodel\n")
    with pytest.raises(ParseError):
        parse_deck("r1 1 0 1k\n")  # no supply


def test_roundtrip_reference_deck():
    d = parse_deck(DECK)
    assert parse_deck(serialize_deck(d)) == d


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30), st.floats(1e-12, 1e7)), min_size=1, max_size=8))
def test_roundtrip_random(rs):
    text = SUPPLY + "".join(f"r{i} {a} {b} {v!r}\n" for i, (a, b, v) in enumerate(rs))
    d = parse_deck(text)
    assert parse_deck(serialize_deck(d)) == d


def test_reference_deck_maps_to_reference_config():
    assert deck_to_config(parse_deck(DECK)) == reference_config()


def test_beta_from_model():
    c = deck_to_config(parse_deck(DECK), beta_from_model=True)
    assert c.model.beta == 255.9
    assert deck_to_config(parse_deck(DECK)).model.beta == 100.0


def test_tonic_variant():
    d = parse_deck(DECK).with_value("ri2", 34.5e3)
    assert deck_to_config(d) == reference_config(r_i2=34.5e3)


def test_missing_role_is_reported():
    text = "\n".join(line for line in DECK.splitlines() if not line.startswith("coF"))
    with pytest.raises(TopologyMismatch) as e:
        deck_to_config(parse_deck(text))
    assert e.value.roles == ["coF"]


def test_rewired_role_is_reported():
    text = DECK.replace("rE6 19  0 20", "rE6 19  1 20")
    with pytest.raises(TopologyMismatch) as e:
        deck_to_config(parse_deck(text))
    assert e.value.roles == ["rE6"]


def test_current_source_sets_baseline():
    d = parse_deck(DECK.replace(".control", "iapp 0 18 dc 20u\n.control"))
    assert deck_to_config(d).i_app(0.0) == pytest.approx(20e-6)


def test_reference_deck_design_conditions():
    c = deck_to_config(parse_deck(DECK))
    cas = c.cascade.with_model(TransistorModel())
    g = block_gains(cas.nonmono, cas.diffamp, cas.hyst)
    assert nonmonotone_condition(g)
    assert g.g7 >= 1
    c.check_timescales()
