"""Reader and writer for the circuit deck format, and its mapping onto a CircuitConfig."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from importlib import resources
from typing import Literal

from .blocks import Cascade, DiffAmpParams, HysteresisParams, NonMonotoneParams, SaturationParams, TransistorModel, linearized_junction
from .circuit import VO, CircuitConfig, Stimulus, reference_config

log = logging.getLogger(__name__)

ElementKind = Literal["resistor", "capacitor", "npn", "vsource", "isource"]

_KINDS: dict[str, ElementKind] = {"r": "resistor", "c": "capacitor", "q": "npn", "v": "vsource", "i": "isource"}
_SCALE = {"meg": 6, "k": 3, "m": -3, "u": -6, "n": -9, "p": -12, "f": -15}
_NUMBER = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)([a-z]*)$", re.IGNORECASE)
_UNITS = ("v", "a", "s", "ohm", "hz")


class ParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class UnknownSuffix(ParseError):
    pass


class UndeclaredModel(ParseError):
    pass


class TopologyMismatch(ValueError):
    def __init__(self, roles: list[str]):
        super().__init__(", ".join(roles))
        self.roles = roles


@dataclass(frozen=True)
class Element:
    kind: ElementKind
    name: str
    nodes: tuple[int, ...]
    value: float | None = None  # ohm, farad, volt or ampere
    model: str | None = None  # npn only


@dataclass(frozen=True)
class Tran:
    step: float
    stop: float


@dataclass(frozen=True)
class Deck:
    elements: tuple[Element, ...]
    models: dict[str, TransistorModel] = field(default_factory=dict)
    controls: tuple[Tran, ...] = ()

    def element(self, name: str) -> Element:
        for e in self.elements:
            if e.name.lower() == name.lower():
                return e
        raise KeyError(name)

    def with_value(self, name: str, value: float) -> "Deck":
        els = tuple(replace(e, value=value) if e.name.lower() == name.lower() else e for e in self.elements)
        if els == self.elements and not any(e.name.lower() == name.lower() for e in self.elements):
            raise KeyError(name)
        return replace(self, elements=els)


def parse_value(token: str, line: int = 0) -> float:
    """Number with an optional SI scale suffix and unit, e.g. ``4.7u``, ``1meg``, ``5V``, ``40ms``."""
    m = _NUMBER.match(token.strip())
    if not m:
        raise ParseError(line, f"bad number {token!r}")
    mant, tail = m.group(1), m.group(2).lower()
    exp = 0
    for suf in ("meg", "k", "m", "u", "n", "p", "f"):
        if tail.startswith(suf) and (suf != "m" or not tail.startswith("meg")):
            rest = tail[len(suf) :]
            # "f" alone after a value is femto, never a unit
            if rest == "" or rest in _UNITS:
                exp, tail = _SCALE[suf], ""
                break
    if tail and tail not in _UNITS:
        raise UnknownSuffix(line, f"unknown suffix {m.group(2)!r} in {token!r}")
    try:
        return float(Decimal(mant).scaleb(exp))
    except InvalidOperation as e:  # pragma: no cover - regex already filters
        raise ParseError(line, f"bad number {token!r}") from e


def _node(tok: str, line: int) -> int:
    if not tok.isdigit():
        raise ParseError(line, f"node {tok!r} is not a non-negative integer")
    return int(tok)


def _logical_lines(text: str):
    """``(line number, card)`` pairs with continuation lines joined and comments dropped."""
    out: list[tuple[int, str]] = []
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("*"):
            continue
        if s.startswith("+"):
            if not out:
                raise ParseError(i, "continuation without a card")
            n, prev = out[-1]
            out[-1] = (n, prev + " " + s[1:].strip())
            continue
        out.append((i, s))
    return out


def _parse_model(line: int, card: str) -> tuple[str, TransistorModel]:
    m = re.match(r"^\.model\s+(\S+)\s+(\w+)\s*\((.*)\)\s*$", card, re.IGNORECASE | re.DOTALL)
    if not m:
        raise ParseError(line, "malformed .model card")
    name, kind, body = m.group(1), m.group(2).lower(), m.group(3)
    if kind != "npn":
        raise ParseError(line, f"unsupported model type {kind!r}")
    params = {}
    for item in body.split():
        if "=" not in item:
            raise ParseError(line, f"bad model parameter {item!r}")
        k, v = item.split("=", 1)
        params[k.lower()] = v
    if "bf" not in params:
        raise ParseError(line, f"model {name} has no bf")
    ignored = sorted(k for k in params if k != "bf")
    if ignored:
        log.warning("model %s: ignoring %s", name, ", ".join(ignored))
    return name, TransistorModel(beta=parse_value(params["bf"], line))


def _parse_element(line: int, toks: list[str]) -> Element:
    name = toks[0]
    kind = _KINDS.get(name[0].lower())
    if kind is None:
        raise ParseError(line, f"unknown card {name!r}")
    if kind == "npn":
        if len(toks) != 5:
            raise ParseError(line, "npn needs collector, base, emitter and model")
        return Element(kind, name, tuple(_node(t, line) for t in toks[1:4]), model=toks[4])
    if len(toks) < 4:
        raise ParseError(line, f"{kind} needs two nodes and a value")
    nodes = (_node(toks[1], line), _node(toks[2], line))
    rest = toks[3:]
    if kind in ("vsource", "isource") and rest[0].lower() == "dc":
        rest = rest[1:]
    if len(rest) != 1:
        raise ParseError(line, f"unexpected fields {' '.join(rest)!r}")
    value = parse_value(rest[0], line)
    if kind in ("resistor", "capacitor") and value <= 0:
        raise ParseError(line, f"{kind} value must be positive")
    return Element(kind, name, nodes, value)


def parse_deck(text: str) -> Deck:
    elements: list[Element] = []
    models: dict[str, TransistorModel] = {}
    controls: list[Tran] = []
    in_control = False
    for line, card in _logical_lines(text):
        low = card.lower()
        toks = card.split()
        if in_control:
            if low.startswith(".endc"):
                in_control = False
            elif toks[0].lower() == "tran":
                if len(toks) != 3:
                    raise ParseError(line, "tran needs step and stop")
                controls.append(Tran(parse_value(toks[1], line), parse_value(toks[2], line)))
            elif toks[0].lower() == "plot":
                log.info("line %d: plot directive ignored", line)
            else:
                raise ParseError(line, f"unsupported control {toks[0]!r}")
            continue
        if low.startswith(".end") and not low.startswith(".endc"):
            break
        if low.startswith(".control"):
            in_control = True
        elif low.startswith(".model"):
            name, mod = _parse_model(line, card)
            models[name] = mod
        elif low.startswith("."):
            raise ParseError(line, f"unknown directive {toks[0]!r}")
        else:
            elements.append(_parse_element(line, toks))
    if in_control:
        raise ParseError(0, ".control without .endc")
    for e in elements:
        if e.kind == "npn" and e.model not in models:
            raise UndeclaredModel(0, f"{e.name} uses undeclared model {e.model!r}")
    supplies = [e for e in elements if e.kind == "vsource"]
    if len(supplies) != 1:
        raise ParseError(0, f"need exactly one supply source, found {len(supplies)}")
    return Deck(tuple(elements), models, tuple(controls))


def serialize_deck(d: Deck) -> str:
    """Canonical text form; :func:`parse_deck` inverts it exactly."""
    lines = ["* canonical deck"]
    for e in d.elements:
        nodes = " ".join(str(n) for n in e.nodes)
        if e.kind == "npn":
            lines.append(f"{e.name} {nodes} {e.model}")
        elif e.kind in ("vsource", "isource"):
            lines.append(f"{e.name} {nodes} dc {e.value!r}")
        else:
            lines.append(f"{e.name} {nodes} {e.value!r}")
    for name, m in d.models.items():
        lines.append(f".model {name} npn (bf={m.beta!r})")
    if d.controls:
        lines.append(".control")
        lines.extend(f" tran {c.step!r} {c.stop!r}" for c in d.controls)
        lines.append(".endc")
    lines.append(".end")
    return "\n".join(lines) + "\n"


def reference_deck_text() -> str:
    return resources.files("burstcircuit").joinpath("data/complete.cir").read_text()


def load_deck(path: str) -> Deck:
    try:
        with open(path) as fh:
            return parse_deck(fh.read())
    except OSError as e:
        raise OSError(f"{path}: {e.strerror}") from e


def _template() -> dict[str, tuple[str, tuple[int, ...]]]:
    """Role name -> (kind, nodes) of the reference topology."""
    ref = reference_config()
    roles: dict[str, tuple[str, tuple[int, ...]]] = {r.name: ("resistor", (r.a, r.b)) for r in ref.resistors()}
    roles.update({q.name: ("npn", (q.c, q.b, q.e)) for q in ref.npns()})
    roles["ciF"] = ("capacitor", (1, 0))
    roles["coF"] = ("capacitor", (VO, 0))
    roles["vcc"] = ("vsource", (5, 0))
    return roles


def deck_to_config(d: Deck, beta_from_model: bool = False, model: TransistorModel | None = None) -> CircuitConfig:
    """Map a deck onto the burster template by element role.

    Every role must be present with the template's node pattern (two-terminal
    parts may be listed in either orientation). The transistor defaults to the
    1 mA linearized junction with beta 100; ``beta_from_model`` takes beta
    from the deck's ``.model`` card instead. An optional current source
    between node 18 and ground sets the applied-current baseline.
    """
    found: dict[str, Element] = {e.name.lower(): e for e in d.elements}
    bad = []
    for role, (kind, nodes) in _template().items():
        e = found.get(role.lower())
        if e is None or e.kind != kind:
            bad.append(role)
        elif kind == "npn" and e.nodes != nodes:
            bad.append(role)
        elif kind != "npn" and tuple(sorted(e.nodes)) != tuple(sorted(nodes)):
            bad.append(role)
    if bad:
        raise TopologyMismatch(bad)

    v = lambda role: found[role.lower()].value  # noqa: E731
    if model is None:
        beta = 100.0
        if beta_from_model:
            betas = {d.models[found[q].model].beta for q in ("q1", "q2", "q3", "q4", "q5", "q6")}
            if len(betas) != 1:
                raise ValueError("transistors use models with different bf")
            beta = betas.pop()
        model = linearized_junction(beta=beta)
    i_base = 0.0
    for e in d.elements:
        if e.kind == "isource" and sorted(e.nodes) == [0, VO]:
            # current flows from the first node through the source into the second
            i_base += e.value if e.nodes[1] == VO else -e.value
    sat = SaturationParams(r_b=v("rB1"), r_c=v("rC1"), r_e=v("rE1"), v_cc=v("vcc"), model=model)
    cfg = CircuitConfig(
        cascade=Cascade(
            NonMonotoneParams(sat, r_a1=v("Ra1"), r_a2=v("Ra2"), r_s=v("Rs")),
            DiffAmpParams(r_b2=v("rB2"), r_b3=v("rB3"), r_e_shared=v("rE2"), r_c2=v("rC2"), r_c3=v("rC3"), v_cc=v("vcc"), model=model),
            HysteresisParams(
                r_c_out=v("rC4"), r_c_comp=v("rC5"), r_b_in=v("rB4"), r_b_fb=v("rB5"), r_e_shared=v("rE4"), v_cc=v("vcc"), model=model
            ),
        ),
        r_i1=v("ri1"),
        r_i2=v("ri2"),
        c_i=v("ciF"),
        r_o1=v("ro1"),
        r_o2=v("ro2"),
        c_o=v("coF"),
        conditioner=SaturationParams(r_b=0.0, r_c=v("rC6"), r_e=v("rE6"), v_cc=v("vcc"), r_bias=v("rbi"), model=model),
        v_cc=v("vcc"),
        model=model,
        i_app=Stimulus(i_base),
    )
    cfg.check_timescales()
    return cfg
