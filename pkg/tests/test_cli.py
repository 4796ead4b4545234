import numpy as np
import pytest

from burstcircuit.cli import main
from burstcircuit.engine import Trace
from burstcircuit.export import write_trace
from burstcircuit.netlist import reference_deck_text


@pytest.fixture
def deck(tmp_path):
    p = tmp_path / "complete.cir"
    p.write_text(reference_deck_text())
    return str(p)


def test_check_passes_on_reference_deck(deck, capsys):
    assert main(["check", deck]) == 0
    out = capsys.readouterr().out
    assert "g1 = 1.44" in out
    assert "FAIL" not in out


def test_check_fails_when_hysteresis_loses_gain(tmp_path, capsys):
    p = tmp_path / "weak.cir"
    p.write_text(reference_deck_text().replace("rC4 13  5 820", "rC4 13  5 20"))
    assert main(["check", str(p)]) == 1
    assert "g7 >= 1: FAIL" in capsys.readouterr().out


def test_sweep_writes_csv(deck, tmp_path):
    out = tmp_path / "sw.csv"
    assert main(["sweep", deck, "--vz", "3.3", "--vy", "0:5:0.01", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "vy,vx,branch,stability"
    assert len(lines) == 502


def test_classify_reads_trace(tmp_path, capsys):
    t = np.arange(0, 40e-3, 1e-5)
    vx = np.where((t % 1e-3) < 5e-5, 1.0, 5.0)
    p = tmp_path / "tr.csv"
    write_trace(Trace(t, np.column_stack([vx, 0 * t, 0 * t])), p)
    assert main(["classify", str(p)]) == 0
    assert capsys.readouterr().out.startswith("Tonic")


def test_nf_preset(tmp_path, capsys):
    out = tmp_path / "nf.csv"
    assert main(["nf", "--preset", "nf-tonic", "--t-end", "500", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "t,x,y,z"


def test_unknown_preset_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["nf", "--preset", "nope", "--out", str(tmp_path / "x.csv")])
