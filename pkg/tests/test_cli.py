from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import pytest

from multiloc.cli import main
from multiloc.grammar import chunk_grammar, encode_text, render_concatenated
from multiloc.scenario import bundled_scenarios


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_encode_empty(capsys):
    assert run(capsys, "encode", "--message", "", "--chunk-width", "3") == (0, "1,3,3\n", "")


def test_decode_example_as_bits(capsys):
    code, out, _ = run(capsys, "decode", "--sequence", "1,2,8,3,2,5,3", "--chunk-width", "3", "--bits")
    assert (code, out) == (0, "100001\n")


def test_decode_example_as_text_is_codec_error(capsys):
    code, _, err = run(capsys, "decode", "--sequence", "1,2,8,3,2,5,3", "--chunk-width", "3")
    assert code == 1 and "NonZeroPadding" in err


def test_decode_from_file(capsys, tmp_path):
    f = tmp_path / "seq.txt"
    f.write_text("1,2,10,2,8,2,7,2,5,2,7,2,9,3,2,8,2,10,2,10,2,7,2,7,2,10,3\n")
    assert run(capsys, "decode", "--sequence", str(f), "--chunk-width", "3")[:2] == (0, "hello\n")


def test_legacy_concat(capsys):
    code, out, err = run(capsys, "encode", "--message", "hello", "--chunk-width", "3", "--legacy-concat")
    expected = render_concatenated(encode_text("hello", chunk_grammar(3)))
    assert (code, out) == (0, expected + "\n")
    assert "ambiguous" in err


def test_bad_flags_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["encode", "--chunk-width", "3"])
    assert exc.value.code == 2
    assert run(capsys, "encode", "--message", "x", "--chunk-width", "9")[0] == 2


def test_unencodable_text_exit_1(capsys):
    assert run(capsys, "encode", "--message", "é", "--chunk-width", "3")[0] == 1


def test_keygen(capsys, monkeypatch):
    code, out, _ = run(capsys, "keygen", "--modulus", "23", "--seed", "1")
    assert code == 0 and out.startswith("p=23 a=")
    monkeypatch.setenv("MULTILOC_SEED", "1")
    assert run(capsys, "keygen", "--modulus", "23")[1] == out
    monkeypatch.delenv("MULTILOC_SEED")
    assert run(capsys, "keygen", "--modulus", "23")[0] == 2
    assert run(capsys, "keygen", "--modulus", "22", "--seed", "1")[0] == 2


@pytest.mark.parametrize("name", ["happy.scn", "replay.scn", "mitm.scn", "eavesdrop.scn", "dos.scn", "three_stage.scn"])
def test_bundled_scenarios_pass(capsys, name):
    code, out, _ = run(capsys, "run", name)
    assert code == 0, out
    assert out.rstrip().endswith("# overall PASS")


def test_bundled_list():
    assert len(bundled_scenarios()) == 6


def test_happy_has_seven_events(capsys):
    _, out, _ = run(capsys, "run", "happy.scn")
    assert sum(1 for line in out.splitlines() if line[:1].isdigit()) == 7


def test_unknown_party_exit_2(capsys, tmp_path):
    f = tmp_path / "bad.scn"
    f.write_text("seed = 1\nsession = A Z hi\n")
    assert run(capsys, "run", str(f))[0] == 2


def test_failed_expectation_exit_1(capsys, tmp_path):
    f = tmp_path / "f.scn"
    f.write_text("seed = 1\nadversary = dos KDC drop=1.0\nexpect = ACCEPTED\n")
    assert run(capsys, "run", str(f))[0] == 1


def test_out_file(capsys, tmp_path):
    target = tmp_path / "report.txt"
    code, out, _ = run(capsys, "run", "replay.scn", "--out", str(target))
    assert code == 0 and out == ""
    assert "adv:replay" in target.read_text()


def test_suite_runs_in_parallel(capsys, tmp_path):
    src = Path(__file__).resolve().parents[1] / "src" / "multiloc" / "scenarios"
    for f in src.glob("*.scn"):
        (tmp_path / f.name).write_text(f.read_text())
    code, out, _ = run(capsys, "run", "--suite", str(tmp_path), "--jobs", "2")
    assert code == 0 and out.count("# overall PASS") == 6


def test_output_is_byte_stable():
    cmd = [sys.executable, "-m", "multiloc.cli", "run", "eavesdrop.scn", "--seed", "99"]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first == second and b"seed=99" in first
