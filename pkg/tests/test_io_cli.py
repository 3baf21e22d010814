import json
import subprocess
import sys

import pytest

from conftest import assert_close
from qtamper import cli
from qtamper import constructions as cons
from qtamper.channels import KrausChannel
from qtamper.io import (
    ExpressionError,
    SchemaError,
    channel_from_json,
    channel_to_json,
    io_scheme,
    load_channel,
    parse_expression,
    save_channel,
    scheme_from_json,
    scheme_to_json,
)
from qtamper.qmath import SpaceShape
from qtamper.randomness import make_rng, random_aqecm, random_channel
from qtamper.schemes import correctness_gap, encryption_gap, tamper_profile


def test_scheme_round_trip_is_exact(tmp_path):
    s = random_aqecm(make_rng(0), n_keys=3)
    path = tmp_path / "s.json"
    io_scheme("save", path, s)
    t = io_scheme("load", path)
    assert t.keys == s.keys
    for k in s.keys.keys:
        assert_close(t.enc(k).kraus, s.enc(k).kraus, 1e-15)
        assert_close(t.dec(k).kraus, s.dec(k).kraus, 1e-15)


def test_otp_round_trip_metrics(tmp_path):
    s = cons.baseline_scheme("otp_accept")
    t = scheme_from_json(json.loads(json.dumps(scheme_to_json(s))))
    assert correctness_gap(t).value == correctness_gap(s).value
    assert encryption_gap(t).value == encryption_gap(s).value


def test_tuple_keys_survive(tmp_path):
    s = cons.conj_parity_pad(2)
    t = scheme_from_json(json.loads(json.dumps(scheme_to_json(s))))
    assert t.keys.keys == s.keys.keys
    assert abs(encryption_gap(t).value - 0.5) < 1e-12


def _doc():
    return json.loads(json.dumps(scheme_to_json(cons.baseline_scheme("otp_accept"))))


def test_malformed_probability_sum():
    doc = _doc()
    doc["key_dist"]["probs"] = [0.5, 0.6]
    with pytest.raises(SchemaError, match=r"^key_dist: .*sum"):
        scheme_from_json(doc)


@pytest.mark.parametrize("mutate,where", [
    (lambda d: d.update(schema=2), "schema"),
    (lambda d: d.update(kind="channel"), "kind"),
    (lambda d: d["keyed_channels"]["dec"].pop(), "keyed_channels.dec"),
    (lambda d: d["matrices"]["enc/0/0"].update(rows=3), "matrices.enc/0/0"),
    (lambda d: d["shapes"].update(cipher="C"), "shapes.cipher"),
])
def test_schema_errors_carry_location(mutate, where):
    doc = _doc()
    mutate(doc)
    with pytest.raises(SchemaError) as err:
        scheme_from_json(doc)
    assert str(err.value).startswith(where)


def test_bad_json_text(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{\n  nope")
    with pytest.raises(SchemaError, match="line 2"):
        io_scheme("load", p)


def test_channel_round_trip(tmp_path):
    c = random_channel(make_rng(1), SpaceShape.of(("A", 2)), SpaceShape.of(("B", 3, True)))
    save_channel(c, tmp_path / "c.json")
    back = load_channel(tmp_path / "c.json")
    assert back.out_shape == c.out_shape
    assert_close(back.kraus, c.kraus, 0)
    assert isinstance(channel_from_json(channel_to_json(c)), KrausChannel)


def test_expression_builds_s_plus():
    a = parse_expression("star(otp_accept, triv_reject)")
    b = cons.otp_with_te_key(cons.baseline_scheme("otp_accept"))
    assert a.name == b.name
    for k in a.keys.keys:
        assert_close(a.dec(k).choi(), b.dec(k).choi(), 1e-14)


def test_expression_arguments():
    s = parse_expression("double(conj_parity_pad(n=2))")
    assert len(s.keys) == 16 ** 2
    assert len(parse_expression("id_accept(m=3)").messages) == 3
    assert parse_expression("qm(otp_accept, 0.1)").name.startswith("qm_0.1")


@pytest.mark.parametrize("text", ["nope", "star(otp_accept)", "otp_accept +", "__import__('os')",
                                  "otp_accept.name"])
def test_expression_errors(text):
    with pytest.raises(ExpressionError):
        parse_expression(text)


# ---------------------------------------------------------------- command line


def test_cli_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 21 and out[0].startswith("T01")


def test_cli_run_json(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["run", "--case", "T02", "--trials", "10", "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["case_id"] == "T02" and doc["params"]["trials"] == 10 and doc["passed"]


def test_cli_run_errors(capsys):
    assert cli.main(["run", "--case", "T99"]) == 2
    assert cli.main(["run", "--case", "T01", "--dim-cap", "1000"]) == 2


def test_cli_scheme_eval(capsys):
    assert cli.main(["scheme", "eval", "--expr", "conj_parity_pad(n=2)", "--metric", "alpha"]) == 0
    assert abs(json.loads(capsys.readouterr().out)["value"] - 0.5) < 1e-12
    assert cli.main(["scheme", "eval", "--expr", "id_accept", "--metric", "profile", "--attack", "cgm"]) == 0
    assert abs(json.loads(capsys.readouterr().out)["min_delta"] - 1) < 1e-9
    assert cli.main(["scheme", "eval", "--expr", "bogus"]) == 2


def test_cli_loads_attack_file(tmp_path, capsys):
    s = cons.baseline_scheme("otp_accept")
    a = random_channel(make_rng(2), s.cipher_shape, s.cipher_shape + SpaceShape.of(("A", 2)))
    save_channel(a, tmp_path / "a.json")
    assert cli.main(["scheme", "eval", "--expr", "otp_accept", "--metric", "profile",
                     "--attack", str(tmp_path / "a.json")]) == 0
    got = json.loads(capsys.readouterr().out)["expectation"]
    assert abs(got - tamper_profile(s, a, 0, 1).expectation()) < 1e-12


def test_console_script_installed():
    r = subprocess.run([sys.executable, "-m", "qtamper.cli", "list"], capture_output=True, text=True)
    assert r.returncode == 0 and "T21" in r.stdout
