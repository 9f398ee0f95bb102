import json

import pytest

from snapshot_attack import cli, snapshot

FIPS = ["--key", "000102030405060708090a0b0c0d0e0f", "--pt", "00112233445566778899aabbccddeeff"]
FIPS_CT = "69c4e0d86a7b0430d8cdb78070b4c55a"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_verify_standard_vector(capsys, tmp_path):
    code, out = run(capsys, "verify", *FIPS, "--ct", FIPS_CT, "--outdir", str(tmp_path))
    assert code == 0 and json.loads(out) == {"ok": True}
    code, out = run(capsys, "verify", *FIPS, "--ct", "00" * 16, "--outdir", str(tmp_path))
    assert code == 1 and json.loads(out) == {"ok": False}


def test_no_arguments_is_usage_error(capsys):
    assert cli.main([]) == 2
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["bogus"], ["verify", "--key", "00"], ["bench", "--nope"]])
def test_bad_commands_exit_2(argv):
    assert cli.main(argv) == 2


def test_attack2_is_deterministic(capsys, tmp_path):
    argv = ["attack2", "--seed", "7", "--d", "0", "--cycles", "16:32", "--reduced",
            "--outdir", str(tmp_path)]
    outs = [run(capsys, *argv) for _ in range(2)]
    assert outs[0] == outs[1]
    res = json.loads(outs[0][1])
    assert res["outcome"] == "RECOVERED" and res["verified"] and res["key"] == res["true_key"]


def test_config_precedence(capsys, tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"seed": 5, "d": 3}))
    base = ["attack1", "--config", str(tmp_path / "c.json"), "--outdir", str(tmp_path)]
    code, out = run(capsys, *base)
    assert code == 0 and json.loads(out)["bits_read"] == 128 * 4
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 5 and manifest["d"] == 3
    code, out = run(capsys, *base, "--d", "1")
    assert json.loads(out)["bits_read"] == 128 * 2
    assert json.loads((tmp_path / "manifest.json").read_text())["d"] == 1


def test_config_rejects_unknown_key(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"colour": 1}))
    assert cli.main(["attack1", "--config", str(tmp_path / "c.json")]) == 2


def test_attack1_image_route(capsys, tmp_path):
    code, out = run(capsys, "attack1", "--d", "2", "--image", "--seed", "3", "--outdir", str(tmp_path))
    res = json.loads(out)
    assert code == 0 and res["recovered"] and res["verified"] == [True]


def test_simulate_snapshot_encode(capsys, tmp_path):
    o = ["--outdir", str(tmp_path), "--seed", "1"]
    code, out = run(capsys, "simulate", *FIPS, "--d", "1", "--cycles", "1:3", *o)
    assert code == 0 and json.loads(out)["ct"] == FIPS_CT
    code, out = run(capsys, "snapshot", "--d", "1", "--cycles", "16:18", "--reduced", *o)
    assert code == 0 and json.loads(out)["n"] == 180
    assert [s.cycle for s in snapshot.read_snapshots_csv(tmp_path / "snapshots.csv")] == [16, 17, 18]
    code, out = run(capsys, "encode", "--d", "0", "--cycles", "16:18", "--reduced", *o)
    res = json.loads(out)
    assert code == 0 and res["m"] == 64 and (tmp_path / "instance.cnf").exists()


def test_image_roundtrip(capsys, tmp_path):
    o = ["--outdir", str(tmp_path), "--seed", "2"]
    code, _ = run(capsys, "imggen", "--drift", "3,-2", "--flip", *o)
    assert code == 0
    code, out = run(capsys, "imgextract", "--image", str(tmp_path / "snapshot.pgm"),
                    "--reference", str(tmp_path / "reference.pgm"),
                    "--reference-bits", str(tmp_path / "reference_bits.csv"), "--flip", *o)
    res = json.loads(out)
    truth = cli._read_bits_csv(str(tmp_path / "bits.csv"))
    assert code == 0 and res["bits"] == "".join(str(b) for b in truth.reshape(-1))
    assert res["shift"] == [3, -2]


def test_attack_window_before_first_full_cycle(capsys, tmp_path):
    code, out = run(capsys, "attack2", "--cycles", "3:20", "--outdir", str(tmp_path))
    assert code == 1 and "error" in json.loads(out)


def test_missing_external_solver_exit_code(capsys, tmp_path):
    code, out = run(capsys, "attack2", "--d", "0", "--cycles", "16:17", "--reduced",
                    "--backend", "external", "--solver", "/nonexistent/solver",
                    "--outdir", str(tmp_path))
    assert code == 3 and json.loads(out)["error"].startswith("solver:")


def test_outdir_is_created(capsys, tmp_path):
    out = tmp_path / "new" / "dir"
    code, _ = run(capsys, "snapshot", "--d", "0", "--cycles", "16:16", "--reduced", "--outdir", str(out))
    assert code == 0 and (out / "snapshots.csv").exists() and (out / "manifest.json").exists()
