import json
import subprocess
import sys

import jsonschema
import pytest

from dcsteg.cli import load_schema, read_key, run

SCHEMA = load_schema()


def call(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def call_json(capsys, *argv):
    code, out, err = call(capsys, "--json", *argv)
    summary = json.loads(out.strip().splitlines()[-1])
    jsonschema.validate(summary, SCHEMA)
    assert summary["exit_code"] == code
    return code, summary, err


@pytest.fixture(scope="module")
def work(tmp_path_factory, sample_dir):
    d = tmp_path_factory.mktemp("cli")
    (d / "secret.txt").write_bytes(b"meet at the old mill")
    return d


@pytest.fixture(scope="module")
def index_file(work, sample_dir):
    out = work / "index.bin"
    assert run(["index", "build", "--input", str(sample_dir), "-o", str(out)]) == 0
    return out


def test_help(capsys):
    code, out, _ = call(capsys, "--help")
    assert code == 0 and "hide" in out and "extract" in out


def test_subcommand_help(capsys):
    code, out, _ = call(capsys, "index", "build", "--help")
    assert code == 0 and "--threshold" in out


def test_unknown_flag(capsys):
    assert call(capsys, "index", "build", "--bogus")[0] == 1
    assert call(capsys, "frobnicate")[0] == 1
    assert call(capsys)[0] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dcsteg", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "dcsteg" in proc.stdout


def test_schema_rejects_inconsistent_summary():
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"command": "x", "status": "ok", "exit_code": 2}, SCHEMA)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"command": "x", "status": "error", "exit_code": 2}, SCHEMA)


def test_index_build_summary(capsys, sample_dir, tmp_path):
    code, s, _ = call_json(capsys, "index", "build", "--input", sample_dir, "-m", 6, "-n", 3, "-L", 8,
                           "-o", tmp_path / "i.bin")
    assert code == 0 and s["metrics"]["m"] == 6 and s["metrics"]["L"] == 8
    assert 0.75 <= s["metrics"]["T"] <= 0.95
    code, s, _ = call_json(capsys, "index", "build", "--input", sample_dir, "--threshold", "0.8",
                           "-o", tmp_path / "j.bin")
    assert s["metrics"]["T"] == 0.8


def test_round_trip(capsys, work, index_file, key_file, sample_dir):
    enc, rec = work / "payload.enc", work / "rec.bin"
    code, s, _ = call_json(capsys, "hide", "--index", index_file, "--secret", work / "secret.txt",
                           "--key", key_file, "-o", enc, "--plaintext", work / "payload.plain",
                           "--history", work / "hist.json")
    assert code == 0 and s["metrics"]["segments"] > 0
    assert (work / "payload.plain").read_bytes()[:4] == b"CVSA"
    assert json.loads((work / "hist.json").read_text())
    code, s, _ = call_json(capsys, "extract", "--payload", enc, "--key", key_file, "--videos", sample_dir,
                           "--index", index_file, "-o", rec)
    assert code == 0
    assert rec.read_bytes() == (work / "secret.txt").read_bytes()


def test_wrong_key(capsys, work, index_file, key_file, sample_dir, tmp_path):
    enc = tmp_path / "p.enc"
    assert call(capsys, "hide", "--index", index_file, "--secret", work / "secret.txt", "--key", key_file,
                "-o", enc)[0] == 0
    other = tmp_path / "other.key"
    other.write_text("ab" * 32)
    code, s, err = call_json(capsys, "extract", "--payload", enc, "--key", other, "--videos", sample_dir,
                             "--index", index_file, "-o", tmp_path / "r.bin")
    assert code == 2 and "payload authentication failed" in err
    assert s["error"] == "payload authentication failed"


def test_key_from_environment(capsys, monkeypatch, work, index_file, key_file, tmp_path):
    monkeypatch.setenv("DCSTEG_KEY_FILE", str(key_file))
    assert call(capsys, "hide", "--index", index_file, "--secret", work / "secret.txt",
                "-o", tmp_path / "p.enc")[0] == 0


def test_missing_key_is_usage_error(capsys, monkeypatch, work, index_file, tmp_path):
    monkeypatch.delenv("DCSTEG_KEY_FILE", raising=False)
    code, s, _ = call_json(capsys, "hide", "--index", index_file, "--secret", work / "secret.txt",
                           "-o", tmp_path / "p.enc")
    assert code == 1 and "key" in s["error"]


def test_read_key_formats(tmp_path):
    (tmp_path / "hex").write_text("00" * 32 + "\n")
    assert read_key(tmp_path / "hex") == bytes(32)
    (tmp_path / "raw").write_bytes(bytes(range(32)))
    assert read_key(tmp_path / "raw") == bytes(range(32))


def test_bad_key_file(capsys, work, index_file, tmp_path):
    (tmp_path / "k").write_bytes(b"short")
    code, _, err = call(capsys, "hide", "--index", index_file, "--secret", work / "secret.txt",
                        "--key", tmp_path / "k", "-o", tmp_path / "p.enc")
    assert code == 1 and "key must be" in err


def test_missing_video_exit_2(capsys, work, index_file, key_file, sample_dir, tmp_path):
    enc = tmp_path / "p.enc"
    call(capsys, "hide", "--index", index_file, "--secret", work / "secret.txt", "--key", key_file, "-o", enc)
    partial = tmp_path / "videos"
    partial.mkdir()
    (partial / "static.y4m").write_bytes((sample_dir / "static.y4m").read_bytes())
    code, _, _ = call(capsys, "extract", "--payload", enc, "--key", key_file, "--videos", partial,
                      "--index", index_file, "-o", tmp_path / "r.bin")
    assert code == 2


def test_default_index_next_to_videos(capsys, work, key_file, sample_dir, tmp_path):
    vids = tmp_path / "v"
    vids.mkdir()
    for p in sample_dir.iterdir():
        (vids / p.name).write_bytes(p.read_bytes())
    assert run(["index", "build", "--input", str(vids), "-o", str(vids / "index.bin")]) == 0
    enc = tmp_path / "p.enc"
    call(capsys, "hide", "--index", vids / "index.bin", "--secret", work / "secret.txt", "--key", key_file,
         "-o", enc)
    assert call(capsys, "extract", "--payload", enc, "--key", key_file, "--videos", vids,
                "-o", tmp_path / "r.bin")[0] == 0
    assert (tmp_path / "r.bin").read_bytes() == (work / "secret.txt").read_bytes()


def test_extract_after_frame_deletion(capsys, work, key_file, sample_dir, tmp_path):
    idx = tmp_path / "pan.bin"
    pan_only = tmp_path / "pan"
    pan_only.mkdir()
    (pan_only / "pan.y4m").write_bytes((sample_dir / "pan.y4m").read_bytes())
    assert run(["index", "build", "--input", str(pan_only), "-L", "4", "-o", str(idx)]) == 0
    enc = tmp_path / "p.enc"
    assert call(capsys, "hide", "--index", idx, "--secret", work / "secret.txt", "--key", key_file,
                "-o", enc)[0] == 0
    attacked = tmp_path / "att"
    code, s, _ = call_json(capsys, "attack", "--input", pan_only, "--spec", "frame-delete:indices=40;90",
                           "-o", attacked)
    assert code == 0
    code, s, _ = call_json(capsys, "extract", "--payload", enc, "--key", key_file, "--videos", attacked,
                           "--index", idx, "-o", tmp_path / "r.bin")
    assert code == 0 and s["metrics"]["deletions_detected"] == 2


def test_attack_writes_metadata(capsys, sample_dir, tmp_path):
    code, s, _ = call_json(capsys, "--seed", 9, "attack", "--input", sample_dir, "--spec",
                           "salt-pepper:density=0.01", "-o", tmp_path / "a")
    assert code == 0 and s["seed"] == 9
    meta = json.loads((tmp_path / "a" / "attack.json").read_text())
    assert meta["seed"] == 9 and meta["stochastic"] and meta["videos"] == ["pan", "static", "texture"]


def test_attack_bad_spec(capsys, sample_dir, tmp_path):
    code, s, _ = call_json(capsys, "attack", "--input", sample_dir, "--spec", "warp:x=1", "-o", tmp_path)
    assert code == 2 and "unknown attack" in s["error"]


def test_attack_external_failure(capsys, sample_dir, tmp_path):
    code, s, _ = call_json(capsys, "attack", "--input", sample_dir, "--spec",
                           "external-compress:command=no-such-tool-xyz {in} {out}", "-o", tmp_path / "x")
    assert code == 2 and s["metrics"]["failed_videos"] == 3


def test_index_stats_and_audit(capsys, index_file, sample_dir, tmp_path):
    code, out, _ = call(capsys, "index", "stats", "--index", index_file)
    assert code == 0 and out.startswith("value,bits,count")
    code, s, _ = call_json(capsys, "index", "audit", "--index", index_file, "--input", sample_dir,
                           "--sample", 200)
    assert code == 0 and s["metrics"]["mismatches"] == 0
    attacked = tmp_path / "noisy"
    call(capsys, "attack", "--input", sample_dir, "--spec", "gauss-noise:sigma=0.01", "-o", attacked)
    code, s, _ = call_json(capsys, "index", "audit", "--index", index_file, "--input", attacked)
    assert code == 2 and s["metrics"]["mismatch_rate"] > 0


def test_evaluate_capacity(capsys, index_file, tmp_path):
    code, s, _ = call_json(capsys, "evaluate", "capacity", "--index", index_file, "-o", tmp_path / "c.csv")
    assert code == 0 and s["metrics"]["C_E"] == 64 and s["metrics"]["L_a"] == 4 + 3 + 7 + 2
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "scope,L,C_E,max,L_a,C_RE" and len(lines) == 5


def test_evaluate_accuracy(capsys, sample_dir, tmp_path):
    code, s, _ = call_json(capsys, "evaluate", "accuracy", "--input", sample_dir, "-m", 6, "-n", 3, "-L", 8,
                           "--spec", "scale:factor=1", "--spec", "gamma:gamma=1",
                           "--method", "max-dc", "--method", "adj-dc", "-o", tmp_path / "a.csv")
    assert code == 0
    rows = (tmp_path / "a.csv").read_text().splitlines()
    assert len(rows) == 5 and all(r.endswith(",100.0") for r in rows[1:])
    code, _, _ = call(capsys, "evaluate", "accuracy", "--input", sample_dir, "--spec", "frame-delete:indices=1")
    assert code == 1


def test_evaluate_model(capsys, sample_dir, tmp_path):
    code, s, _ = call_json(capsys, "model", "--input", sample_dir, "-m", 13, "-n", 3, "--steps", 101,
                           "-o", tmp_path / "pdf.csv", "--fits", tmp_path / "fits.csv")
    assert code == 0 and s["metrics"]["sigma_rate2"] < s["metrics"]["sigma_rate1"]
    assert len((tmp_path / "pdf.csv").read_text().splitlines()) == 1 + 2 * 101
    assert (tmp_path / "fits.csv").read_text().startswith("series,mu,sigma,n,excluded,attack,seed")


def test_pipeline_command(capsys, work, key_file, sample_dir, tmp_path):
    code, s, _ = call_json(capsys, "pipeline", "--input", sample_dir, "--secret", work / "secret.txt",
                           "--key", key_file, "--attack", "salt-pepper:density=0.001", "--out-dir", tmp_path)
    assert code == 0 and s["metrics"]["accuracy"] >= 80
    assert set(p.name for p in tmp_path.iterdir()) >= {"index.bin", "payload.enc", "payload.plain",
                                                        "recovered.bin", "report.csv", "report.txt"}
    code, out, _ = call(capsys, "pipeline", "--input", sample_dir, "--secret", work / "secret.txt",
                        "--key", key_file)
    assert code == 0 and "recovered_ok" in out


def test_config_precedence(capsys, monkeypatch, sample_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"m": 6, "n": 3, "L": 5, "seed": 4}))
    _, s, _ = call_json(capsys, "--config", cfg, "index", "build", "--input", sample_dir, "-o", tmp_path / "i")
    assert (s["metrics"]["m"], s["metrics"]["L"]) == (6, 5)
    # flag beats file
    _, s, _ = call_json(capsys, "--config", cfg, "index", "build", "--input", sample_dir, "-L", 7,
                        "-o", tmp_path / "i")
    assert s["metrics"]["L"] == 7
    # file via environment; env seed beats file seed; flag beats env
    monkeypatch.setenv("DCSTEG_CONFIG", str(cfg))
    _, s, _ = call_json(capsys, "attack", "--input", sample_dir, "--spec", "gamma:gamma=1", "-o", tmp_path / "a")
    assert s["seed"] == 4
    monkeypatch.setenv("DCSTEG_SEED", "5")
    _, s, _ = call_json(capsys, "attack", "--input", sample_dir, "--spec", "gamma:gamma=1", "-o", tmp_path / "a")
    assert s["seed"] == 5
    _, s, _ = call_json(capsys, "attack", "--seed", 6, "--input", sample_dir, "--spec", "gamma:gamma=1",
                        "-o", tmp_path / "a")
    assert s["seed"] == 6


def test_bad_config_file(capsys, sample_dir, tmp_path):
    (tmp_path / "c.json").write_text("[1, 2]")
    code, _, _ = call(capsys, "--config", tmp_path / "c.json", "index", "stats", "--index", "x")
    assert code == 1


def test_samples_and_keygen(capsys, tmp_path):
    code, s, _ = call_json(capsys, "samples", "-o", tmp_path / "s")
    assert code == 0 and sorted(s["outputs"]) == ["pan", "static", "texture"]
    code, s, _ = call_json(capsys, "keygen", "-o", tmp_path / "k")
    assert code == 0 and len((tmp_path / "k").read_bytes()) == 32
    assert call(capsys, "keygen", "-o", tmp_path / "k")[0] == 1
    assert call(capsys, "keygen", "-o", tmp_path / "k", "--force")[0] == 0


def test_empty_secret(capsys, index_file, key_file, tmp_path):
    (tmp_path / "empty").write_bytes(b"")
    code, _, _ = call(capsys, "hide", "--index", index_file, "--secret", tmp_path / "empty", "--key", key_file,
                      "-o", tmp_path / "p")
    assert code == 2


def test_corrupt_index(capsys, tmp_path):
    (tmp_path / "bad.bin").write_bytes(b"CVSI" + bytes(20))
    code, s, _ = call_json(capsys, "index", "stats", "--index", tmp_path / "bad.bin")
    assert code == 2 and "checksum" in s["error"]
