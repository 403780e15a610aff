import textwrap

import numpy as np
import pytest

from hybridsim.cli import calibrate_noise, emit_report, main
from hybridsim.scenario import load_scenario

MINI = textwrap.dedent("""
    geometry:
      bs:
        subarray: {m_y: 8, m_z: 2}
        n_subarrays: 2
      ue: {m_y: 2, m_z: 2}
    users:
      - rays:
          - {aod: {phi: -5.0}, aoa: {phi: 0.0}}
      - rays:
          - {aod: {phi: 5.0}, aoa: {phi: 0.0}}
    noise_power: 0.05
    frames: 1
    codewords_per_frame: 2
    seed: 11
""")


@pytest.fixture
def mini_cfg(tmp_path):
    path = tmp_path / "mini.cfg"
    path.write_text(MINI)
    return path


def read_lines(path):
    return path.read_text().splitlines()


def test_run_writes_report_files(mini_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(mini_cfg), "--out", str(out)]) == 0
    for name in ("metrics.csv", "channel_trace.csv", "constellation.csv",
                 "config.echo"):
        assert (out / name).exists()
    text = capsys.readouterr().out
    assert "analog_only user 0" in text
    assert "rzf user 1" in text


def test_metrics_csv_rows_and_header(mini_cfg, tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", str(mini_cfg), "--out", str(out)])
    lines = read_lines(out / "metrics.csv")
    assert lines[0] == "mode,user,noise_power,ber,per,evm_db"
    assert len(lines) == 1 + 4              # 2 modes x 2 users
    modes = {l.split(",")[0] for l in lines[1:]}
    assert modes == {"analog_only", "rzf"}
    for line in lines[1:]:
        fields = line.split(",")
        assert len(fields) == 6
        float(fields[2]), float(fields[3]), float(fields[4]), float(fields[5])


def test_channel_trace_has_512_rows(mini_cfg, tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", str(mini_cfg), "--out", str(out)])
    lines = read_lines(out / "channel_trace.csv")
    assert lines[0].split(",") == ["subcarrier", "user0_nonprecoded_mag",
                                   "user0_precoded_mag", "user1_nonprecoded_mag",
                                   "user1_precoded_mag"]
    assert len(lines) == 1 + 512


def test_constellation_tags_user_and_mode(mini_cfg, tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", str(mini_cfg), "--out", str(out)])
    lines = read_lines(out / "constellation.csv")
    assert lines[0] == "i,q,user,mode"
    tags = {tuple(l.split(",")[2:]) for l in lines[1:]}
    assert tags == {("0", "analog_only"), ("1", "analog_only"),
                    ("0", "rzf"), ("1", "rzf")}


def test_config_echo_contents(mini_cfg, tmp_path):
    import yaml
    out = tmp_path / "out"
    main(["run", "--config", str(mini_cfg), "--out", str(out)])
    echo = yaml.safe_load((out / "config.echo").read_text())
    assert echo["seed"] == 11
    assert isinstance(echo["_channel_checksum"], int)
    assert len(echo["_beams"]) == 2
    assert echo["_beams"][0]["tx_phi_deg"] == -5.0
    assert echo["_beams"][1]["tx_phi_deg"] == 5.0


def test_repeated_runs_are_byte_identical(mini_cfg, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", str(mini_cfg), "--out", str(out1)])
    main(["run", "--config", str(mini_cfg), "--out", str(out2)])
    for name in ("metrics.csv", "channel_trace.csv", "constellation.csv",
                 "config.echo"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_seed_override_changes_metrics(mini_cfg, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", str(mini_cfg), "--out", str(out1)])
    main(["run", "--config", str(mini_cfg), "--out", str(out2),
          "--seed", "12"])
    assert (out1 / "metrics.csv").read_bytes() != (out2 / "metrics.csv").read_bytes()


def test_mode_override_limits_rows(mini_cfg, tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", str(mini_cfg), "--out", str(out),
          "--mode", "analog_only"])
    lines = read_lines(out / "metrics.csv")
    assert len(lines) == 1 + 2
    assert all(l.startswith("analog_only,") for l in lines[1:])


def test_sweep_emits_one_row_per_point_mode_user(mini_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(mini_cfg), "--out", str(out),
                 "--mode", "rzf", "--param", "noise",
                 "--values", "0.02,0.08"]) == 0
    lines = read_lines(out / "metrics.csv")
    assert len(lines) == 1 + 2 * 2          # 2 noise points x 1 mode x 2 users
    noises = [float(l.split(",")[2]) for l in lines[1:]]
    assert noises == [0.02, 0.02, 0.08, 0.08]


def test_headers_only_report(tmp_path):
    out = tmp_path / "empty"
    emit_report(None, out)
    assert read_lines(out / "metrics.csv") == ["mode,user,noise_power,ber,per,evm_db"]
    assert read_lines(out / "channel_trace.csv") == ["subcarrier"]
    assert read_lines(out / "constellation.csv") == ["i,q,user,mode"]


def test_csv_floats_use_compact_format(mini_cfg, tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", str(mini_cfg), "--out", str(out)])
    for line in read_lines(out / "metrics.csv")[1:]:
        for tok in line.split(",")[2:]:
            assert len(tok) <= 16
            assert tok == ("%.9g" % float(tok))


def test_bad_config_returns_error_code(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("- a\n- list\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "error:" in capsys.readouterr().err
    missing = tmp_path / "missing.cfg"
    assert main(["run", "--config", str(missing), "--out", str(tmp_path / "o")]) == 2


def test_calibrate_brackets_target(mini_cfg):
    sc = load_scenario(mini_cfg)
    noise = calibrate_noise(sc, target_evm_db=-10.0, frames=1, iters=6)
    assert 0 < noise <= 1.0
