import json

import pytest

from incompat.cli import EXIT_INPUT, EXIT_OK, main


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestJmCommand:
    def test_builtin_pauli_xz(self, capsys):
        code, out, _ = run(["jm", "--builtin", "pauli-xz"], capsys)
        assert code == EXIT_OK
        assert "INCOMPATIBLE" in out
        assert "0.7071" in out

    def test_builtin_pauli_xyz(self, capsys):
        code, out, _ = run(["jm", "--builtin", "pauli-xyz"], capsys)
        assert code == EXIT_OK
        assert "0.5774" in out

    def test_malformed_file(self, tmp_path, capsys):
        bad = tmp_path / "nope.json"
        bad.write_text("{not json")
        code, _, err = run(["jm", "--file", str(bad)], capsys)
        assert code == EXIT_INPUT

    def test_wrong_builtin(self, capsys):
        code, _, err = run(["jm", "--builtin", "nonsense"], capsys)
        assert code == EXIT_INPUT

    def test_assemblage_file(self, tmp_path, capsys):
        from incompat import serialize
        from incompat.jm import pauli_assemblage

        path = tmp_path / "pauli.json"
        path.write_text(json.dumps(serialize.assemblage_to_json(pauli_assemblage())))
        code, out, _ = run(["jm", "--file", str(path)], capsys)
        assert code == EXIT_OK
        assert "INCOMPATIBLE" in out


class TestDepolScan:
    def test_rows_and_values(self, tmp_path, capsys):
        out_file = tmp_path / "scan.csv"
        code, _, _ = run(
            ["depol-scan", "--p-grid", "0,0.5,0.8,1", "--output", str(out_file)], capsys
        )
        assert code == EXIT_OK
        lines = out_file.read_text().splitlines()
        assert lines[0].startswith("# generated:")
        header = lines[1].split(",")
        assert header == ["p", "threshold_flag", "F_plus", "lb_probe", "lb_sf",
                          "ub_eb", "sandwich_lo", "sandwich_hi"]
        rows = {float(l.split(",")[0]): l.split(",") for l in lines[2:]}
        # p=1: F_plus = 1, sandwich [0.6, 1]
        assert float(rows[1.0][2]) == pytest.approx(1.0)
        assert float(rows[1.0][6]) == pytest.approx(0.6)
        assert float(rows[1.0][7]) == pytest.approx(1.0)
        # p=0.5: all lower bounds vanish
        assert float(rows[0.5][3]) == pytest.approx(0.0, abs=1e-6)
        assert float(rows[0.5][4]) == pytest.approx(0.0, abs=1e-6)
        # p=0.8: sandwich [0.36, 0.6]
        assert float(rows[0.8][6]) == pytest.approx(0.36)
        assert float(rows[0.8][7]) == pytest.approx(0.6)

    def test_deterministic_apart_from_timestamp(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(["depol-scan", "--p-grid", "0,1", "--output", str(a)], capsys)
        run(["depol-scan", "--p-grid", "0,1", "--output", str(b)], capsys)
        body_a = a.read_text().splitlines()[1:]
        body_b = b.read_text().splitlines()[1:]
        assert body_a == body_b

    def test_cache_reuse(self, tmp_path, capsys):
        cache = tmp_path / "cache"
        out1 = tmp_path / "one.csv"
        run(["depol-scan", "--p-grid", "0,1", "--cache-dir", str(cache),
             "--output", str(out1)], capsys)
        cached = list(cache.iterdir())
        assert len(cached) == 1
        stamp = cached[0].stat().st_mtime
        out2 = tmp_path / "two.csv"
        run(["depol-scan", "--p-grid", "0,1", "--cache-dir", str(cache),
             "--output", str(out2)], capsys)
        assert cached[0].stat().st_mtime == stamp  # reused, not recomputed
        assert out1.read_text().splitlines()[1:] == out2.read_text().splitlines()[1:]

    def test_json_format(self, tmp_path, capsys):
        out_file = tmp_path / "scan.json"
        code, _, _ = run(["depol-scan", "--p-grid", "0,1", "--format", "json",
                          "--output", str(out_file)], capsys)
        assert code == EXIT_OK
        doc = json.loads(out_file.read_text())
        assert [row["p"] for row in doc] == [0.0, 1.0]

    def test_jobs_flag(self, tmp_path, capsys):
        out_file = tmp_path / "scan.csv"
        code, _, _ = run(["depol-scan", "--p-grid", "0,0.5,1", "--jobs", "3",
                          "--output", str(out_file)], capsys)
        assert code == EXIT_OK

    def test_qutrit_scan(self, tmp_path, capsys):
        out_file = tmp_path / "scan3.csv"
        code, _, _ = run(["depol-scan", "--dim", "3", "--probes", "mub-3",
                          "--p-grid", "0.2,0.9", "--output", str(out_file)], capsys)
        assert code == EXIT_OK
        lines = out_file.read_text().splitlines()
        row_02 = lines[2].split(",")
        row_09 = lines[3].split(",")
        assert float(row_02[3]) == pytest.approx(0.0, abs=1e-6)  # below 5/12
        assert float(row_09[3]) > 0.1                            # detected
        assert row_02[6] == row_02[7] == ""                      # no qubit sandwich


class TestVerifyCommand:
    def test_gamma_suite(self, capsys):
        code, out, _ = run(["verify", "gamma", "--trials", "5"], capsys)
        assert code == EXIT_OK
        assert "PASS" in out

    def test_witness_suite(self, capsys):
        code, out, _ = run(["verify", "witness", "--trials", "1"], capsys)
        assert code == EXIT_OK

    def test_corrupted_channel_file(self, tmp_path, capsys):
        bad = tmp_path / "chan.json"
        bad.write_text(json.dumps({"dim_in": 2, "dim_out": 2, "kraus": [[[0, 0], [0, 0]]]}))
        code, _, err = run(["verify", "all", "--trials", "1",
                            "--channel-file", str(bad)], capsys)
        assert code == EXIT_INPUT


class TestGameCommand:
    def test_analytic(self, capsys):
        code, out, _ = run(["game", "--builtin", "identity", "--filter-builtin",
                            "phi-plus", "--analytic-denominator"], capsys)
        assert code == EXIT_OK
        assert "1.600000" in out

    def test_sdp_denominator(self, capsys):
        code, out, _ = run(["game", "--builtin", "identity",
                            "--filter-builtin", "phi-plus"], capsys)
        assert code == EXIT_OK
        assert "1.4641" in out

    def test_free_channel(self, capsys):
        code, out, _ = run(["game", "--builtin", "depol:0.5",
                            "--filter-builtin", "phi-plus"], capsys)
        assert code == EXIT_OK
        ratio = float([l for l in out.splitlines() if "ratio" in l][0].split(":")[1])
        assert ratio <= 1.0 + 1e-5

    def test_channel_and_filter_files(self, tmp_path, capsys):
        from incompat import serialize
        from incompat.channels import depolarising
        from incompat.games import phi_plus_filter

        ch_path = tmp_path / "chan.json"
        ch_path.write_text(json.dumps(serialize.channel_to_json(depolarising(0.9, 2))))
        f_path = tmp_path / "filt.json"
        f_path.write_text(json.dumps(serialize.filter_to_json(phi_plus_filter(2))))
        out_path = tmp_path / "bound.json"
        code, out, _ = run(["game", "--channel", str(ch_path), "--filter", str(f_path),
                            "--output", str(out_path), "--format", "json"], capsys)
        assert code == EXIT_OK
        doc = json.loads(out_path.read_text())
        assert doc["ratio_lb"] == pytest.approx(doc["numerator"] / doc["denominator"])


class TestConfigPrecedence:
    def test_env_override(self, capsys, tmp_path, monkeypatch):
        out_file = tmp_path / "o.csv"
        monkeypatch.setenv("INCOMPAT_P_GRID", "0,1")
        code, _, _ = run(["depol-scan", "--output", str(out_file)], capsys)
        assert code == EXIT_OK
        assert len(out_file.read_text().splitlines()) == 4  # stamp + header + 2 rows

    def test_cli_beats_env(self, capsys, tmp_path, monkeypatch):
        out_file = tmp_path / "o.csv"
        monkeypatch.setenv("INCOMPAT_P_GRID", "0,0.5,1")
        code, _, _ = run(["depol-scan", "--p-grid", "0,1", "--output", str(out_file)], capsys)
        assert len(out_file.read_text().splitlines()) == 4

    def test_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"p_grid": [0.0, 1.0], "probe_set": "xz"}))
        out_file = tmp_path / "o.csv"
        code, _, _ = run(["--config", str(cfg), "depol-scan", "--output", str(out_file)],
                         capsys)
        assert code == EXIT_OK
        assert len(out_file.read_text().splitlines()) == 4

    def test_invalid_probe_dim_combo(self, capsys):
        code, _, err = run(["depol-scan", "--dim", "3", "--probes", "xyz"], capsys)
        assert code == EXIT_INPUT
