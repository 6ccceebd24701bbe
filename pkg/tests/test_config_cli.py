import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from spinboson2q.cli import main
from spinboson2q.config import (
    ConfigError,
    PRESETS,
    build_config,
    config_from_dict,
    config_to_dict,
    with_updates,
)


class TestPresets:
    def test_www_values(self):
        cfg = build_config(preset="WWW")
        assert cfg.bath1.temperature == 1.04
        assert cfg.bath2.temperature == 1.39
        assert cfg.delta1 == 2.0
        assert cfg.eps1 == 1.0
        assert np.isclose(cfg.bath1.cutoff, 0.05 * cfg.delta1)
        assert np.isclose(cfg.bath2.cutoff, 0.10 * cfg.delta2)
        assert cfg.delta2 == 1.6
        assert cfg.eps2 == 0.75
        weak = 0.05 / math.pi
        assert np.isclose(cfg.bath1.coupling, weak)
        assert np.isclose(cfg.bath2.coupling, weak)
        assert np.isclose(cfg.coupling_j, weak)

    def test_sws_couplings(self):
        cfg = build_config(preset="SWS")
        assert np.isclose(cfg.bath1.coupling, 2.5 / math.pi)
        assert np.isclose(cfg.bath2.coupling, 2.5 / math.pi)
        assert np.isclose(cfg.coupling_j, 0.05 / math.pi)

    def test_wsw_couplings(self):
        cfg = build_config(preset="WSW")
        assert np.isclose(cfg.bath1.coupling, 0.05 / math.pi)
        assert np.isclose(cfg.coupling_j, 2.5 / math.pi)

    def test_sss_couplings(self):
        cfg = build_config(preset="SSS")
        assert np.isclose(cfg.bath1.coupling, 2.5 / math.pi)
        assert np.isclose(cfg.coupling_j, 2.5 / math.pi)

    def test_figure2_values(self):
        cfg = build_config(preset="figure2")
        assert cfg.delta1 == 1.0
        assert cfg.eps1 == 0.5
        assert cfg.delta2 == 1.0
        assert np.isclose(cfg.eps2, 0.4)
        assert np.isclose(cfg.coupling_j, 0.1 / math.pi)
        assert np.isclose(cfg.bath1.coupling, 0.2 / math.pi)
        assert cfg.bath1.cutoff == 0.05
        assert cfg.bath2.cutoff == 0.1
        assert cfg.initial_state == "excited"

    def test_ness_variants(self):
        for name in ("WWW-ness", "WSW-ness", "SWS-ness", "SSS-ness"):
            cfg = build_config(preset=name)
            assert cfg.bath1.temperature == 1.0
        cfg = build_config(preset="SSS-ness")
        assert np.isclose(cfg.bath1.coupling, 1.5 / math.pi)
        assert np.isclose(cfg.coupling_j, 1.5 / math.pi)
        cfg = build_config(preset="WWW-ness")
        assert np.isclose(cfg.bath1.coupling, 0.01 / math.pi)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            build_config(preset="XYZ")

    def test_all_presets_resolve(self):
        for name in PRESETS:
            build_config(preset=name)


class TestIniParsing:
    def write(self, tmp_path, text):
        path = tmp_path / "cfg.ini"
        path.write_text(text, encoding="utf-8")
        return path

    FULL = """
[system]
eps1 = 1.0
delta1 = 2.0
eps2 = 0.75
delta2 = 1.6
coupling_j = 0.0159
[bath1]
coupling = 0.0159
cutoff = 0.1
temperature = 1.04
[bath2]
coupling = 0.0159
cutoff = 0.16
temperature = 1.39
[numerics]
depth = 4
[run]
t_max = 10.0
"""

    def test_full_file(self, tmp_path):
        cfg = build_config(ini_path=self.write(tmp_path, self.FULL))
        assert cfg.numerics.depth == 4
        assert cfg.t_max == 10.0

    def test_unknown_key_rejected(self, tmp_path):
        path = self.write(tmp_path, self.FULL + "\n[system]\n")
        # configparser rejects the duplicate section itself; use a clean file
        path = self.write(tmp_path, self.FULL.replace("eps1", "epsilon_one"))
        with pytest.raises(ConfigError, match="unknown key"):
            build_config(ini_path=path)

    def test_unknown_section_rejected(self, tmp_path):
        path = self.write(tmp_path, self.FULL + "\n[bath3]\ncoupling = 1\n")
        with pytest.raises(ConfigError, match="unknown section"):
            build_config(ini_path=path)

    def test_non_finite_rejected(self, tmp_path):
        path = self.write(tmp_path, self.FULL.replace("eps1 = 1.0", "eps1 = nan"))
        with pytest.raises(ConfigError, match="eps1"):
            build_config(ini_path=path)

    def test_nonpositive_temperature_rejected(self, tmp_path):
        path = self.write(tmp_path, self.FULL.replace("temperature = 1.04", "temperature = 0"))
        with pytest.raises(ConfigError, match="temperature"):
            build_config(ini_path=path)

    def test_missing_key_rejected(self, tmp_path):
        path = self.write(tmp_path, self.FULL.replace("cutoff = 0.1\n", ""))
        with pytest.raises(ConfigError, match="missing required key"):
            build_config(ini_path=path)

    def test_explicit_wins_over_preset(self, tmp_path, caplog):
        path = self.write(
            tmp_path,
            "[bath1]\ncoupling = 0.5\n",
        )
        with caplog.at_level("INFO", logger="spinboson2q"):
            cfg = build_config(preset="WWW", ini_path=path)
        assert cfg.bath1.coupling == 0.5
        assert any("overrides preset" in m for m in caplog.messages)

    def test_set_overrides(self):
        cfg = build_config(preset="WWW", overrides={"numerics.depth": "2", "run.dt": "0.1"})
        assert cfg.numerics.depth == 2
        assert cfg.dt == 0.1

    def test_bad_override_shape(self):
        with pytest.raises(ConfigError, match="section.key"):
            build_config(preset="WWW", overrides={"depth": "2"})

    def test_custom_state(self):
        entries = ["0"] * 16
        entries[0] = "0.5"
        entries[5] = "0.5"
        entries[1] = "0.1+0.2j"
        entries[4] = "0.1-0.2j"
        cfg = build_config(
            preset="WWW",
            overrides={
                "system.initial_state": "custom",
                "system.custom_state": ",".join(entries),
            },
        )
        mat = cfg.initial_matrix()
        assert np.isclose(np.trace(mat), 1.0)
        assert mat[0, 1] == 0.1 + 0.2j

    def test_invalid_custom_state_rejected(self):
        with pytest.raises(ConfigError):
            build_config(
                preset="WWW",
                overrides={
                    "system.initial_state": "custom",
                    "system.custom_state": ",".join(["1"] * 16),
                },
            )


class TestRoundTrip:
    def test_dict_round_trip(self):
        cfg = build_config(preset="SWS", overrides={"numerics.scheme": "matsubara"})
        clone = config_from_dict(config_to_dict(cfg))
        assert clone == cfg

    def test_with_updates(self):
        cfg = build_config(preset="WWW")
        mod = with_updates(cfg, delta1=0.8, num_depth=3)
        assert mod.delta1 == 0.8
        assert mod.numerics.depth == 3
        assert cfg.numerics.depth == 6  # original untouched


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    return header, np.array(data, dtype=object)


FAST = [
    "--set", "numerics.depth=2", "--set", "numerics.n_exp=1",
    "--set", "run.t_max=2.0", "--set", "run.dt=0.5",
    "--set", "numerics.fock=3", "--set", "numerics.validate_bath=false",
]


class TestCli:
    def test_dynamics_both_methods(self, tmp_path):
        code = main(
            ["dynamics", "--preset", "figure2", "--outdir", str(tmp_path), *FAST,
             "--set", "run.method=both"]
        )
        assert code == 0
        for method in ("heom", "rcm"):
            header, data = read_csv(tmp_path / f"dynamics_{method}.csv")
            assert header[:3] == ["t", "sz1", "sz2"]
            assert data.shape[0] == 5
        record = json.loads((tmp_path / "run_record.json").read_text())
        assert record["status"] == "ok"
        assert record["hierarchy_size"] == 15
        assert len(record["bath_expansions"]) == 2

    def test_dynamics_emits_exact_column_when_decoupled(self, tmp_path):
        code = main(
            ["dynamics", "--preset", "figure2", "--outdir", str(tmp_path), *FAST,
             "--set", "bath1.coupling=0", "--set", "bath2.coupling=0"]
        )
        assert code == 0
        header, data = read_csv(tmp_path / "dynamics_heom.csv")
        assert "sz1_exact" in header
        sz1 = data[:, header.index("sz1")].astype(float)
        ref = data[:, header.index("sz1_exact")].astype(float)
        assert np.max(np.abs(sz1 - ref)) < 1e-7

    def test_entropy_columns_at_equal_temperatures(self, tmp_path):
        code = main(
            ["dynamics", "--preset", "WWW", "--outdir", str(tmp_path), *FAST,
             "--set", "bath2.temperature=1.04"]
        )
        assert code == 0
        header, _data = read_csv(tmp_path / "dynamics_heom.csv")
        assert "entropy_production" in header
        assert "qsb1" in header

    def test_blp_summary(self, tmp_path):
        code = main(["blp", "--preset", "WWW", "--outdir", str(tmp_path), *FAST])
        assert code == 0
        summary = json.loads((tmp_path / "blp_summary.json").read_text())
        assert summary["initial_pair"] == ["excited", "plusplus"]
        header, data = read_csv(tmp_path / "blp.csv")
        assert header == ["t", "trace_distance"]
        td = data[:, 1].astype(float)
        assert abs(td[0] - np.sqrt(3) / 2) < 1e-9

    def test_blp_identical_pair_is_zero(self, tmp_path):
        code = main(
            ["blp", "--preset", "WWW", "--outdir", str(tmp_path), *FAST,
             "--state-a", "excited", "--state-b", "excited"]
        )
        assert code == 0
        summary = json.loads((tmp_path / "blp_summary.json").read_text())
        assert summary["blp_measure"] == 0.0
        assert summary["revival_count"] == 0

    def test_steadystate_report(self, tmp_path):
        code = main(
            ["steadystate", "--preset", "WWW-ness", "--outdir", str(tmp_path), *FAST]
        )
        assert code == 0
        report = json.loads((tmp_path / "ness.json").read_text())
        assert report["converged"] is True
        assert report["residual"] <= 1e-8
        assert (tmp_path / "ness.csv").exists()

    def test_steadystate_rejects_rcm(self, tmp_path):
        code = main(
            ["steadystate", "--preset", "WWW-ness", "--outdir", str(tmp_path), *FAST,
             "--set", "run.method=rcm"]
        )
        assert code == 2

    def test_sweep_delta(self, tmp_path):
        code = main(
            ["sweep", "--preset", "WWW", "--outdir", str(tmp_path), *FAST,
             "--axis", "delta", "--values", "1.2,0.8"]
        )
        assert code == 0
        header, data = read_csv(tmp_path / "sweep_delta.csv")
        assert header == ["value", "status", "observable", "data"]
        values = data[:, 0].astype(float)
        assert np.all(np.diff(values) >= 0)  # sorted by value
        assert "peak_coherence" in set(data[:, 2])

    def test_sweep_t2_targets_steadystate(self, tmp_path):
        code = main(
            ["sweep", "--preset", "WWW-ness", "--outdir", str(tmp_path), *FAST,
             "--axis", "T2", "--values", "1.2,1.6"]
        )
        assert code == 0
        _header, data = read_csv(tmp_path / "sweep_T2.csv")
        names = set(data[:, 2])
        assert "coherence_l1" in names
        assert "heat_current_j21" in names

    def test_config_error_exit_code(self, tmp_path):
        code = main(["dynamics", "--preset", "nope", "--outdir", str(tmp_path)])
        assert code == 2

    def test_no_source_is_config_error(self, tmp_path):
        code = main(["dynamics", "--outdir", str(tmp_path)])
        assert code == 2

    def test_resource_error_exit_code(self, tmp_path):
        code = main(
            ["dynamics", "--preset", "WWW", "--outdir", str(tmp_path), *FAST,
             "--set", "numerics.max_bytes=1024"]
        )
        assert code == 4
        record = json.loads((tmp_path / "run_record.json").read_text())
        assert record["status"] == "resource-error"

    def test_record_written_on_failure(self, tmp_path):
        main(
            ["dynamics", "--preset", "WWW", "--outdir", str(tmp_path), *FAST,
             "--set", "numerics.max_bytes=1024"]
        )
        assert (tmp_path / "run_record.json").exists()

    def test_rerun_from_record_reproduces_columns(self, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert main(["dynamics", "--preset", "figure2", "--outdir", str(out1), *FAST]) == 0
        assert main(
            ["dynamics", "--from-record", str(out1 / "run_record.json"),
             "--outdir", str(out2)]
        ) == 0
        h1, d1 = read_csv(out1 / "dynamics_heom.csv")
        h2, d2 = read_csv(out2 / "dynamics_heom.csv")
        assert h1 == h2
        a = d1.astype(float)
        b = d2.astype(float)
        assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))

    def test_from_record_conflicts_rejected(self, tmp_path):
        out1 = tmp_path / "a"
        assert main(["dynamics", "--preset", "figure2", "--outdir", str(out1), *FAST]) == 0
        code = main(
            ["dynamics", "--from-record", str(out1 / "run_record.json"),
             "--preset", "WWW", "--outdir", str(tmp_path)]
        )
        assert code == 2

    def test_label_prefix(self, tmp_path):
        code = main(
            ["dynamics", "--preset", "figure2", "--outdir", str(tmp_path),
             "--label", "demo", *FAST]
        )
        assert code == 0
        assert (tmp_path / "demo_dynamics_heom.csv").exists()
        assert (tmp_path / "demo_run_record.json").exists()
