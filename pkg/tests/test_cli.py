import csv
import json

import numpy as np
import pytest

from contentwur import __version__
from contentwur.cli import main
from contentwur.config import (
    DEFAULT_POLLS, DEFAULT_THETAS, ConfigError, RunManifest, manifest_from_dict, parse_config,
)
from contentwur.energy import Protocol
from contentwur.results import CDF_HEADER, PARETO_HEADER, POLLING_HEADER


def write(tmp_path, obj, name="run.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return path


class TestManifest:
    def test_empty_object_gives_defaults(self):
        m = manifest_from_dict({})
        assert (m.episodes, m.steps, m.n_sensors, m.system) == (100, 1000, 50, "system1")
        assert m.polls_per_step == DEFAULT_POLLS and m.theta_multipliers == DEFAULT_THETAS
        assert m.protocols == (Protocol.ID_BASED, Protocol.CONTENT_BASED)
        assert m.energy.e_tx == 0.05 and m.energy.e_max == 162000.0
        assert len(m.grid()) == 6 + 36

    def test_m_exceeds_n(self):
        with pytest.raises(ConfigError, match="M exceeds N") as err:
            manifest_from_dict({"polls_per_step": [51]})
        assert err.value.field == "polls_per_step"

    def test_zero_theta_is_valid(self):
        assert manifest_from_dict({"theta_multipliers": [0]}).theta_multipliers == (0.0,)

    @pytest.mark.parametrize("data,field", [
        ({"bogus": 1}, None),
        ({"energy": {"e_tx": 0.05, "joules": 1}}, "energy"),
        ({"episodes": 0}, "episodes"),
        ({"steps": 2.5}, "steps"),
        ({"episodes": True}, "episodes"),
        ({"theta_multipliers": [-1.0]}, "theta_multipliers"),
        ({"theta_multipliers": [1.0, 1.0]}, "theta_multipliers"),
        ({"protocols": ["lora"]}, "protocols"),
        ({"system": "system9"}, "system"),
        ({"base_seed": -1}, "base_seed"),
        ({"energy": {"e_max": 0}}, "energy"),
        ({"quadrature": {"rel_tol": "tight"}}, "quadrature.rel_tol"),
    ])
    def test_invalid_fields(self, data, field):
        with pytest.raises(ConfigError) as err:
            manifest_from_dict(data)
        assert err.value.field == field

    def test_inline_system_round_trip(self):
        data = {"system": {"A": [[0.5, 0.1], [0.0, 0.4]], "H": [[1, 0], [0, 1]], "Q": [[1, 0], [0, 1]],
                           "R": [[0.5, 0], [0, 0.5]], "epsilon": [0.0, 0.1], "name": "pair"},
                "polls_per_step": [1, 2], "theta_multipliers": [0.1]}
        m = manifest_from_dict(data)
        assert m.n_sensors == 2 and m.spec().name == "pair"
        assert manifest_from_dict(json.loads(json.dumps(m.to_dict()))) == m

    def test_inline_system_errors(self):
        with pytest.raises(ConfigError, match="missing"):
            manifest_from_dict({"system": {"A": [[0.5]]}})
        bad_h = {"A": [[0.5, 0], [0, 0.5]], "H": [[1, 1], [0, 1]], "Q": [[1, 0], [0, 1]],
                 "R": [[1, 0], [0, 1]], "epsilon": [0, 0]}
        with pytest.raises(ConfigError, match="H = I"):
            manifest_from_dict({"system": bad_h, "polls_per_step": [1]})
        assert manifest_from_dict({"system": bad_h, "polls_per_step": [1], "protocols": ["id"]}).n_sensors == 2

    def test_round_trip_defaults(self):
        m = RunManifest()
        assert manifest_from_dict(json.loads(json.dumps(m.to_dict()))) == m

    def test_parse_error_has_line_context(self, tmp_path):
        path = write(tmp_path, '{\n  "episodes": 3,\n  "steps" 4\n}')
        with pytest.raises(ConfigError, match=r"run\.json:3:11") as err:
            parse_config(path)
        assert '"steps" 4' in str(err.value)

    def test_overrides(self):
        m = manifest_from_dict({}).with_overrides(base_seed=9, protocols=["content"], episodes=2, steps=3)
        assert (m.base_seed, m.protocols, m.episodes, m.steps) == (9, (Protocol.CONTENT_BASED,), 2, 3)


SMALL = {"system": "system2", "n_sensors": 6, "polls_per_step": [1, 2], "theta_multipliers": [1.0, 2.0],
         "episodes": 2, "steps": 15, "base_seed": 3}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestCli:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0 and __version__ in capsys.readouterr().out

    def test_missing_config(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1 and "usage" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--frobnicate"])
        assert exc.value.code == 1 and "usage" in capsys.readouterr().err

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        assert main(["--config", str(write(tmp_path, {"polls_per_step": [51]}))]) == 1
        assert "M exceeds N" in capsys.readouterr().err
        assert main(["--config", str(tmp_path / "absent.json")]) == 1

    def test_runtime_failure_exit_code(self, tmp_path):
        # the output path is an existing file, so the directory cannot be created
        blocker = tmp_path / "out"
        blocker.write_text("")
        assert main(["--config", str(write(tmp_path, SMALL)), "--out", str(blocker)]) == 2

    def test_outputs(self, tmp_path):
        out = tmp_path / "res"
        assert main(["--config", str(write(tmp_path, SMALL)), "--out", str(out), "--protocol", "both"]) == 0
        pareto = read_csv(out / "pareto.csv")
        assert tuple(pareto[0]) == PARETO_HEADER
        keys = [(r[0], int(r[1]), float(r[2])) for r in pareto[1:]]
        assert keys == sorted(keys) and len(keys) == 2 * 2 + 2
        cdf = read_csv(out / "mse_cdf.csv")
        assert tuple(cdf[0]) == CDF_HEADER and len(cdf) == 1 + len(keys) * 2
        poll = read_csv(out / "polling_freq.csv")
        assert tuple(poll[0]) == POLLING_HEADER and len(poll) == 1 + len(keys) * 6
        assert sorted({int(r[3]) for r in poll[1:]}) == list(range(1, 7))
        for r in poll[1:]:
            assert 0.0 <= float(r[5]) <= float(r[4]) <= 1.0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["seed"] == 3 and len(summary["points"]) == len(keys)
        assert manifest_from_dict(summary["manifest"]) == parse_config(tmp_path / "run.json")
        assert (out / "timing.txt").read_text().startswith("wall_clock_seconds")

    def test_floats_round_trip_at_17_digits(self, tmp_path):
        out = tmp_path / "res"
        main(["--config", str(write(tmp_path, SMALL)), "--out", str(out), "--protocol", "id"])
        summary = json.loads((out / "summary.json").read_text())
        rows = read_csv(out / "pareto.csv")[1:]
        for row, point in zip(rows, summary["points"]):
            assert float(row[3]) == point["mean_mse"]
            assert len(row[3].replace(".", "").lstrip("0").split("e")[0]) <= 17

    def test_unpolled_sensors_are_listed(self, tmp_path):
        cfg = {**SMALL, "polls_per_step": [1], "steps": 1, "episodes": 1}
        out = tmp_path / "res"
        assert main(["--config", str(write(tmp_path, cfg)), "--out", str(out), "--protocol", "id"]) == 0
        poll = read_csv(out / "polling_freq.csv")[1:]
        assert len(poll) == 6 and sum(float(r[4]) == 0.0 for r in poll) == 5
        assert len(read_csv(out / "pareto.csv")) == 2

    def test_rerun_and_jobs_are_byte_identical(self, tmp_path):
        cfg = write(tmp_path, SMALL)
        outs = []
        for jobs, name in ((1, "a"), (1, "b"), (3, "c")):
            assert main(["--config", str(cfg), "--out", str(tmp_path / name), "--jobs", str(jobs)]) == 0
            outs.append(tmp_path / name)
        for f in ("pareto.csv", "mse_cdf.csv", "polling_freq.csv", "summary.json"):
            assert len({(o / f).read_bytes() for o in outs}) == 1

    def test_seed_override(self, tmp_path):
        cfg = write(tmp_path, SMALL)
        main(["--config", str(cfg), "--out", str(tmp_path / "a"), "--protocol", "id"])
        main(["--config", str(cfg), "--out", str(tmp_path / "b"), "--protocol", "id", "--seed", "11"])
        a, b = (json.loads((tmp_path / d / "summary.json").read_text()) for d in "ab")
        assert b["seed"] == 11 and a["points"][0]["mean_mse"] != b["points"][0]["mean_mse"]

    def test_oracle_flag(self, capsys):
        assert main(["--oracle"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and "censored variance" in out
