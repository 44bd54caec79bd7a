import json
from pathlib import Path

import pytest

from gridsim.cli import main
from gridsim.engine import Engine
from gridsim.io import (
    ScenarioError,
    build_manifest,
    load_scenario,
    parse_scenario,
    scenario_to_dict,
    write_manifest,
    write_scenario,
    write_timeseries,
    TICK_COLUMNS,
)
from gridsim.scenario import TopologyParams, random_scenario
from gridsim.verify import load_bundled
from gridsim import reference as ref
from conftest import FIVE_HOUSE_DEVICES, FIVE_HOUSE_FORECASTS


def bundled_path(tmp_path: Path) -> Path:
    cfg = load_bundled(ref.FIVE_HOUSE_SCENARIO)
    path = tmp_path / "five_house.json"
    write_scenario(cfg, path)
    return path


class TestLoadScenario:
    def test_bundled_round_trips_device_table(self, bundled_scenario):
        for house in bundled_scenario.houses:
            want = FIVE_HOUSE_DEVICES[house.id]
            got = [(d.weight, d.base_priority) for d in house.devices]
            assert got == want
            assert house.forecast == FIVE_HOUSE_FORECASTS[house.id]

    def test_unknown_field_named(self, tmp_path):
        path = bundled_path(tmp_path)
        data = json.loads(path.read_text())
        data["houses"][0]["colour"] = "blue"
        path.write_text(json.dumps(data))
        with pytest.raises(ScenarioError) as err:
            load_scenario(path)
        assert "colour" in str(err.value)

    def test_empty_file_is_parse_error(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        with pytest.raises(ScenarioError) as err:
            load_scenario(path)
        assert "parse" in str(err.value)

    def test_version_mismatch(self, tmp_path):
        path = bundled_path(tmp_path)
        data = json.loads(path.read_text())
        data["version"] = 99
        path.write_text(json.dumps(data))
        with pytest.raises(ScenarioError) as err:
            load_scenario(path)
        assert "version" in str(err.value)

    def test_validation_failures_reported(self, tmp_path):
        path = bundled_path(tmp_path)
        data = json.loads(path.read_text())
        data["houses"][0]["devices"][0]["weight"] = -1
        path.write_text(json.dumps(data))
        with pytest.raises(ScenarioError) as err:
            load_scenario(path)
        assert "negative weight" in str(err.value)

    def test_fractional_wh_round_half_up(self, tmp_path):
        path = bundled_path(tmp_path)
        data = json.loads(path.read_text())
        data["houses"][0]["devices"][0]["weight"] = 1.5
        path.write_text(json.dumps(data))
        cfg = load_scenario(path)
        assert cfg.houses[0].devices[0].weight == 2

    def test_round_trip_generated_scenarios(self, tmp_path):
        for seed in (1, 7, 23):
            cfg = random_scenario(seed, 6, 2, TopologyParams(houses_per_microgrid=3))
            path = tmp_path / f"s{seed}.json"
            write_scenario(cfg, path)
            assert load_scenario(path) == cfg

    def test_parse_rejects_non_object(self):
        with pytest.raises(ScenarioError):
            parse_scenario([1, 2, 3])


class TestTimeseries:
    def test_single_tick_single_row(self, bundled_scenario, tmp_path):
        engine = Engine(bundled_scenario)
        results = [engine.tick()]
        files = write_timeseries(results, tmp_path)
        ticks = (tmp_path / "ticks.csv").read_text().splitlines()
        assert ticks[0] == ",".join(TICK_COLUMNS)
        assert len(ticks) == 2
        houses = (tmp_path / "houses.csv").read_text().splitlines()
        assert len(houses) == 1 + len(bundled_scenario.houses)
        assert {f.name for f in files} == {"ticks.csv", "houses.csv", "edges.csv"}

    def test_day_run_has_288_rows(self, bundled_scenario, tmp_path):
        results = Engine(bundled_scenario).run(288)
        write_timeseries(results, tmp_path)
        assert len((tmp_path / "ticks.csv").read_text().splitlines()) == 289

    def test_reruns_are_byte_identical(self, bundled_scenario, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        write_timeseries(Engine(bundled_scenario).run(12), a)
        write_timeseries(Engine(bundled_scenario).run(12), b)
        for name in ("ticks.csv", "houses.csv", "edges.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_requires_results(self, tmp_path):
        with pytest.raises(ValueError):
            write_timeseries([], tmp_path)


class TestManifest:
    def test_hash_matches_file(self, tmp_path):
        path = bundled_path(tmp_path)
        manifest = build_manifest(path, 1, 288, tmp_path, {}, "0.1.0")
        import hashlib

        assert manifest.scenario_sha256 == hashlib.sha256(path.read_bytes()).hexdigest()
        out = write_manifest(manifest, tmp_path)
        assert json.loads(out.read_text())["seed"] == 1


class TestCli:
    def test_run_writes_outputs(self, tmp_path, capsys):
        path = bundled_path(tmp_path)
        out = tmp_path / "out"
        code = main(["run", "--scenario", str(path), "--ticks", "3", "--out", str(out)])
        assert code == 0
        assert (out / "manifest.json").exists()
        assert (out / "ticks.csv").exists()
        assert len((out / "ticks.csv").read_text().splitlines()) == 4

    def test_run_determinism_byte_identical(self, tmp_path):
        path = bundled_path(tmp_path)
        outs = []
        for sub in ("o1", "o2"):
            out = tmp_path / sub
            assert main(["run", "--scenario", str(path), "--ticks", "5", "--out", str(out)]) == 0
            outs.append(out)
        for name in ("ticks.csv", "houses.csv", "edges.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_run_requires_scenario(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run"])
        assert exc.value.code == 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--bogus"])
        assert exc.value.code == 2

    def test_invalid_scenario_exits_1(self, tmp_path, capsys):
        path = bundled_path(tmp_path)
        data = json.loads(path.read_text())
        data["houses"][0]["devices"][0]["weight"] = -1
        path.write_text(json.dumps(data))
        assert main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 1
        assert "negative weight" in capsys.readouterr().err

    def test_gen_twice_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["gen", "--seed", "7", "--houses", "6", "--out", str(a)]) == 0
        assert main(["gen", "--seed", "7", "--houses", "6", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert main(["gen", "--seed", "8", "--houses", "6", "--out", str(b)]) == 0
        assert a.read_bytes() != b.read_bytes()

    def test_gen_output_loads_cleanly(self, tmp_path):
        path = tmp_path / "gen.json"
        assert main(["gen", "--seed", "3", "--houses", "9", "--producers", "3",
                     "--out", str(path)]) == 0
        cfg = load_scenario(path)
        assert len(cfg.houses) == 9

    def test_verify_passes_and_prints_checks(self, capsys):
        assert main(["verify"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS utility") == 22
        assert "PASS final consumption H1" in out
        assert "FAIL" not in out

    def test_oracle_reports_gap(self, capsys):
        assert main(["oracle", "--ticks", "1"]) == 0
        out = capsys.readouterr().out
        assert "achieved utility 545" in out
        assert "global optimum 577" in out
        assert "gap 32" in out

    def test_oracle_rejects_large_scenarios(self, tmp_path, capsys):
        path = tmp_path / "big.json"
        assert main(["gen", "--seed", "1", "--houses", "40", "--out", str(path)]) == 0
        assert main(["oracle", "--scenario", str(path)]) == 1
        assert "too large" in capsys.readouterr().err

    def test_run_overrides_recorded_in_manifest(self, tmp_path):
        path = bundled_path(tmp_path)
        out = tmp_path / "out"
        assert main([
            "run", "--scenario", str(path), "--ticks", "2", "--out", str(out),
            "--seed", "9", "--feedback-rounds", "5",
        ]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["overrides"] == {"seed": "9", "feedback_rounds": "5"}
        assert manifest["seed"] == 9
