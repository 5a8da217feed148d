import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from railsim6g import cli
from railsim6g.core.config import (ConfigError, ScenarioConfig, ScenarioParseError, SCHEMA,
                                   load_scenario, parse_scenario_text)
from railsim6g.core.metrics import MetricsError, MetricsTable, read_table, write_table
from railsim6g.core.rng import MAX_SEED, stream, trial_seeds
from railsim6g.core.runner import (TrialError, UnknownScenarioError, aggregate, list_experiments,
                                   register, REGISTRY, run_scenario)
from railsim6g.core.units import UnitError, parse_quantity


# --- random streams -------------------------------------------------------

def test_stream_replays_bit_identically():
    a = stream(7, "sched", 3).random(100)
    b = stream(7, "sched", 3).random(100)
    assert np.array_equal(a, b)


def test_distinct_ids_give_distinct_sequences():
    a = stream(7, "a").random(1000)
    b = stream(7, "b").random(1000)
    assert not np.array_equal(a, b)
    # independent uniforms: sample correlation near zero
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


def test_consumption_order_does_not_couple_streams():
    x1, y1 = stream(1, "x"), stream(1, "y")
    first_x = x1.random(50)
    first_y = y1.random(50)
    y2, x2 = stream(1, "y"), stream(1, "x")
    second_y = y2.random(50)
    second_x = x2.random(50)
    assert np.array_equal(first_x, second_x) and np.array_equal(first_y, second_y)


@pytest.mark.parametrize("seed", [-1, MAX_SEED + 1])
def test_seed_out_of_range(seed):
    with pytest.raises(ValueError):
        stream(seed, "x")


def test_trial_seeds_deterministic():
    assert trial_seeds(3, "t", 5) == trial_seeds(3, "t", 5)
    assert len(set(trial_seeds(3, "t", 50))) == 50


# --- units ----------------------------------------------------------------

@pytest.mark.parametrize("text,kind,expected", [
    ("340 GHz", "frequency", 3.4e11),
    ("350 km/h", "speed", 350 / 3.6),
    ("20 dBm", "power", 0.1),
    ("500 Mbps", "rate", 5e8),
    ("1 ms", "time", 1e-3),
    ("2 deg", "angle", math.radians(2)),
    ("-174 dBm/Hz", "psd", 10 ** (-20.4)),
])
def test_parse_quantity(text, kind, expected):
    assert parse_quantity(text, kind) == pytest.approx(expected, rel=1e-12)


def test_bare_number_uses_default_unit():
    assert parse_quantity("15", "frequency", "khz") == 15e3
    assert parse_quantity("15", "frequency") == 15.0


@pytest.mark.parametrize("text,kind", [("3 GHz", "time"), ("abc", "frequency"), ("2 GHz", None)])
def test_bad_quantities(text, kind):
    with pytest.raises(UnitError):
        parse_quantity(text, kind)


# --- scenario files ---------------------------------------------------------

def test_minimal_file_fills_defaults(tmp_path):
    path = tmp_path / "min.scn"
    path.write_text("scenario_name = ris_fig3\nseed = 4\n")
    cfg = load_scenario(path)
    assert cfg.seed == 4 and cfg.trials == 1 and cfg.output_path is None
    assert all(cfg[k] == p.default for k, p in SCHEMA.items())


def test_carrier_frequency_converted_to_si():
    cfg = parse_scenario_text("scenario_name = x\n[channel]\ncarrier_freq = 340 GHz\n")
    assert cfg["channel.carrier_freq"] == 3.4e11
    alias = parse_scenario_text("scenario_name = x\nchannel.carrier_ghz = 340\n")
    assert alias["channel.carrier_freq"] == 3.4e11


def test_trials_zero_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_scenario_text("scenario_name = x\ntrials = 0\n")
    assert exc.value.key == "trials"


@pytest.mark.parametrize("text,error,key", [
    ("scenario_name = x\nbogus.key = 1\n", ConfigError, "bogus.key"),
    ("scenario_name = x\n[access]\nactivity_prob = 1.5\n", ConfigError, "access.activity_prob"),
    ("scenario_name = x\n[sched]\nslots = 2.5\n", ConfigError, "sched.slots"),
    ("seed = 1\n", ConfigError, "scenario_name"),
])
def test_validation_names_offending_key(text, error, key):
    with pytest.raises(error) as exc:
        parse_scenario_text(text)
    assert exc.value.key == key


@pytest.mark.parametrize("text", [
    "scenario_name = x\nthis line has no equals\n",
    "scenario_name = x\nseed = 1\nseed = 2\n",
    "scenario_name = x\n[sched]\nslots = 4\nslots = 5\n",
    "scenario_name = x\nsched.slots =\n",
])
def test_parse_errors(text):
    with pytest.raises(ScenarioParseError):
        parse_scenario_text(text)


def test_lists_comments_and_sections():
    cfg = parse_scenario_text(
        "# header\nscenario_name = access_fig25  # trailing\n"
        "[access]\nsnr_list = 0, 10, 20\nsolvers = omp, amp\n"
        "[sched]\ndirect_links = yes\nslot_len = 0.5\n")
    assert cfg["access.snr_list"] == [0.0, 10.0, 20.0]
    assert cfg["access.solvers"] == ["omp", "amp"]
    assert cfg["sched.direct_links"] is True
    assert cfg["sched.slot_len"] == 0.5e-3          # bare number in ms


def test_with_defaults_respects_explicit_keys():
    cfg = parse_scenario_text("scenario_name = x\n[aging]\nfdts = 0.02\n")
    merged = cfg.with_defaults({"aging.fdts": [0.5], "aging.elements": [8]})
    assert merged["aging.fdts"] == [0.02]
    assert merged["aging.elements"] == [8]


# --- metrics tables -----------------------------------------------------------

def test_empty_table_header_only_csv(tmp_path):
    path = write_table(MetricsTable({"a": [], "b": []}), tmp_path / "t.csv")
    assert path.read_text() == "a,b\n"


def test_three_rows_four_lines(tmp_path):
    table = MetricsTable.from_rows([{"x": i, "y": i / 3} for i in range(3)])
    text = write_table(table, tmp_path / "t.csv").read_text()
    assert len(text.splitlines()) == 4


def test_nan_refused(tmp_path):
    table = MetricsTable.from_rows([{"x": 1.0}, {"x": float("nan")}])
    with pytest.raises(MetricsError, match="non-finite"):
        write_table(table, tmp_path / "t.csv")
    assert not (tmp_path / "t.csv").exists()


def test_ragged_rows_refused():
    table = MetricsTable({"a": [], "b": []})
    with pytest.raises(MetricsError):
        table.add_row({"a": 1})


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_csv_and_json_round_trip_full_precision(tmp_path_factory, values):
    d = tmp_path_factory.mktemp("rt")
    table = MetricsTable({"v": list(values)}, {"seed": 1})
    for fmt in ("csv", "json"):
        back = read_table(write_table(table, d / f"t.{fmt}", fmt))
        assert back.column("v") == values


def test_json_mirrors_columns(tmp_path):
    table = MetricsTable({"a": [1.5, 2.5]}, {"scenario_name": "x"})
    data = json.loads(write_table(table, tmp_path / "t.json", "json").read_text())
    assert data["columns"] == {"a": [1.5, 2.5]}
    assert data["metadata"]["scenario_name"] == "x"


# --- runner ---------------------------------------------------------------

def test_aggregate_statistics():
    trials = [[{"k": 1, "m": v}] for v in (1.0, 2.0, 6.0)]
    table = aggregate(trials, ("k",))
    row = table.rows()[0]
    assert row["m"] == 3.0
    assert row["m_std"] == pytest.approx(np.std([1, 2, 6], ddof=1))
    assert (row["m_min"], row["m_max"]) == (1.0, 6.0)


def test_single_trial_std_is_zero():
    row = aggregate([[{"k": 0, "m": 4.0}]], ("k",)).rows()[0]
    assert row["m_std"] == 0.0


def test_run_sched_fig18_shape():
    cfg = ScenarioConfig("sched_fig18", seed=1, trials=1,
                         params={"sched.flow_counts": [2, 4]})
    table = run_scenario(cfg)
    names = set(table.columns)
    assert {"num_flows", "slots_proposed", "slots_serial", "slots_greedy"} <= names
    assert table.column("num_flows") == [2, 4]
    assert table.metadata["seed"] == 1 and table.metadata["trials"] == 1


def test_run_is_deterministic():
    cfg = ScenarioConfig("otfs_fig14", seed=9, trials=2)
    assert run_scenario(cfg).to_csv() == run_scenario(cfg).to_csv()


def test_access_fig25_rows_per_snr():
    cfg = ScenarioConfig("access_fig25", seed=2, trials=2,
                         params={"access.snr_list": [0.0, 10.0, 20.0, 30.0]})
    table = run_scenario(cfg)
    assert table.column("snr_db") == [0.0, 10.0, 20.0, 30.0]
    for solver in SCHEMA["access.solvers"].default:
        assert f"nmse_{solver}" in table.columns


def test_unknown_scenario():
    with pytest.raises(UnknownScenarioError):
        run_scenario(ScenarioConfig("no_such_scenario"))


def test_trial_error_carries_index():
    calls = []

    @register("_failing_test_scenario", ("k",))
    def failing(cfg, rng, trial):
        calls.append(trial)
        if trial == 2:
            raise RuntimeError("boom")
        return [{"k": 0, "m": 1.0}]

    try:
        with pytest.raises(TrialError) as exc:
            run_scenario(ScenarioConfig("_failing_test_scenario", trials=4))
        assert exc.value.trial == 2
        assert calls == [0, 1, 2]
    finally:
        REGISTRY.pop("_failing_test_scenario")


def test_registry_lists_builtin_scenarios():
    names = {e.name for e in list_experiments()}
    assert {"sched_fig18", "sched_fig19", "access_fig25", "access_fig26", "ris_fig3",
            "aging_fig11", "aging_fig12", "otfs_fig14", "twin_assoc"} <= names


# --- command line -----------------------------------------------------------

def _scn(tmp_path, text):
    path = tmp_path / "s.scn"
    path.write_text(text)
    return str(path)


def test_cli_run_writes_csv(tmp_path):
    out = tmp_path / "o.csv"
    code = cli.main(["run", _scn(tmp_path, "scenario_name = ris_fig3\n[ris]\nelements = 4, 8\n"),
                     "--trials", "2", "--out", str(out)])
    assert code == 0
    assert read_table(out).column("elements") == [4, 8]


def test_cli_json_format(tmp_path):
    out = tmp_path / "o.json"
    path = _scn(tmp_path, "scenario_name = ris_fig3\n[ris]\nelements = 4\n")
    assert cli.main(["run", path, "--out", str(out), "--format", "json"]) == 0
    assert json.loads(out.read_text())["metadata"]["scenario_name"] == "ris_fig3"


def test_cli_stdout(tmp_path, capsys):
    path = _scn(tmp_path, "scenario_name = ris_fig3\n[ris]\nelements = 4\n")
    assert cli.main(["run", path]) == 0
    assert capsys.readouterr().out.startswith("elements,")


@pytest.mark.parametrize("text,extra", [
    ("scenario_name = ris_fig3\ntrials = 0\n", []),
    ("scenario_name = ris_fig3\n", ["--trials", "0"]),
    ("scenario_name = nope\n", []),
    ("scenario_name = ris_fig3\n[ris]\ncarrier_freq = 3 ms\n", []),
    ("not a scenario\n", []),
])
def test_cli_invalid_input_exit_2(tmp_path, text, extra):
    assert cli.main(["run", _scn(tmp_path, text), *extra]) == 2


def test_cli_missing_file_exit_2(tmp_path):
    assert cli.main(["run", str(tmp_path / "absent.scn")]) == 2


def test_cli_runtime_failure_exit_1(tmp_path, monkeypatch):
    def explode(config):
        raise RuntimeError("disk on fire")
    monkeypatch.setattr(cli, "run_scenario", explode)
    assert cli.main(["run", _scn(tmp_path, "scenario_name = ris_fig3\n")]) == 1


def test_cli_list(capsys):
    assert cli.main(["list"]) == 0
    assert "sched_fig18" in capsys.readouterr().out
