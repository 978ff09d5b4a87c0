import csv
import json
import math

import numpy as np
import pytest
import yaml

from spinsqueeze.cli import ConfigError, fmt, main, parse_config

HEADER_TAIL = ["xi2", "purity", "Sz", "Sy2", "Sx2", "gap", "status"]


def _write(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


SWEEP = {"model": "ideal", "n_spins": 6, "params": {"gamma": 1.0},
         "sweep": [{"name": "r", "kind": "linear", "start": 0.0, "stop": 2.0, "num": 5}]}


def test_schema_error_exits_2_with_field_path(tmp_path, capsys):
    bad = {"model": "ideal", "n_spins": 4, "params": {"gamma": 1.0, "kappa": 3.0}}
    assert main(["steady", "--config", _write(tmp_path, bad), "--out", str(tmp_path)]) == 2
    assert "params.kappa" in capsys.readouterr().err


@pytest.mark.parametrize("data, path", [
    ({"n_spins": 4}, "model"),
    ({"model": "ideal", "n_spins": -3}, "n_spins"),
    ({"model": "ideal", "n_spins": 4, "sweep": [{"name": "r", "kind": "cubic"}]},
     "sweep[0].kind"),
    ({"model": "ideal", "n_spins": 4, "sweep": [{"name": "r", "values": []}]},
     "sweep[0].values"),
    ({"model": "ideal", "n_spins": 4, "tolerances": {"rtol": -1}}, "tolerances.rtol"),
])
def test_config_errors_name_the_field(data, path):
    with pytest.raises(ConfigError) as err:
        parse_config(data, "steady")
    assert path in str(err.value)


def test_missing_config_exits_2(tmp_path):
    assert main(["steady", "--out", str(tmp_path)]) == 2
    assert main(["steady", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 2


def test_evolve_requires_valid_window():
    base = {"model": "ideal", "n_spins": 4, "params": {"gamma": 1.0, "r": 0.5}}
    with pytest.raises(ConfigError, match="evolve.t_final"):
        parse_config({**base, "evolve": {}}, "evolve")
    with pytest.raises(ConfigError, match="evolve.t_start"):
        parse_config({**base, "evolve": {"t_final": 1.0, "t_start": 2.0}}, "evolve")


def test_sweep_csv_layout(tmp_path):
    assert main(["sweep", "--config", _write(tmp_path, SWEEP), "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert rows[0] == ["index", "r", *HEADER_TAIL]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3", "4"]
    assert [float(r[1]) for r in rows[1:]] == pytest.approx(np.linspace(0, 2, 5))
    assert all(r[-1] == "ok" for r in rows[1:])
    # gap not requested: explicit nan literal
    assert all(r[-2] == "nan" for r in rows[1:])
    xi2 = [float(r[2]) for r in rows[1:]]
    assert xi2[0] == pytest.approx(1.0) and xi2 == sorted(xi2, reverse=True)
    side = json.loads((tmp_path / "sweep.json").read_text())
    assert side["config"] == SWEEP and len(side["points"]) == 5


def test_reruns_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, {**SWEEP, "compute_gap": True})
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["sweep", "--config", cfg, "--out", str(out), "--seed", "5"]) == 0
        outs.append((out / "sweep.csv").read_bytes())
    assert outs[0] == outs[1]


def test_worker_count_does_not_change_results(tmp_path):
    cfg = _write(tmp_path, SWEEP)
    texts = []
    for w in (1, 3):
        out = tmp_path / f"w{w}"
        assert main(["sweep", "--config", cfg, "--out", str(out), "--workers", str(w)]) == 0
        texts.append((out / "sweep.csv").read_bytes())
    assert texts[0] == texts[1]


def test_numeric_literals():
    assert fmt(math.inf) == "inf" and fmt(-math.inf) == "-inf" and fmt(math.nan) == "nan"
    assert fmt(0.1) == "0.1" and fmt(3) == "3"


def test_db_grid():
    cfg = parse_config({"model": "ideal", "n_spins": 4, "params": {"gamma": 1.0},
                        "sweep": [{"name": "r", "kind": "db", "start": 0, "stop": 10, "num": 2}]},
                       "sweep")
    assert cfg.sweep[0].values == pytest.approx([0.0, math.log(10) / 2])


def test_log_spaced_evolution(tmp_path):
    data = {"model": "ideal", "n_spins": 4, "params": {"gamma": 1.0, "r": 0.5},
            "evolve": {"t_final": 100.0, "samples": 6, "spacing": "log", "t_start": 0.01}}
    assert main(["evolve", "--config", _write(tmp_path, data), "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "evolve.csv")
    t = [float(r[1]) for r in rows[1:]]
    assert t == pytest.approx([0, 0.01, 0.1, 1, 10, 100])


def test_validate_exits_zero(tmp_path):
    assert main(["validate", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "validate.csv")
    assert len(rows) > 2 and all(r[-1] == "pass" for r in rows[1:])
