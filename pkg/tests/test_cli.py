import csv
import io
import json

import pytest

from crnsim import cli
from crnsim.errors import ConfigError
from crnsim.optimizer import NlpInstance, instance_document
from crnsim.topology import Deployment, from_positions

from tiny_instances import LINE3, toward_destination

SMALL = {"horizon": 300, "seeds": [0, 1], "sweep_values": [1, 2]}


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(p)


def rows_of(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_empty_config_gives_defaults(tmp_path):
    cfg = cli.parse_config(write(tmp_path, "c.json", ""))
    assert (cfg.num_sus, cfg.num_pus, cfg.channels, cfg.radios) == (30, 4, 4, 3)
    assert (cfg.area_width, cfg.area_height, cfg.d_s, cfg.d_i) == (500, 500, 4, 8)
    assert (cfg.pu_tx_range, cfg.pu_if_range, cfg.window_slots) == (6, 12, 5)
    assert (cfg.batch_size, cfg.capacity, cfg.buffer) == (10, 100, 100)
    assert (cfg.loss_min, cfg.loss_max) == (0.1, 0.3)
    assert cfg.horizon == 10000 and len(cfg.seeds) == 20
    assert cfg.values == (1, 2, 3, 4, 5, 6)


def test_zero_radios_rejected(tmp_path):
    with pytest.raises(ConfigError, match="radios"):
        cli.parse_config(write(tmp_path, "c.json", {"radios": 0}))


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="fading"):
        cli.parse_config(write(tmp_path, "c.json", {"fading": True}))


def test_syntax_error_reports_position(tmp_path):
    with pytest.raises(ConfigError, match=r"c.json:2:"):
        cli.parse_config(write(tmp_path, "c.json", '{"radios": 2,\n  oops}'))


@pytest.mark.parametrize("doc", [{"sweep": "fading"}, {"protocols": ["olsr"]}, {"seeds": "1,2"},
                                 {"horizon": 0}, {"d_s": "4"}, {"pu_busy_prob": 1.5}])
def test_bad_values_rejected(tmp_path, doc):
    with pytest.raises(ConfigError):
        cli.parse_config(write(tmp_path, "c.json", doc))


def test_validation_failure_exit_code(tmp_path, capsys):
    code = cli.main(["simulate", "--config", write(tmp_path, "c.json", {"radios": 0})])
    assert code != 0
    assert "radios" in capsys.readouterr().err


def test_sweep_rows_ordering_and_pinning(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["simulate", "--config", write(tmp_path, "c.json", SMALL), "--out", str(out)]) == 0
    text = out.read_text()
    assert "# radios=3" in text and "# horizon=300" in text
    rows = rows_of(text)
    runs = [r for r in rows if r["row"] == "run"]
    assert len(runs) == 4 * 2 * 2
    assert len([r for r in rows if r["row"] == "mean"]) == 4 * 2
    key = [(["ORNC", "MORE", "EXOR", "SINGLE"].index(r["protocol"]), int(r["value"]), int(r["seed"])) for r in runs]
    assert key == sorted(key)
    cells = {}
    for r in runs:
        cells.setdefault((r["value"], r["seed"]), set()).add(r["topology"])
    assert all(len(v) == 1 for v in cells.values())


def test_output_is_byte_identical(tmp_path):
    cfg = write(tmp_path, "c.json", SMALL)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["simulate", "--config", cfg, "--out", str(a)])
    cli.main(["simulate", "--config", cfg, "--out", str(b), "--jobs", "2"])
    assert a.read_bytes() == b.read_bytes()


def test_protocol_and_buffer_flags(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"horizon": 200, "seeds": [3]})
    assert cli.main(["simulate", "--config", cfg, "--protocol", "ornc,single", "--sweep", "buffer",
                     "--values", "10,50"]) == 0
    runs = [r for r in rows_of(capsys.readouterr().out) if r["row"] == "run"]
    assert [(r["protocol"], r["value"]) for r in runs] == [("ORNC", "10"), ("ORNC", "50"), ("SINGLE", "10"),
                                                           ("SINGLE", "50")]
    assert all(r["sweep"] == "buffer" for r in runs)


def test_topology_generate(tmp_path):
    out = tmp_path / "t.json"
    assert cli.main(["topology", "--generate", "--seed", "4", "--out", str(out)]) == 0
    dep = Deployment.from_json(out.read_text())
    assert dep.num_nodes == 30 and dep.seed == 4


def test_topology_etx_table(capsys):
    assert cli.main(["topology", "--etx", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "node,etx,next_hop" and len(lines) == 31


def test_optimize_solves_instance(tmp_path, capsys):
    dep = from_positions(LINE3, d_s=4)
    inst = NlpInstance.from_deployment(dep, slots=1, capacity=10, h=toward_destination(dep))
    path = write(tmp_path, "i.json", instance_document(dep, inst))
    assert cli.main(["optimize", "--instance", path, "--budget", "300", "--oracle"]) == 0
    out = capsys.readouterr().out
    assert "local objective" in out and "violations: 0" in out and "grid objective" in out


def test_optimize_reports_violations(tmp_path, capsys):
    dep = from_positions([(0, 0), (3, 0)], d_s=4)
    inst = NlpInstance.from_deployment(dep, slots=1, capacity=10)
    doc = json.loads(instance_document(dep, inst))
    doc["variables"] = {"mu": [[[0.5]], [[0.0]]], "theta": [[[0.5]], [[0.5]]], "f": [[6.0], [0.0]]}
    assert cli.main(["optimize", "--instance", write(tmp_path, "i.json", doc)]) == 1
    out = capsys.readouterr().out
    assert "violations: 1" in out and "capacity" in out


def test_topology_needs_an_action(capsys):
    assert cli.main(["topology"]) != 0
