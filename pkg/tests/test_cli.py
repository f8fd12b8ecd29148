from __future__ import annotations

import csv
import json

from hypothesis import given
from hypothesis import strategies as st

from clustersend.bounds import message_formula, select_protocol
from clustersend.cli import ScenarioConfig, main
from clustersend.model import SystemSpec


def scenario(tmp_path, name="s.json", **data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def system(n1, f1, n2, f2, faulty1=(), faulty2=(), model="byzantine", signing="cluster"):
    return {"c1": {"n": n1, "f": f1, "faulty": list(faulty1)},
            "c2": {"n": n2, "f": f2, "faulty": list(faulty2)},
            "failure_model": model, "signing": signing}


def test_bounds_equal_clusters(tmp_path, capsys):
    assert main(["bounds", "--config", scenario(tmp_path, system=system(7, 2, 7, 2))]) == 0
    assert capsys.readouterr().out.splitlines()[0].startswith("sigma = 5  (q=0, r=3)")


def test_bounds_without_faults(tmp_path, capsys):
    cfg = scenario(tmp_path, system=system(3, 0, 3, 0, signing="replica"))
    assert main(["bounds", "--config", cfg, "--format", "jsonl"]) == 0
    rows = {r["bound"]: r for r in map(json.loads, capsys.readouterr().out.splitlines())}
    assert rows["sigma"]["value"] == rows["tau"]["value"] == 1


def test_bounds_tau2(tmp_path, capsys):
    cfg = scenario(tmp_path, system=system(5, 1, 9, 2, signing="replica"))
    main(["bounds", "--config", cfg, "--format", "jsonl"])
    rows = {r["bound"]: r for r in map(json.loads, capsys.readouterr().out.splitlines())}
    assert (rows["tau"]["kind"], rows["tau"]["q"], rows["tau"]["r"], rows["tau"]["value"]) == ("tau2", 1, 0, 5)


def test_run_bijective_with_dead_pairs(tmp_path, capsys):
    trace = {"placement": {"c1": [1, 2, 7], "c2": [0, 2]}, "drops": [0, 1, 2]}
    (tmp_path / "t.json").write_text(json.dumps(trace))
    cfg = scenario(tmp_path, system=system(8, 3, 7, 2), adversary={"scripted": "t.json"})
    out = tmp_path / "transcript.json"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "msgs=6 receipt=true agreement=true confirmation=true"
    data = json.loads(out.read_text())
    assert data["omitted"] == [0, 1, 2] and data["metrics"]["inter_cluster_msgs"] == 6


def test_run_without_faults(tmp_path, capsys):
    assert main(["run", "--config", scenario(tmp_path, system=system(3, 0, 2, 0))]) == 0
    assert capsys.readouterr().out.startswith("msgs=1 ")


def test_run_scripted_forgery_on_broadcast(tmp_path, capsys):
    forged = "77"
    injections = [{"sender": [1, 0], "receiver": [2, i], "value": forged,
                   "signers": [[1, 0], [1, 1]]} for i in range(4)]
    trace = {"placement": {"c1": [0, 1], "c2": [3]}, "injections": injections}
    cfg = scenario(tmp_path, system=system(5, 2, 4, 1, signing="replica"),
                   protocol={"protocol": "rb-brs"}, value="76", adversary={"scripted": trace})
    out = tmp_path / "t.json"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert "agreement=true" in capsys.readouterr().out
    received = json.loads(out.read_text())["received"]
    assert all(forged not in v for k, v in received.items() if k != "c2r3")


def test_verify_bijective(tmp_path, capsys):
    cfg = scenario(tmp_path, system=system(7, 2, 7, 2), protocol={"protocol": "bs-bcs"}, seeds=[0])
    assert main(["verify", "--config", cfg, "--max-enum", "7"]) == 0
    assert capsys.readouterr().out.startswith("verified")


def test_verify_guard(tmp_path):
    cfg = scenario(tmp_path, system=system(7, 2, 7, 2))
    assert main(["verify", "--config", cfg]) == 2


def test_verify_weakened_bijective_finds_counterexample(tmp_path, capsys):
    cfg = scenario(tmp_path, system=system(5, 1, 5, 1),
                   protocol={"protocol": "bs-bcs", "sender_set_size": 2}, seeds=[0, 1])
    out = tmp_path / "cex.json"
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 1
    assert "counterexample" in capsys.readouterr().out
    assert json.loads(out.read_text())["receipt"] is False


def test_verify_without_faults(tmp_path, capsys):
    cfg = scenario(tmp_path, system=system(3, 0, 3, 0))
    assert main(["verify", "--config", cfg]) == 0
    assert "(1 placements)" in capsys.readouterr().out


def test_sweep_matches_formulas(tmp_path):
    cells = [[4, 1, 4, 1], [7, 2, 7, 2], [10, 3, 7, 2], [5, 1, 9, 2]]
    cfg = scenario(tmp_path, "g.json", cells=cells, seeds=[0])
    out = tmp_path / "o.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4
    for row, cell in zip(rows, cells):
        spec = SystemSpec.of(*cell)
        assert int(row["msgs"]) == message_formula(spec, select_protocol(spec))
        assert row["receipt"] == row["agreement"] == row["confirmation"] == "true"


def test_sweep_empty_grid_is_header_only(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["sweep", "--config", scenario(tmp_path, "g.json", cells=[]), "--out", str(out)]) == 0
    assert out.read_text().splitlines() == [
        "n1,f1,n2,f2,model,signing,protocol,alpha,msgs,value_bytes,replica_sigs,"
        "cluster_sigs,receipt,agreement,confirmation,max_size_units"]


def test_sweep_jsonl_size_series(tmp_path, capsys):
    assert main(["sweep", "--preset", "size", "--format", "jsonl"]) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    native = [r["max_size_units"] for r in rows if r["signing"] == "cluster"]
    emulated = [r["max_size_units"] for r in rows if r["signing"] == "emulated"]
    assert len(set(native)) == 1
    assert [b - a for a, b in zip(emulated, emulated[1:])] == [1, 1, 1]


def test_unknown_scenario_field(tmp_path):
    assert main(["run", "--config", scenario(tmp_path, system=system(3, 0, 3, 0), extra=1)]) == 2


def test_invalid_system_exit_code(tmp_path):
    assert main(["run", "--config", scenario(tmp_path, system=system(4, 2, 4, 1))]) == 2


@given(st.integers(1, 8), st.integers(1, 8), st.lists(st.integers(0, 2 ** 32), max_size=4),
       st.binary(max_size=8), st.sampled_from(["none", "exhaustive"]))
def test_scenario_round_trip(n1, n2, seeds, value, adversary):
    cfg = ScenarioConfig.from_json({
        "system": system(n1, (n1 - 1) // 2, n2, n2 - 1),
        "protocol": {"protocol": "rb-bcs"},
        "value": value.hex(), "seeds": seeds, "adversary": adversary,
    })
    again = ScenarioConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert again == cfg
