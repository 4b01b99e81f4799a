import json

import numpy as np
import pytest

from hopmap.cli import main
from hopmap.graph import load_map
from hopmap.ingest import write_frame_records, write_vectors
from hopmap.planning import PlanStrategy, plan

from util import random_frameset, unit


WORLD = ["--seed", "42", "--n-objects", "12", "--corridor-length", "20",
         "--descriptor-dim", "16", "--frames", "10"]


@pytest.fixture(scope="module")
def ingest_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "traverse.jsonl"
    assert main(["sim-export", *WORLD, "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def map_dir(tmp_path_factory, ingest_file):
    out = tmp_path_factory.mktemp("map")
    assert main(["build-map", "--ingest", str(ingest_file),
                 "--out", str(out)]) == 0
    return out


def test_sim_export_writes_ingest_header(ingest_file):
    first = json.loads(ingest_file.read_text().splitlines()[0])
    assert first["format"] == "hopmap-ingest/1"
    assert first["descriptor_dim"] == 16
    assert len(first["frames"]) == 10


def test_build_map_summary_and_artifacts(map_dir, capsys, ingest_file):
    g = load_map(map_dir / "map.json")
    n_intra = sum(1 for e in g.edges if e.kind == "intra")
    n_inter = len(g.edges) - n_intra
    assert main(["build-map", "--ingest", str(ingest_file),
                 "--out", str(map_dir)]) == 0
    outp = capsys.readouterr().out
    assert f"map: {g.n_nodes} nodes, {n_intra} intra edges, " \
        f"{n_inter} inter edges, components=1" in outp
    cfg = json.loads((map_dir / "config.json").read_text())
    assert cfg["format"] == "hopmap-config/1"
    assert cfg["command"] == "build-map"
    assert cfg["params"]["theta"] == 0.7


def test_build_map_deterministic(tmp_path, ingest_file):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["build-map", "--ingest", str(ingest_file), "--out", str(a)]) == 0
    assert main(["build-map", "--ingest", str(ingest_file), "--out", str(b)]) == 0
    assert (a / "map.json").read_bytes() == (b / "map.json").read_bytes()


def test_build_map_corrupt_line_exit_2(tmp_path, ingest_file, capsys):
    bad = tmp_path / "bad.jsonl"
    lines = ingest_file.read_text().splitlines()
    lines[2] = "{not json"
    bad.write_text("\n".join(lines) + "\n")
    code = main(["build-map", "--ingest", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert "line 3" in err


def test_build_map_missing_file_exit_2(tmp_path):
    code = main(["build-map", "--ingest", str(tmp_path / "nope.jsonl"),
                 "--out", str(tmp_path / "o")])
    assert code == 2


def test_plan_matches_library(tmp_path, map_dir, capsys):
    g = load_map(map_dir / "map.json")
    out = tmp_path / "plan"
    assert main(["plan", "--map", str(map_dir / "map.json"),
                 "--out", str(out), "--source-node", "0",
                 "--target-node", str(g.n_nodes - 1), "--figures"]) == 0
    doc = json.loads((out / "plan.json").read_text())
    want = plan(g, 0, g.n_nodes - 1, PlanStrategy.INTRA_DT)
    assert doc["format"] == "hopmap-plan/1"
    assert doc["cost"] == want.cost
    assert [s["node_id"] for s in doc["steps"]] == list(want.steps)
    assert doc["edge_kinds"] == list(want.edge_kinds)
    assert (out / "plan.dot").exists()
    assert (out / "plan.png").stat().st_size > 1024
    assert f"cost {want.cost}" in capsys.readouterr().out


def test_plan_bad_target_exit_4(tmp_path, map_dir, capsys):
    code = main(["plan", "--map", str(map_dir / "map.json"),
                 "--out", str(tmp_path / "p"), "--source-node", "0",
                 "--target-node", "99999"])
    assert code == 4
    assert "99999" in capsys.readouterr().err


def test_plan_missing_endpoints_exit_2(tmp_path, map_dir):
    code = main(["plan", "--map", str(map_dir / "map.json"),
                 "--out", str(tmp_path / "p"), "--source-node", "0"])
    assert code == 2


def test_plan_text_query_resolves_goal(tmp_path, map_dir):
    g = load_map(map_dir / "map.json")
    target = g.nodes[-1].semantic_vector
    vecs = tmp_path / "target.jsonl"
    write_vectors({"goal": target}, vecs)
    out = tmp_path / "plan"
    assert main(["plan", "--map", str(map_dir / "map.json"), "--out", str(out),
                 "--source-node", "0", "--target-vec", str(vecs)]) == 0
    doc = json.loads((out / "plan.json").read_text())
    goal = doc["steps"][-1]["node_id"]
    assert np.allclose(g.nodes[goal].semantic_vector @ target, 1.0, atol=1e-9)


def test_plan_text_query_without_semantics_exit_3(tmp_path, capsys):
    fs = random_frameset(np.random.default_rng(70), 3, [3, 3, 3], dim=8)
    ingest = tmp_path / "plain.jsonl"
    write_frame_records(fs, ingest)
    out = tmp_path / "m"
    assert main(["build-map", "--ingest", str(ingest), "--out", str(out)]) == 0
    vecs = tmp_path / "q.jsonl"
    write_vectors({"goal": unit(np.ones(32))}, vecs)
    code = main(["plan", "--map", str(out / "map.json"),
                 "--out", str(tmp_path / "p"), "--source-node", "0",
                 "--target-vec", str(vecs)])
    assert code == 3
    assert "semantic" in capsys.readouterr().err


def test_plan_ambiguous_vector_file_exit_3(tmp_path, map_dir, capsys):
    vecs = tmp_path / "two.jsonl"
    write_vectors({"a": unit(np.ones(32)), "b": unit(np.arange(1.0, 33.0))}, vecs)
    code = main(["plan", "--map", str(map_dir / "map.json"),
                 "--out", str(tmp_path / "p"), "--source-node", "0",
                 "--target-vec", str(vecs)])
    assert code == 3
    err = capsys.readouterr().err
    assert "pick one by name" in err
    assert main(["plan", "--map", str(map_dir / "map.json"),
                 "--out", str(tmp_path / "p2"), "--source-node", "0",
                 "--target-vec", str(vecs), "--target-vec-name", "a"]) == 0


def test_plan_relational_query(tmp_path, map_dir):
    g = load_map(map_dir / "map.json")
    tv, rv = tmp_path / "t.jsonl", tmp_path / "r.jsonl"
    write_vectors({"t": g.nodes[-1].semantic_vector}, tv)
    write_vectors({"r": g.nodes[0].semantic_vector}, rv)
    out = tmp_path / "rel"
    assert main(["plan", "--map", str(map_dir / "map.json"), "--out", str(out),
                 "--source-node", "0", "--target-vec", str(tv),
                 "--ref-vec", str(rv), "--k", "2"]) == 0
    doc = json.loads((out / "plan.json").read_text())
    assert doc["cost"] >= 0
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["params"]["k"] == 2


def test_eval_recall_outputs(tmp_path, capsys):
    out = tmp_path / "recall"
    assert main(["eval-recall", *WORLD, "--layers", "0,1",
                 "--thetas", "0.1,0.7", "--out", str(out), "--figures"]) == 0
    lines = (out / "recall.csv").read_text().strip().splitlines()
    assert lines[0] == "layer,theta=0.1,theta=0.7"
    assert len(lines) == 3
    assert (out / "recall.png").stat().st_size > 1024
    assert "layer 0:" in capsys.readouterr().out


def test_eval_assoc_outputs(tmp_path, capsys):
    out = tmp_path / "assoc"
    assert main(["eval-assoc", *WORLD, "--out", str(out)]) == 0
    lines = (out / "assoc.csv").read_text().strip().splitlines()
    assert lines[0] == "instance_acc,category_acc"
    inst, cat = (float(x) for x in lines[1].split(","))
    assert inst == 1.0 and cat == 1.0  # zero-noise world
    assert "instance_acc=1.0000" in capsys.readouterr().out


def test_sim_nav_outputs(tmp_path, capsys):
    out = tmp_path / "nav"
    assert main(["sim-nav", *WORLD, "--trials", "2", "--max-steps", "300",
                 "--out", str(out), "--figures"]) == 0
    lines = (out / "trials.csv").read_text().strip().splitlines()
    assert lines[0] == "trial,success,steps_taken,final_min_path_len"
    assert len(lines) == 3
    assert (out / "trials.png").stat().st_size > 1024
    assert (out / "trial_00.png").exists()
    assert "trials succeeded" in capsys.readouterr().out
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["params"]["control_mode"] == "continuous"


def test_export_dot_stdout(map_dir, capsys):
    assert main(["export-dot", "--map", str(map_dir / "map.json")]) == 0
    outp = capsys.readouterr().out
    g = load_map(map_dir / "map.json")
    assert outp.count("--") == len(g.edges)
    assert outp.startswith("graph")


def test_export_dot_file(tmp_path, map_dir):
    path = tmp_path / "map.dot"
    assert main(["export-dot", "--map", str(map_dir / "map.json"),
                 "--out", str(path)]) == 0
    assert path.exists() and "graph" in path.read_text()


def test_pano_ingest_round_trip_keeps_wrap_edges(tmp_path):
    ingest = tmp_path / "ring.jsonl"
    assert main(["sim-export", "--seed", "42", "--n-objects", "12",
                 "--world-mode", "pure_rotation", "--frames", "12",
                 "--out", str(ingest)]) == 0
    header = json.loads(ingest.read_text().splitlines()[0])
    assert header["pano_wrap"] is True
    out = tmp_path / "m"
    assert main(["build-map", "--ingest", str(ingest), "--out", str(out)]) == 0
    g = load_map(out / "map.json")
    assert g.config.pano_wrap
    wrap = [e for e in g.edges if e.kind == "inter"
            and {g.nodes[e.a].frame_id, g.nodes[e.b].frame_id} == {0, 11}]
    assert wrap


def test_build_map_with_filters(tmp_path, ingest_file):
    stuff = tmp_path / "stuff.jsonl"
    write_vectors({"bg": unit(np.ones(32))}, stuff)
    out = tmp_path / "filtered"
    assert main(["build-map", "--ingest", str(ingest_file), "--out", str(out),
                 "--stuff-vectors", str(stuff), "--tau-stuff", "0.999",
                 "--min-area-frac", "0.0001"]) == 0
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["params"]["tau_stuff"] == 0.999
    assert cfg["params"]["min_area_frac"] == 0.0001
