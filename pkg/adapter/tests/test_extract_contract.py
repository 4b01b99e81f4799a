"""End-to-end contract with the mapping engine.

The adapter's one hard promise: its output is a valid ingest file that
the engine parses with zero errors, with unit-norm descriptors, from
which a map builds successfully.
"""

import json

import numpy as np
import pytest

hx = pytest.importorskip("hopmap_extract")

import hopmap
from hopmap.cli import main as hopmap_main
from hopmap.graph import connected_component_count


def test_secondary_adapter_contract(sample_images, tmp_path):
    job = hx.ExtractionJob(image_dir=sample_images,
                           output_path=tmp_path / "frames.jsonl")
    res = hx.extract(job)
    assert res.errors == []
    assert res.n_frames == 5

    # descriptors as serialized on disk, not after the parser renormalizes
    lines = [l for l in res.output_path.read_text(encoding="utf-8").splitlines()
             if l.strip()]
    header = json.loads(lines[0])
    assert header["format"] == "hopmap-ingest/1"
    worst = 0.0
    for line in lines[1:]:
        rec = json.loads(line)
        worst = max(worst, abs(float(np.linalg.norm(rec["descriptor"])) - 1.0))
    assert worst <= 1e-6

    fs = hopmap.parse_frame_records(res.output_path)
    assert fs.n_frames == 5
    assert fs.n_records == len(lines) - 1

    g = hopmap.build_map(fs, hopmap.GraphConfig())
    assert g.n_nodes == fs.n_records
    assert connected_component_count(g) == 1
    print(f"PASS: adapter contract: 5-image extract -> parser-clean ingest "
          f"(worst |norm-1| = {worst:.2e}), build_map OK "
          f"({g.n_nodes} nodes, 1 component)")


def test_engine_cli_builds_from_adapter_output(extracted, tmp_path, capsys):
    _, res = extracted
    out = tmp_path / "map"
    assert hopmap_main(["build-map", "--ingest", str(res.output_path),
                        "--out", str(out),
                        "--stuff-vectors", str(res.stuff_path),
                        "--tau-stuff", "0.95"]) == 0
    assert "components=1" in capsys.readouterr().out
    assert (out / "map.json").exists()


def test_engine_cli_text_flag(extracted, tmp_path, capsys):
    _, res = extracted
    map_dir = tmp_path / "map"
    assert hopmap_main(["build-map", "--ingest", str(res.output_path),
                        "--out", str(map_dir)]) == 0
    plan_dir = tmp_path / "plan"
    assert hopmap_main(["plan", "--map", str(map_dir / "map.json"),
                        "--source-node", "0", "--text", "floor",
                        "--out", str(plan_dir)]) == 0
    assert (plan_dir / "plan.json").exists()
    echo = json.loads((plan_dir / "config.json").read_text())
    assert echo["params"]["text"] == "floor"
    capsys.readouterr()


def test_engine_cli_text_flag_needs_semantics(tmp_path, capsys):
    rng = np.random.default_rng(11)
    frames = [hopmap.FrameMeta(frame_id=i, image_width=100, image_height=100)
              for i in range(2)]
    records = []
    for f in range(2):
        for s in range(3):
            d = rng.standard_normal(8)
            records.append(hopmap.make_record(
                frame_id=f, segment_id=s, centroid_x=10.0 + 30 * s,
                centroid_y=20.0 + 10 * f, area_px=50.0, bbox=(0, 0, 5, 5),
                descriptor=d / np.linalg.norm(d)))
    g = hopmap.build_map(hopmap.build_frameset(frames, records),
                         hopmap.GraphConfig())
    hopmap.save_map(g, tmp_path / "map.json")
    rc = hopmap_main(["plan", "--map", str(tmp_path / "map.json"),
                      "--source-node", "0", "--text", "door",
                      "--out", str(tmp_path / "plan")])
    assert rc == 3
    assert "semantic" in capsys.readouterr().err
