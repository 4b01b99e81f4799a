import json

import numpy as np
import pytest

from hopmap.errors import IngestError
from hopmap.ingest import (FrameMeta, build_frameset, filter_small, filter_stuff,
                           framesets_equal, make_record, parse_frame_records,
                           read_vectors, write_frame_records, write_vectors)

from util import random_frameset, unit


def test_round_trip_preserves_counts_and_content(tmp_path):
    rng = np.random.default_rng(3)
    fs = random_frameset(rng, 2, [3, 3])
    path = tmp_path / "records.jsonl"
    write_frame_records(fs, path)
    back = parse_frame_records(path)
    assert back.n_frames == 2
    assert back.n_records == 6
    assert framesets_equal(fs, back)


def test_round_trip_optional_fields(tmp_path):
    rec = make_record(0, 0, 10.0, 20.0, 500.0, (5, 15, 15, 25),
                      unit(np.arange(1, 5.0)), semantic_vector=unit(np.ones(3)),
                      gt_instance=7, gt_category=2)
    fs = build_frameset([FrameMeta(0, 640, 480)], [rec])
    path = tmp_path / "r.jsonl"
    write_frame_records(fs, path)
    back = parse_frame_records(path)
    assert framesets_equal(fs, back)
    got = back.records_of(0)[0]
    assert got.gt_instance == 7 and got.gt_category == 2


def test_bad_norm_rejected_with_record_name(tmp_path):
    path = tmp_path / "bad.jsonl"
    header = {"format": "hopmap-ingest/1", "descriptor_dim": 2, "pano_wrap": False,
              "frames": [{"frame_id": 0, "image_width": 640, "image_height": 480}]}
    rec = {"frame_id": 0, "segment_id": 4, "centroid_x": 1.0, "centroid_y": 1.0,
           "area_px": 10.0, "bbox": [0, 0, 2, 2], "descriptor": [0.5, 0.0]}
    path.write_text(json.dumps(header) + "\n" + json.dumps(rec) + "\n")
    with pytest.raises(IngestError, match=r"segment 4"):
        parse_frame_records(path)


def test_near_unit_norm_renormalized():
    vec = np.array([1.0 + 5e-4, 0.0, 0.0])
    rec = make_record(0, 0, 1.0, 1.0, 10.0, (0, 0, 2, 2), vec)
    assert np.linalg.norm(rec.descriptor) == pytest.approx(1.0, abs=1e-12)


def test_empty_file_is_empty_frameset(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    fs = parse_frame_records(path)
    assert fs.n_frames == 0 and fs.n_records == 0


def test_malformed_line_names_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    header = {"format": "hopmap-ingest/1", "descriptor_dim": 2, "pano_wrap": False,
              "frames": [{"frame_id": 0, "image_width": 640, "image_height": 480}]}
    path.write_text(json.dumps(header) + "\n{oops\n")
    with pytest.raises(IngestError, match=r"line 2"):
        parse_frame_records(path)


def test_wrong_header_format_rejected(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"format": "something-else/9"}\n')
    with pytest.raises(IngestError, match="hopmap-ingest/1"):
        parse_frame_records(path)


def test_duplicate_frame_segment_rejected():
    recs = [make_record(0, 1, 1.0, 1.0, 10.0, (0, 0, 2, 2), [1.0, 0.0]),
            make_record(0, 1, 2.0, 2.0, 10.0, (0, 0, 2, 2), [0.0, 1.0])]
    with pytest.raises(IngestError, match=r"duplicate"):
        build_frameset([FrameMeta(0, 640, 480)], recs)


def test_non_contiguous_frames_rejected():
    with pytest.raises(IngestError, match="contiguous"):
        build_frameset([FrameMeta(0, 640, 480), FrameMeta(2, 640, 480)], [])


def test_centroid_outside_bounds_rejected():
    rec = make_record(0, 0, 700.0, 10.0, 10.0, (0, 0, 2, 2), [1.0, 0.0])
    with pytest.raises(IngestError, match="outside image bounds"):
        build_frameset([FrameMeta(0, 640, 480)], [rec])


def test_descriptor_dim_mismatch_rejected():
    recs = [make_record(0, 0, 1.0, 1.0, 10.0, (0, 0, 2, 2), [1.0, 0.0]),
            make_record(0, 1, 2.0, 2.0, 10.0, (0, 0, 2, 2), [1.0, 0.0, 0.0])]
    with pytest.raises(IngestError, match="dim"):
        build_frameset([FrameMeta(0, 640, 480)], recs)


def test_filter_stuff_removes_high_similarity():
    # 10 records, 4 close to stuff vectors: 6 survive, frames untouched.
    rng = np.random.default_rng(11)
    stuff = [np.eye(6)[0], np.eye(6)[1]]
    recs = []
    for s in range(10):
        if s < 4:
            base = stuff[s % 2] * 0.99 + 0.01 * unit(rng.normal(size=6))
        else:
            tail = np.zeros(6)
            tail[2:] = rng.normal(size=4)
            base = tail
        recs.append(make_record(0, s, 10.0 + s, 10.0, 100.0, (0, 0, 5, 5),
                                unit(rng.normal(size=6)),
                                semantic_vector=unit(base)))
    fs = build_frameset([FrameMeta(0, 640, 480)], recs)
    out = filter_stuff(fs, stuff, tau_stuff=0.9)
    # independent check of which records should fall
    expected = [r for r in recs
                if max(float(v @ r.semantic_vector) for v in stuff) <= 0.9]
    assert out.n_records == len(expected) == 6
    assert [r.segment_id for r in out.records_of(0)] == [r.segment_id for r in expected]
    assert out.n_frames == fs.n_frames


def test_filter_stuff_keeps_records_without_semantics():
    rec = make_record(0, 0, 1.0, 1.0, 10.0, (0, 0, 2, 2), [1.0, 0.0])
    fs = build_frameset([FrameMeta(0, 640, 480)], [rec])
    out = filter_stuff(fs, [np.array([1.0, 0.0])], tau_stuff=0.5)
    assert out.n_records == 1


def test_filter_stuff_empty_vectors_is_identity():
    rng = np.random.default_rng(5)
    fs = random_frameset(rng, 2, [2, 2])
    out = filter_stuff(fs, [], tau_stuff=0.9)
    assert framesets_equal(fs, out)


def test_filter_small_thresholds():
    # 12 records on a 640x480 frame; 3 sit below 0.2% (614.4 px).
    areas = [100.0, 300.0, 614.0, 614.4, 615.0, 700.0,
             1000.0, 2000.0, 3000.0, 4000.0, 5000.0, 6000.0]
    recs = [make_record(0, s, 10.0 + s, 10.0, a, (0, 0, 5, 5), [1.0, 0.0])
            for s, a in enumerate(areas)]
    fs = build_frameset([FrameMeta(0, 640, 480)], recs)
    out = filter_small(fs, min_area_frac=0.002)
    survivors = [a for a in areas if a / (640 * 480) >= 0.002]
    assert out.n_records == len(survivors) == 9
    assert [r.area_px for r in out.records_of(0)] == survivors


def test_filter_small_zero_threshold_is_identity():
    rng = np.random.default_rng(6)
    fs = random_frameset(rng, 2, [3, 1])
    assert framesets_equal(filter_small(fs, 0.0), fs)


def test_filters_idempotent_and_keep_frames():
    rng = np.random.default_rng(7)
    fs = random_frameset(rng, 3, [4, 4, 4])
    once = filter_small(fs, 0.00001)
    twice = filter_small(once, 0.00001)
    assert framesets_equal(once, twice)
    assert once.n_frames == 3


def test_vectors_round_trip(tmp_path):
    vecs = {"floor": unit(np.arange(1, 5.0)), "wall": unit(np.ones(4))}
    path = tmp_path / "vecs.json"
    write_vectors(vecs, path)
    back = read_vectors(path)
    assert set(back) == {"floor", "wall"}
    for name in vecs:
        assert np.array_equal(back[name], vecs[name])


def test_vectors_bad_norm_rejected(tmp_path):
    path = tmp_path / "vecs.json"
    path.write_text(json.dumps({"format": "hopmap-vectors/1",
                                "vectors": {"x": [2.0, 0.0]}}))
    with pytest.raises(IngestError, match="norm"):
        read_vectors(path)


def test_vectors_wrong_format_rejected(tmp_path):
    path = tmp_path / "vecs.json"
    path.write_text('{"vectors": {"x": [1.0]}}')
    with pytest.raises(IngestError, match="hopmap-vectors/1"):
        read_vectors(path)
