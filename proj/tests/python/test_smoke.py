import json
import os

import numpy as np
import pytest

import advgrid

SMALL = {"grid": {"dimension": 2, "width_ratio": 1.0, "anchor_bits": 0}, "seed": 1}


def flat(w=40, h=40, bg=200):
    return np.full((h, w), bg, dtype=np.uint8)


def test_iou_half_overlap():
    assert advgrid.iou((0, 0, 10, 10), (5, 0, 10, 10)) == pytest.approx(1 / 3)


def test_genome_round_trip():
    settings = advgrid.GridSettings()
    settings.dimension = 3
    settings.anchor_bits = 4
    bits = "0110" + "1001" + "101010101"
    spec = advgrid.decode_genome(bits, settings)
    assert spec.anchor == (6 / 15, 9 / 15)
    assert list(spec.cells) == [1, 0, 1, 0, 1, 0, 1, 0, 1]
    assert advgrid.encode_genome(spec, 4) == bits
    assert settings.genome_length == 17


def test_compose_paints_opaque_cells_only():
    spec = advgrid.GridSpec()
    spec.dimension = 2
    spec.width_ratio = 1.0
    spec.cells = [1, 0, 0, 1]
    spec.color = 0
    out = advgrid.compose(flat(20, 20, 255), spec, (0, 0, 20, 20))
    assert out.shape == (20, 20) and out.dtype == np.uint8
    assert out[0, 0] == 0 and out[15, 15] == 0
    assert out[0, 15] == 255 and out[15, 0] == 255
    assert int((out == 0).sum()) == 200


def test_splice_tiles_the_pattern():
    spec = advgrid.GridSpec()
    spec.dimension = 2
    spec.cells = [1, 0, 0, 1]
    tile = advgrid.splice_pattern(spec, tiles_x=2, tiles_y=2, cell_px=3)
    assert tile.shape == (12, 12)
    assert tile[0, 0] == 0 and tile[0, 3] == 255 and tile[3, 3] == 0 and tile[6, 6] == 0


def test_tps_reproduces_an_affine_map():
    src = [(0, 0), (10, 0), (0, 10), (10, 10), (5, 3)]
    dst = [(2 * x + 1, 2 * y - 1) for x, y in src]
    warp = advgrid.fit_tps(src, dst)
    x, y = warp(7.0, 4.0)
    assert x == pytest.approx(15.0, abs=1e-9) and y == pytest.approx(7.0, abs=1e-9)


def test_protocol_request_and_response():
    req = json.loads(advgrid.protocol.make_request(7, flat(4, 3)))
    assert req["id"] == 7 and isinstance(req["image_png_b64"], str)
    line = json.dumps({"id": 7, "detections": [{"bbox": [1, 2, 3, 4], "score": 0.75, "class": "person"}]})
    (det,) = advgrid.protocol.parse_response(line, 7)
    assert det.bbox.as_tuple() == (1, 2, 3, 4) and det.score == 0.75
    with pytest.raises(advgrid.ProtocolError):
        advgrid.protocol.parse_response(json.dumps({"id": 7, "error": "boom"}), 7)


def test_config_validation_raises():
    with pytest.raises(advgrid.ConfigError):
        advgrid.Config({"ga": {"p_c": 2.0}})
    assert advgrid.Config(SMALL).to_dict()["grid"]["dimension"] == 2


def test_attack_on_monotone_oracle_succeeds():
    res = advgrid.run_attack(flat(), (4, 4, 32, 32), SMALL)
    assert res.success and res.status == advgrid.AttackStatus.Succeeded
    assert res.best_confidence < advgrid.DETECTION_THRESHOLD
    assert res.best_fit == pytest.approx(1 - res.best_confidence)
    assert 0 < res.queries_used <= 500


def test_python_callback_matches_builtin_oracle():
    box = (4, 4, 32, 32)

    def detector(img):
        x, y, w, h = box
        return [(box, float(img[y:y + h, x:x + w].mean()) / 255.0)]

    a = advgrid.run_attack(flat(), box, SMALL)
    b = advgrid.run_attack(flat(), box, SMALL, advgrid.callback_oracle(detector))
    assert a.history == b.history and a.best_genome == b.best_genome


def test_budget_is_respected():
    cfg = dict(SMALL, grid={"dimension": 2, "width_ratio": 0.1, "anchor_bits": 0}, ga={"budget": 10})
    res = advgrid.run_attack(flat(), (4, 4, 32, 32), cfg)
    assert res.status == advgrid.AttackStatus.BudgetExhausted and res.queries_used == 10


def test_evaluate_reports_asr():
    scenes = [("s%02d" % i, flat(bg=150 + 10 * i), (4, 4, 32, 32)) for i in range(3)]
    report = advgrid.evaluate(scenes, SMALL)
    assert [s["id"] for s in report["samples"]] == ["s00", "s01", "s02"]
    assert report["asr"] == pytest.approx(1.0)
    assert advgrid.asr([0.1, 0.6, 0.49, 0.5]) == 0.5


@pytest.mark.skipif("ADVGRID_ECHO_ADAPTER" not in os.environ, reason="echo adapter not built")
def test_subprocess_adapter():
    oracle = advgrid.subprocess_oracle(os.environ["ADVGRID_ECHO_ADAPTER"], 10000)
    (det,) = oracle.query(flat(8, 8, 51))
    assert det.score == pytest.approx(0.2) and det.bbox.as_tuple() == (0, 0, 8, 8)
    res = advgrid.run_attack(flat(20, 20), (0, 0, 20, 20), SMALL, oracle)
    assert res.success
