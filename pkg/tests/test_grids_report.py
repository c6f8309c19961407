import json
import math

import numpy as np
import pytest

from bellman_verify.core import classify
from bellman_verify.grids import GridSpec, random_points
from bellman_verify.report import VerificationReport, config_hash, csv_text, merge, to_json


@pytest.mark.parametrize("c", [1.5, 2.0, 100.0])
def test_region_grids_stay_in_region(c):
    # closed grids put their end angles on the boundaries, where rounding may fall on either side
    for region, allowed in (("D1", {1, 12, 2}), ("D2", {1, 2, 3, 12, 23}), ("D3", {2, 3, 23})):
        x, y, w, v = GridSpec(c_values=(c,), n_angle=9, n_w=5, n_t=7, region=region).points(c)
        assert set(np.unique(classify(x, y, w, v, c))) <= allowed
        t = w * v
        assert np.all(t >= 1 - 1e-12) and np.all(t <= c * (1 + 1e-12))
    for region, interior in (("D1", 1), ("D2", 2), ("D3", 3)):
        g = GridSpec(c_values=(c,), n_angle=9, n_w=5, n_t=7, region=region, interior=0.01)
        assert set(np.unique(classify(*g.points(c), c))) == {interior}


def test_boundary_grids():
    c = 4.0
    x, y, w, v = GridSpec(c_values=(c,), n_angle=6, n_w=3, n_t=5, region="boundary23").points(c)
    assert np.all(np.abs(y) == 10 * np.abs(x))
    x, y, w, v = GridSpec(c_values=(c,), n_angle=6, n_w=3, n_t=5, region="boundary12").points(c)
    thr = 20 * c * np.abs(x) * (c / (w * v)) ** 0.25
    assert np.allclose(np.abs(y), thr, rtol=1e-14)


def test_grid_sizes_and_signs():
    g = GridSpec(c_values=(2.0,), n_angle=4, n_w=3, n_t=2, region="D2")
    x, y, w, v = g.points(2.0)
    assert x.size == g.size == 24
    assert {(np.sign(a), np.sign(b)) for a, b in zip(x, y)} == {(1, 1), (-1, 1), (1, -1), (-1, -1)}
    s, w3, v3 = GridSpec(n_angle=5, n_w=3, n_t=3).coordinate_grid(2.0)
    assert s.size == 45 and s.min() == -1 and s.max() == 1


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(region="nowhere")
    with pytest.raises(ValueError):
        GridSpec(c_values=(1.0,))
    with pytest.raises(ValueError):
        GridSpec(n_angle=0)
    with pytest.raises(ValueError):
        GridSpec(scale="cubic")


def test_random_points_interior(rng):
    for region, k in (("D1", 1), ("D2", 2), ("D3", 3)):
        x, y, w, v = random_points(region, 500, 3.0, rng)
        assert np.all(classify(x, y, w, v, 3.0) == k)


def test_report_pass_logic_and_merge():
    a = VerificationReport("a", 10, -1.0, 0.0, {"x": 1})
    b = VerificationReport("a", 5, 0.5, 1.0, {"x": 2})
    assert a.passed and b.passed
    m = merge([a, b])
    assert m.total_points == 15 and m.witness == {"x": 2}
    bad_sub = VerificationReport("p", 1, 0.0, 1.0, subchecks=[VerificationReport("q", 1, 2.0, 1.0)])
    assert not bad_sub.passed
    assert bad_sub.line().startswith("FAIL p")
    with pytest.raises(ValueError):
        merge([])


def test_json_is_deterministic_and_clean():
    r = VerificationReport("a", 3, -math.inf, 1e-9, {"x": np.float64(0.5), "n": np.int64(2)}, wall_time=1.23)
    text = to_json([r], {"seed": 1})
    assert text == to_json([r], {"seed": 1})
    payload = json.loads(text)
    assert payload["reports"][0]["worst_violation"] == "-inf"
    assert "wall_time" not in text
    assert "wall_time" in to_json([r], {"seed": 1}, timing=True)
    assert payload["config_hash"] == config_hash({"seed": 1}) != config_hash({"seed": 2})


def test_csv_header():
    text = csv_text(["a", "b"], [[1, 0.1], [2, 1 / 3]], {"k": "v"})
    lines = text.splitlines()
    assert lines[0] == f"# bellman-verify 0.1.0 schema=1 config={config_hash({'k': 'v'})}"
    assert lines[1] == "a,b"
    assert float(lines[3].split(",")[1]) == 1 / 3
