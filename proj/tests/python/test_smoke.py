import json

import pytest

import chaingen


def test_quality_arithmetic():
    assert chaingen.total_quality(7.45, 8.70) == pytest.approx(8.07, abs=0.01)
    assert chaingen.total_quality(7.61, 9.10) == pytest.approx(8.36, abs=0.01)
    assert chaingen.score_gd(-1.0) == pytest.approx(1.0)
    assert chaingen.score_gd(1.0) == pytest.approx(10.0)


def test_dtw_and_divergences():
    assert chaingen.dtw_distance(["dining", "dining", "shopping"], ["dining", "shopping", "shopping"]) == 0.0
    assert chaingen.dtw_distance(["dining"], ["shopping"]) == 1.0
    assert chaingen.js_divergence([1.0, 0.0], [1.0, 0.0]) == pytest.approx(0.0)
    assert chaingen.ks_statistic([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    m = chaingen.pairwise_dtw([["dining"], ["shopping"], ["dining"]], threads=2)
    assert m == [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]


def test_clustering():
    xs = [0.0, 1.0, 2.0, 10.0, 11.0, 12.0]
    d = [[abs(a - b) for b in xs] for a in xs]
    k, labels, scores = chaingen.select_k(d, [2, 3])
    assert k == 2
    assert labels[:3] == [labels[0]] * 3 and labels[3:] == [labels[3]] * 3
    assert set(scores) == {2, 3}
    div = chaingen.diversity(d, labels)
    assert -1.0 <= div["div"] <= 1.0
    assert div["score_gd"] == pytest.approx(chaingen.score_gd(div["div"]))


def test_generate_and_evaluate(tmp_path):
    out = tmp_path / "chains.jsonl"
    one = chaingen.generate(workers=1, samples=4, seed=7, out=out)
    four = chaingen.generate(workers=4, samples=4, seed=7)
    assert one["metrics"]["successes"] == 4
    assert len(one["chains"]) == 4
    assert json.dumps(one["chains"]) == json.dumps(four["chains"])
    assert len(out.read_text().splitlines()) == 4
    assert chaingen.load_chains(out) == one["chains"]

    report = chaingen.evaluate(out, out, q_subjective=8.0)
    assert report["q_obj"] == pytest.approx(10.0)
    seq = chaingen.discretize(one["chains"][0])
    assert len(seq) > 0


def test_schedule():
    r = chaingen.schedule([], [{"priority": 1.0, "deadline": 600, "estimate": 50}],
                          {"start_bound": 0, "end_bound": 480})
    assert len(r["schedule"]) == 1
    assert r["schedule"][0]["end"] - r["schedule"][0]["start"] == 60


def test_errors_carry_codes():
    with pytest.raises(chaingen.ChaingenError) as info:
        chaingen.select_k([[0.0]], [2])
    assert info.value.code == "invalid_k"
    with pytest.raises(chaingen.ChaingenError):
        chaingen.generate(workers=0, samples=1)
    cfg = chaingen.default_config()
    assert "api_key" not in json.dumps(cfg).replace("api_key_env", "")
