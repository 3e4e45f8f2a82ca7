import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topheavy import InputError, synthetic
from topheavy.projections import (
    LinearProjection, ProjectionRecord, default_model, design, mae_by_position, project, read_records,
)


def test_noiseless_recovery():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 10, (200, 2))
    y = 2 + 0.5 * X[:, 0]
    m = LinearProjection().fit(X, y)
    assert m.intercept_ == pytest.approx(2, abs=1e-8)
    assert np.allclose(m.coef_, [0.5, 0.0], atol=1e-8)
    assert m.r2_ == pytest.approx(1.0)


def test_identity_feature():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(50, 1))
    m = LinearProjection(("f1",)).fit(x, x[:, 0])
    assert m.coef_[0] == pytest.approx(1, abs=1e-9)
    assert m.intercept_ == pytest.approx(0, abs=1e-9)
    assert m.r2_ == pytest.approx(1.0)


def test_noisy_recovery_within_three_se():
    recs = synthetic.training_records(1000, seed=3, goalie_share=0.0)
    m = LinearProjection().fit_records(recs)
    truth = np.array([1.334, 0.634, 0.282])
    est = np.concatenate([[m.intercept_], m.coef_])
    assert np.all(np.abs(est - truth) <= 3 * m.stderr_)


def test_default_predictions():
    sk = default_model("skater-default")
    rec = ProjectionRecord("x", "C", 3.0, 2.0)
    assert sk.predict_record(rec) == pytest.approx(3.800, abs=1e-12)
    assert sk.predict_record(ProjectionRecord("z", "W", 0.0, 0.0)) == 1.334
    g = default_model("goalie-default")
    assert g.intercept_ == 1.686 and list(g.coef_) == [0.628, -0.0173]
    with pytest.raises(InputError):
        default_model("nope")


def test_win_probability_shift():
    rng = np.random.default_rng(4)
    X = np.column_stack([rng.uniform(2, 10, 100), rng.uniform(2, 10, 100), rng.uniform(0, 1, 100)])
    y = 1 + 0.6 * X[:, 0] + 0.1 * X[:, 1] + 2.5 * X[:, 2] + rng.normal(0, 0.5, 100)
    m = LinearProjection(("f1", "f2", "win_prob")).fit(X, y)
    lo = m.predict_record(ProjectionRecord("g", "G", 7.0, 6.0, 0.0))
    hi = m.predict_record(ProjectionRecord("g", "G", 7.0, 6.0, 1.0))
    assert hi - lo == pytest.approx(m.coef_[2], abs=1e-12)


def test_residuals_orthogonal_and_r2_range():
    recs = synthetic.training_records(300, seed=5, goalie_share=0.0)
    X, y = design(recs, ("f1", "f2"), target=True)
    m = LinearProjection().fit(X, y)
    r = y - m.predict(X)
    D = np.column_stack([np.ones(len(y)), X])
    scale = np.linalg.norm(D, axis=0) * np.linalg.norm(r)
    assert np.all(np.abs(D.T @ r) <= 1e-6 * scale)
    assert 0 <= m.r2_ <= 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=4, max_size=4), st.floats(0, 1))
def test_predict_is_affine(v, a):
    m = default_model("skater-default")
    x1, x2 = np.array(v[:2]), np.array(v[2:])
    mix = a * x1 + (1 - a) * x2
    p = m.predict(np.vstack([x1, x2, mix]))
    assert p[2] == pytest.approx(a * p[0] + (1 - a) * p[1], abs=1e-9)


def test_rank_deficiency_and_size_errors():
    x = np.arange(20.0)
    with pytest.raises(InputError):
        LinearProjection().fit(np.column_stack([x, 2 * x]), x)
    with pytest.raises(InputError):
        LinearProjection().fit(np.ones((3, 2)), np.ones(3))
    with pytest.raises(InputError):
        LinearProjection().fit(np.column_stack([x, np.zeros(20)]), x)


def test_record_invariants():
    with pytest.raises(InputError):
        ProjectionRecord("g", "G", 1.0, 1.0)
    with pytest.raises(InputError):
        ProjectionRecord("s", "C", 1.0, 1.0, 0.5)
    with pytest.raises(InputError):
        ProjectionRecord("g", "G", 1.0, 1.0, 1.5)
    with pytest.raises(InputError):
        LinearProjection().fit_records([ProjectionRecord("s", "C", 1.0, 1.0)] * 5)


def test_json_roundtrip_exact():
    recs = synthetic.training_records(200, seed=6, goalie_share=0.0)
    m = LinearProjection().fit_records(recs)
    doc = m.to_json()
    import json
    back = LinearProjection.from_json(json.loads(json.dumps(doc)))
    assert back.intercept_ == m.intercept_ and np.array_equal(back.coef_, m.coef_)
    assert np.array_equal(back.stderr_, m.stderr_)
    with pytest.raises(InputError):
        LinearProjection.from_json({"features": ["f1"], "intercept": 0.0, "coef": [1.0, 2.0]})


def test_read_records_and_reports():
    text = ("player_id,position,f1,f2,win_prob,actual_points\n"
            "a,C,3,2,,4.0\n"
            "g,G,8,7,0.6,9.0\n")
    recs = read_records(io.StringIO(text))
    assert recs[0].win_prob is None and recs[1].win_prob == 0.6
    sk, gk = default_model("skater-default"), default_model("goalie-default")
    pred = project(recs, sk, gk)
    assert pred["a"] == pytest.approx(3.8)
    assert pred["g"] == pytest.approx(1.686 + 0.628 * 8 - 0.0173 * 7)
    mae = mae_by_position(recs, sk, gk)
    assert mae["C"] == pytest.approx(0.2)
    with pytest.raises(InputError):
        read_records(io.StringIO("player_id,f1\n"))
    with pytest.raises(InputError):
        read_records(io.StringIO("player_id,position,f1,f2,win_prob\nx,C,abc,1,\n"))
