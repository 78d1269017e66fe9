import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from interface_lab import stats as S
from interface_lab.lattice import LatticeGeometry
from interface_lab.model import Params


@given(st.integers(1, 5000).flatmap(lambda t: st.tuples(st.integers(0, t), st.just(t))))
def test_wilson_contains_estimate(ht):
    h, t = ht
    lo, hi = S.wilson(h, t)
    assert 0 <= lo <= h / t <= hi <= 1


def test_wilson_edges():
    assert S.wilson(0, 100)[0] == 0.0
    assert S.wilson(100, 100)[1] == 1.0
    assert S.wilson(0, 0) == (0.0, 1.0)
    lo, hi = S.wilson(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)


@given(st.integers(1, 100), st.integers(2, 20))
def test_wilson_narrows_with_trials(h, k):
    t = 4 * h
    a = S.wilson(h, t)
    b = S.wilson(h * k, t * k)
    assert b[1] - b[0] < a[1] - a[0]


def test_rate_estimate_without_hits():
    r = S.RateEstimate.from_counts(3, "E", 0, 1000)
    assert r.alpha_hat is None and r.per_height is None and r.below_floor
    assert r.alpha_lo == pytest.approx(-math.log(S.wilson(0, 1000)[1]))
    assert r.row()["alpha_hat"] == ""


def test_rate_estimate_values():
    r = S.RateEstimate.from_counts(2, "E", 40, 1000)
    assert r.alpha_hat == pytest.approx(-math.log(0.04))
    assert r.per_height == pytest.approx(r.alpha_hat / 2)
    assert r.alpha_lo < r.alpha_hat < r.alpha_hi
    assert not r.below_floor


def test_bulk_columns():
    g = LatticeGeometry(8, 4)
    cols = S.bulk_columns(g, 1)
    assert (3, 3) in cols and (0, 0) not in cols
    assert S.bulk_columns(g, 2) == []


def test_rate_curve_rejects_boundary_columns():
    g = LatticeGeometry(8, 4)
    from interface_lab.sampler import flat_config
    with pytest.raises(ValueError):
        S.rate_curve([(flat_config(g), None)], [(0, 0)], 1)


def test_rate_curve_on_flat_stream():
    g = LatticeGeometry(8, 4)
    from interface_lab.sampler import flat_config
    curve = S.rate_curve([(flat_config(g), None)] * 5, S.bulk_columns(g, 1), 1)
    (est,) = curve["E"]
    assert est.hits == 0 and est.trials == 5 * len(S.bulk_columns(g, 1))


def test_closed_forms_q1():
    cf = S.closed_forms(Params(1.3, 1.0))
    p = Params(1.3, 1.0).p
    assert cf["bot"] == pytest.approx(p) and cf["nred"] == pytest.approx(p) and cf["blue"] == 1.0


@given(st.floats(0.5, 8.0), st.integers(2, 6))
def test_closed_forms_order_and_limit(beta, q):
    cf = S.closed_forms(Params(beta, q))
    assert cf["bot"] <= cf["blue"] <= cf["nred"] <= 1
    assert 1 - cf["bot"] <= q * math.exp(-beta) * (1 + 1e-12)


def test_closed_forms_large_beta():
    beta, q = 12.0, 3
    cf = S.closed_forms(Params(beta, q))
    e = math.exp(-beta)
    assert (1 - cf["bot"]) / e == pytest.approx(q, rel=1e-3)
    assert (1 - cf["blue"]) / e == pytest.approx(q - 1, rel=1e-3)
    assert (1 - cf["nred"]) / e == pytest.approx(1, rel=1e-3)


def test_submultiplicativity_flags_violation():
    pr = Params(1.0, 2.0)
    e1 = S.RateEstimate.from_counts(1, "E", 1, 10**6)
    e2 = S.RateEstimate.from_counts(2, "E", 5 * 10**5, 10**6)
    assert S.submultiplicativity([e1, e2], pr)["violated"]
    e2 = S.RateEstimate.from_counts(2, "E", 0, 10**6)
    assert not S.submultiplicativity([e1, e2], pr)["violated"]


def test_rate_bracket():
    est = S.RateEstimate.from_counts(1, "E", 100, 100 * round(math.exp(7)))
    r = S.rate_bracket(est, 2.0)
    assert r["bracket"] == (5.0, 8.5) and r["inside"]


def test_extrema_record():
    rec = S.ExtremaRecord(8, Mn=[2, 2, 3, 2, 1, 2])
    assert rec.mode == 2 and rec.histogram == {1: 1, 2: 4, 3: 1}
    assert rec.mode_mass(0) == pytest.approx(4 / 6) and rec.mode_mass(1) == 1.0
    assert rec.median == 2.0
    a, b = S.ExtremaRecord(8, Mn=[1, 2]), S.ExtremaRecord(16, Mn=[2, 3])
    assert S.median_nondecreasing([b, a]) and not S.median_nondecreasing([S.ExtremaRecord(8, Mn=[5]), a])


def test_covariance_of_independent_fields():
    rng = np.random.default_rng(0)
    ind = rng.random((4000, 12, 12)) < 0.3
    cov, err, pairs = S.covariance_at(ind, 3)
    assert abs(cov) < 4 * err and pairs == 9 * 12
    rep = S.decorrelation_report(ind, [1, 2, 10, 11])
    assert rep["ok"] and rep["samples"] == 4000


def test_covariance_detects_copies():
    rng = np.random.default_rng(1)
    ind = rng.random((2000, 12, 12)) < 0.3
    ind[:, 10:, :] = ind[:, :2, :]
    cov, err, _ = S.covariance_at(ind, 10)
    assert cov > 10 * err


def test_translation_check():
    rng = np.random.default_rng(2)
    ind = rng.random((3000, 6, 6)) < 0.2
    assert S.translation_check(ind, (1, 1), (4, 4))["ok"]
    ind[:, 4, 4] = True
    assert not S.translation_check(ind, (1, 1), (4, 4))["ok"]


def test_csv_round_trip(tmp_path):
    rows = [S.RateEstimate.from_counts(h, "E", 10 - h, 100).row() for h in (1, 2, 3)]
    path = tmp_path / "rates.csv"
    S.write_csv(path, S.RATES_FIELDS, rows)
    back = S.read_csv(path, S.RATES_FIELDS)
    assert [int(r["hits"]) for r in back] == [9, 8, 7]
    with pytest.raises(ValueError):
        S.read_csv(path, S.EXTREMA_FIELDS)


def test_variance_inflation_iid_and_blocked():
    rng = np.random.default_rng(4)
    x = rng.random(20_000)
    assert S.variance_inflation(x) < 1.6
    blocked = np.repeat(rng.random(2000), 10)
    assert 6 < S.variance_inflation(blocked) < 14
    assert S.variance_inflation(np.zeros(100)) == 1.0


def test_inflation_widens_interval():
    a = S.RateEstimate.from_counts(1, "E", 50, 10_000)
    b = S.RateEstimate.from_counts(1, "E", 50, 10_000, inflation=8.0)
    assert b.phat == a.phat and b.hi - b.lo > 2 * (a.hi - a.lo)


def test_batch_means_se_matches_iid():
    rng = np.random.default_rng(5)
    x = rng.normal(size=40_000)
    assert S.batch_means_se(x) == pytest.approx(1 / math.sqrt(40_000), rel=0.5)
