from fractions import Fraction as Fr

import pytest

from hetcache.model import OutOfScheme, SystemConfig
from hetcache.scheme_smallmem import OutOfRegime
from hetcache.verifier import EXHAUSTIVE_LIMIT, SAMPLE_SIZE, csv_fields, demand_vectors, sweep, verify_config


def cfg(m, N):
    return SystemConfig.create(len(m), N, m)


@pytest.mark.parametrize(
    "m,N,R",
    [
        (("9/20", "1/2", "11/20"), 4, Fr(25, 36)),
        (("0.1", "0.15", "0.2", "0.25"), 5, Fr(9, 4)),
        (("3/10", "7/10", "19/20"), 4, Fr(7, 10)),
    ],
)
def test_examples_pass(m, N, R):
    rep = verify_config(cfg(m, N))
    assert rep.passed, rep.summary()
    assert rep.distinct_loads == {R}
    assert rep.demands_checked == rep.demands_decoded == N ** len(m)
    assert rep.summary().endswith("PASS")
    row = rep.csv_row()
    assert set(row) == set(csv_fields(len(m), with_pass=True)) and row["passed"] == "pass"


def test_out_of_scheme_propagates():
    with pytest.raises(OutOfScheme):
        verify_config(cfg(("0.5", "0.7", "0.9"), 4))
    with pytest.raises(OutOfRegime):
        verify_config(cfg(("0.3", "0.3", "0.3", "0.3"), 5))


def test_infeasible_point_is_reported_not_raised():
    rep = verify_config(cfg(("1/5", "3/5", "3/5"), 4), demands="distinct", decode="none")
    assert not rep.passed
    assert rep.error and "NegativeSubfileSize" in rep.error
    assert rep.summary().endswith("FAIL")


def test_uncoded_scheme_selectable():
    rep = verify_config(cfg(("1/10", "1/5", "3/10"), 4), scheme="uncoded")
    assert rep.passed and rep.distinct_loads == {Fr(2)}


def test_demand_vector_policies():
    assert len(demand_vectors(4, 3, "distinct")) == 24
    assert len(demand_vectors(4, 3, "all")) == 64
    assert demand_vectors(4, 3) == sorted(demand_vectors(4, 3))
    # 21^4 is above the exhaustive threshold
    assert 21**4 > EXHAUSTIVE_LIMIT
    big = demand_vectors(21, 4, "all", seed=3)
    assert len(big) <= SAMPLE_SIZE + 22 and (0, 0, 0, 0) in big and (0, 1, 2, 3) in big
    assert big == demand_vectors(21, 4, "all", seed=3)
    assert big != demand_vectors(21, 4, "all", seed=4)
    assert len(demand_vectors(17, 4, "all")) == 17**4


def test_decode_sample_and_none():
    c = cfg(("1/5", "2/5", "3/5"), 4)
    s = verify_config(c, decode="sample", decode_sample=3)
    assert s.demands_checked == 64 and s.demands_decoded == 3 and s.passed
    n = verify_config(c, decode="none")
    assert n.demands_decoded == 0 and n.passed


def test_deterministic():
    c = cfg(("1/5", "2/5", "3/5"), 5)
    a = verify_config(c, seed=9)
    b = verify_config(c, seed=9)
    assert a.summary() == b.summary() and a.csv_row() == b.csv_row()


def test_alpha_sweep_rows():
    pts = []
    for i in range(3, 11):
        a = Fr(i, 10)
        m = (Fr(3, 10) * a * a, Fr(3, 10) * a, Fr(3, 10))
        pts.append((str(a), SystemConfig.create(3, 4, m)))
    rows = sweep(pts)
    assert [r.param for r in rows] == [p for p, _ in pts]
    assert rows[-1].gap == 0
    gaps = [r.gap for r in rows]
    assert all(g >= 0 for g in gaps)
    assert all(x >= y for x, y in zip(gaps, gaps[1:]))


def test_n_sweep_rows_and_errors_recorded():
    m = tuple(Fr(1, 10) * Fr(7, 10) ** (10 - k) for k in range(1, 11))
    rows = sweep([(str(N), SystemConfig.create(10, N, m)) for N in (11, 21, 51, 201)])
    gaps = [r.gap for r in rows]
    assert all(x > y for x, y in zip(gaps, gaps[1:]))
    big = sweep([("x", cfg(("0.3",) * 4, 5))])
    assert len(big) == 1 and big[0].R_coded is None and big[0].error


def test_single_point_sweep_with_verification():
    rows = sweep([("p", cfg(("9/20", "1/2", "11/20"), 4))], verify=True)
    assert len(rows) == 1 and rows[0].passed is True and rows[0].R_coded == Fr(25, 36)
