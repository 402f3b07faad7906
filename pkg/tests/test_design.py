import numpy as np
import pytest
from hypothesis import given, strategies as st

from swpower.design import (
    DesignError,
    TrialDesign,
    build_balanced_design,
    parse_design_matrix,
    render_design_matrix,
)


def test_balanced_canonical_rows():
    d = build_balanced_design(3, 2)
    assert d.sequences == ((0, 1, 1), (0, 0, 1))
    assert d.cluster_counts == (1, 1)
    assert d.n == 2


def test_balanced_figure_layout():
    d = build_balanced_design(6, 10)
    assert len(d.sequences) == 5
    assert d.cluster_counts == (2, 2, 2, 2, 2)
    sched = d.schedule
    assert sched.shape == (5, 6)
    # sequence b steps on at period b+1
    for b in range(5):
        assert sched[b, b] == 0 and sched[b, b + 1] == 1


def test_balanced_requires_divisibility():
    with pytest.raises(DesignError, match="divide evenly"):
        build_balanced_design(6, 18)
    with pytest.raises(DesignError):
        build_balanced_design(6, 4)
    with pytest.raises(DesignError):
        build_balanced_design(1, 1)


def test_marginal_probabilities():
    d = build_balanced_design(6, 10)
    assert d.marginal_treat_prob(3) == pytest.approx(0.4)
    assert d.marginal_treat_prob(1) == 0.0
    assert d.marginal_treat_prob(6) == 1.0
    for j in range(1, 7):
        assert d.marginal_treat_prob(j) == pytest.approx((j - 1) / 5)
    with pytest.raises(DesignError):
        d.marginal_treat_prob(0)
    with pytest.raises(DesignError):
        d.marginal_treat_prob(7)


def test_joint_probabilities_enumerated():
    d = build_balanced_design(6, 10)
    probs = d.joint_treat_probs(2, 5)
    assert probs[(1, 1)] == pytest.approx(0.2)
    assert probs[(0, 1)] == pytest.approx(0.6)
    assert probs[(1, 0)] == 0.0
    assert probs[(0, 0)] == pytest.approx(0.2)

    d3 = build_balanced_design(3, 2)
    probs = d3.joint_treat_probs(2, 3)
    assert probs[(1, 1)] == pytest.approx(0.5)
    assert probs[(0, 1)] == pytest.approx(0.5)
    assert probs[(1, 0)] == 0.0
    assert probs[(0, 0)] == 0.0


def test_joint_requires_distinct_periods():
    d = build_balanced_design(3, 2)
    with pytest.raises(DesignError, match="marginal"):
        d.joint_treat_probs(2, 2)


@st.composite
def designs(draw):
    J = draw(st.integers(min_value=2, max_value=8))
    # step period per sequence in 2..J, distinct
    steps = draw(st.sets(st.integers(min_value=2, max_value=J), min_size=1, max_size=J - 1))
    counts = tuple(draw(st.integers(min_value=1, max_value=4)) for _ in steps)
    seqs = tuple(tuple(0 if j < s else 1 for j in range(1, J + 1)) for s in sorted(steps))
    return TrialDesign(J=J, sequences=seqs, cluster_counts=counts, m=draw(st.integers(1, 5)))


@given(designs(), st.data())
def test_joint_probs_consistency(design, data):
    j = data.draw(st.integers(1, design.J))
    l = data.draw(st.integers(1, design.J).filter(lambda x: x != j))
    probs = design.joint_treat_probs(j, l)
    assert all(0.0 <= p <= 1.0 for p in probs.values())
    assert sum(probs.values()) == pytest.approx(1.0)
    for a in (0, 1):
        marg = probs[(a, 0)] + probs[(a, 1)]
        expect = design.marginal_treat_prob(j)
        assert marg == pytest.approx(expect if a == 1 else 1 - expect)
    if j < l:
        assert probs[(1, 0)] == 0.0  # monotone stepping


@given(designs())
def test_parse_render_round_trip(design):
    again = parse_design_matrix(render_design_matrix(design), m=design.m)
    assert again.sequences == design.sequences
    assert again.cluster_counts == design.cluster_counts
    assert again.n == design.n


def test_parse_counted_unbalanced():
    text = "count,p1,p2,p3,p4,p5,p6\n"
    rows = []
    for b, c in zip(range(1, 6), (4, 3, 4, 3, 4)):
        rows.append(f"{c}," + ",".join("0" if j <= b else "1" for j in range(1, 7)))
    d = parse_design_matrix(text + "\n".join(rows))
    assert d.n == 18
    assert d.cluster_counts == (4, 3, 4, 3, 4)


def test_parse_per_cluster_rows_collapse():
    text = "0,1,1\n0,0,1\n0,1,1\n"
    d = parse_design_matrix(text)
    assert d.sequences == ((0, 1, 1), (0, 0, 1))
    assert d.cluster_counts == (2, 1)
    assert np.array_equal(d.cluster_rows(), [[0, 1, 1], [0, 1, 1], [0, 0, 1]])


@pytest.mark.parametrize(
    "row,msg",
    [
        ("1,1,1", "period 1"),
        ("0,1,0", "non-monotone"),
        ("0,0,0", "never steps"),
        ("0,2,1", "0/1"),
    ],
)
def test_parse_rejects_bad_rows(row, msg):
    with pytest.raises(DesignError, match=msg):
        parse_design_matrix(row)


def test_parse_rejects_ragged():
    with pytest.raises(DesignError, match="ragged"):
        parse_design_matrix("0,1,1\n0,1\n")


def test_duplicate_sequences_rejected_in_constructor():
    with pytest.raises(DesignError, match="duplicate"):
        TrialDesign(J=3, sequences=((0, 1, 1), (0, 1, 1)), cluster_counts=(1, 1))
