from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from demvar import ParseError, format_model, parse_model
from demvar.parse import emit_report, to_json
from demvar.randmodels import random_reward_model, random_wr_model

from conftest import REWARD, WEIGHTED, load

SMALL = """MDP
STATE s
STATE a ABSORBING WEIGHT 2
STATE b ABSORBING WEIGHT -1/2
INIT s
TRANS s go -> a:1/3 b:2/3   # comment
"""


def test_small_model():
    m = parse_model(SMALL)
    assert m.mode == "weighted"
    assert m.states == ("s", "a", "b")
    assert m.terminal_weight == {1: Fraction(2), 2: Fraction(-1, 2)}
    assert m.trans[0, m.action_index("go")] == ((1, Fraction(1, 3)), (2, Fraction(2, 3)))
    # weighted states without transitions get an implicit self-loop
    assert m.actions[m.enabled[1][0]] == "loop"


def test_bytes_input():
    assert parse_model(SMALL.encode()).structurally_equal(parse_model(SMALL))


@pytest.mark.parametrize("text, line, fragment", [
    ("STATE s\n", 1, "mdp"),
    ("MDP\nSTATE s\nSTATE s\nINIT s\n", 3, "duplicate"),
    ("MDP\nSTATE s\nINIT s\nTRANS s a -> u:1\n", 4, "unknown state"),
    ("MDP\nSTATE s\nSTATE t ABSORBING WEIGHT 1\nINIT s\nTRANS s a -> t:1/2\n", 5, "sum"),
    ("MDP\nSTATE s WEIGHT 1\nSTATE t\nINIT t\nTRANS s a -> t:1\nTRANS t a -> s:1\n", 2, "not absorbing"),
    ("MDP\nSTATE s\nSTATE t ABSORBING WEIGHT 1\nINIT s\nTRANS s a REWARD 1 -> t:1\n", 5, "mix"),
])
def test_errors_carry_line(text, line, fragment):
    with pytest.raises(ParseError) as exc:
        parse_model(text)
    assert exc.value.line == line
    assert fragment in str(exc.value).lower()


@pytest.mark.parametrize("name", WEIGHTED + REWARD)
def test_corpus_round_trip(name):
    m = load(name)
    again = parse_model(format_model(m))
    assert again.structurally_equal(m)
    assert format_model(again) == format_model(m)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_random_round_trip(seed):
    for m in (random_wr_model(seed), random_reward_model(seed)):
        assert parse_model(format_model(m)).structurally_equal(m)


def test_json_is_canonical():
    a = to_json({"b": Fraction(1, 3), "a": [1, 2.5, None, True], "c": float("inf")})
    assert a == '{"a": [1, 2.5, null, true], "b": 0.33333333333333331, "c": null}'
    assert emit_report({"x": 1}) == b'{"x": 1}\n'


def test_json_huge_rational_stays_exact():
    assert to_json(Fraction(10**400, 3)) == '"%d/3"' % 10**400
