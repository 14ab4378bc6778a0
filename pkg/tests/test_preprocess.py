from hypothesis import given, settings, strategies as st

from demvar import (MemorylessScheduler, check_finite, collapse, format_model, mec_decompose,
                    parse_model, validate)
from demvar.chain import acc_moments, wr_moments
from demvar.errors import SingularSystemError
from demvar.oracle import enumerate_md, hull_maxvar
from demvar.randmodels import random_wr_model

from conftest import EXACT

LOOPY = """MDP
STATE s
STATE u
STATE v
STATE g ABSORBING WEIGHT 5
STATE b ABSORBING WEIGHT -1
INIT s
TRANS s go -> u:1
TRANS u left -> v:1
TRANS v back -> u:1
TRANS u exit -> g:1/2 b:1/2
TRANS v exit -> b:1
"""


def test_mec_found_and_collapsed():
    m = parse_model(LOOPY)
    ecs = [ec for ec in mec_decompose(m) if not ec.states <= m.terminals]
    assert [sorted(m.states[s] for s in ec.states) for ec in ecs] == [["u", "v"]]
    pm, cmap = collapse(m)
    assert validate(pm) == []
    assert "ec_u" in pm.states and "tstar" in pm.states
    ec = pm.state_index("ec_u")
    names = sorted(pm.actions[a] for a in pm.enabled[ec])
    assert names == ["tau", "u__exit", "v__exit"]
    assert pm.terminal_weight[pm.state_index("tstar")] == 0
    assert cmap.state_map[m.state_index("u")] == cmap.state_map[m.state_index("v")] == ec


def test_collapse_without_end_components_keeps_model():
    m = random_wr_model(3)
    pm, cmap = collapse(m)
    assert pm.states[:m.n] == m.states
    assert not cmap.components


def _with_cycle(seed):
    """Random model with positive weights plus a two-state cycle between inner states."""
    m = random_wr_model(seed, max_inner=4, weight_range=(1, 6))
    inner = [s for s in range(m.n) if s not in m.terminals]
    if len(inner) < 2:
        return None
    lines = format_model(m).splitlines()
    a, b = m.states[inner[0]], m.states[inner[-1]]
    lines += [f"TRANS {b} cyc -> {a}:1", f"TRANS {a} cyc -> {b}:1"]
    return parse_model("\n".join(lines) + "\n")


def _proper_points(m):
    out = []
    for sched in enumerate_md(m):
        try:
            out.append(wr_moments(m, sched, EXACT))
        except SingularSystemError:
            pass  # trapped in the cycle with positive probability
    return out


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_collapse_preserves_values(seed):
    m = _with_cycle(seed)
    if m is None:
        return
    pm, cmap = collapse(m)
    assert validate(pm) == []
    assert cmap.components
    assert not [ec for ec in mec_decompose(pm) if not ec.states <= pm.terminals]
    orig = _proper_points(m)
    coll = [wr_moments(pm, s, EXACT) for s in enumerate_md(pm)]
    # with positive weights staying forever (payoff 0) never helps the maximum
    assert max(p.e1 for p in orig) == max(p.e1 for p in coll)
    assert max(p.variance for p in orig) <= hull_maxvar(pm, EXACT)


def test_finite_expectation_check():
    bad = parse_model("MDP\nSTATE s\nSTATE t ABSORBING\nINIT s\n"
                      "TRANS s spin REWARD 1 -> s:1\nTRANS s stop -> t:1\n")
    assert not check_finite(bad)
    ok = parse_model("MDP\nSTATE s\nSTATE t ABSORBING\nINIT s\n"
                     "TRANS s spin REWARD 0 -> s:1\nTRANS s stop REWARD 2 -> t:1\n")
    assert check_finite(ok)
    pm, _ = collapse(ok)
    sched = MemorylessScheduler.first_action(pm)
    assert acc_moments(pm, sched, EXACT).e1 in (0, 2)
