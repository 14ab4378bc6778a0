"""Line-oriented model format and the canonical JSON report.

Grammar (``#`` starts a comment, blank lines ignored)::

    MDP
    STATE <name> [ABSORBING] [WEIGHT <rational>]
    INIT <name>
    TRANS <state> <action> [REWARD <uint>] -> <state>:<rational> {<state>:<rational>}

Rationals are ``p/q`` or decimals and are kept as exact fractions.
"""

import json
import math
import re
from fractions import Fraction

from .errors import ParseError
from .model import Mdp, validate

NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
RATIONAL = re.compile(r"[+-]?(\d+(/\d+)?|\d*\.\d+|\d+\.\d*)([eE][+-]?\d+)?\Z")
LOOP = "loop"


def _tokens(line):
    """Split on whitespace, keeping 1-based start columns."""
    return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]


def _rational(tok, lineno, col, what):
    if not RATIONAL.match(tok):
        raise ParseError(f"malformed {what} {tok!r}", lineno, col)
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"malformed {what} {tok!r}", lineno, col) from None


def _name(tok, lineno, col, what):
    if not NAME.match(tok):
        raise ParseError(f"invalid {what} name {tok!r}", lineno, col)
    return tok


def parse_model(text):
    """Parse model text (``str`` or UTF-8 ``bytes``) into a validated :class:`Mdp`."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc.reason}", 1) from None

    header = False
    states = {}        # name -> (index, lineno)
    absorbing = set()
    weights = {}
    init = None
    trans = []         # (lineno, cols, s, a, reward, [(t, p, col)])
    seen_pairs = {}
    reward_line = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        kw, kcol = toks[0]
        if not header:
            if kw != "MDP" or len(toks) != 1:
                raise ParseError("expected 'MDP' header", lineno, kcol)
            header = True
            continue
        if kw == "MDP":
            raise ParseError("duplicate 'MDP' header", lineno, kcol)
        elif kw == "STATE":
            if len(toks) < 2:
                raise ParseError("STATE needs a name", lineno, kcol + 5)
            name = _name(toks[1][0], lineno, toks[1][1], "state")
            if name in states:
                raise ParseError(f"duplicate state {name!r}", lineno, toks[1][1])
            states[name] = (len(states), lineno)
            rest = toks[2:]
            i = 0
            while i < len(rest):
                tok, col = rest[i]
                if tok == "ABSORBING" and name not in absorbing:
                    absorbing.add(name)
                    i += 1
                elif tok == "WEIGHT" and name not in weights:
                    if i + 1 >= len(rest):
                        raise ParseError("WEIGHT needs a value", lineno, col)
                    weights[name] = _rational(rest[i + 1][0], lineno, rest[i + 1][1], "weight")
                    i += 2
                else:
                    raise ParseError(f"unexpected token {tok!r}", lineno, col)
        elif kw == "INIT":
            if len(toks) != 2:
                raise ParseError("INIT takes exactly one state", lineno, kcol)
            if init is not None:
                raise ParseError("duplicate INIT", lineno, kcol)
            init = (_name(toks[1][0], lineno, toks[1][1], "state"), lineno, toks[1][1])
        elif kw == "TRANS":
            trans.append(_parse_trans(toks, lineno))
            _, _, (s, scol), (a, acol), reward, _ = trans[-1]
            if reward is not None:
                reward_line = reward_line or (lineno, acol)
            if (s, a) in seen_pairs:
                raise ParseError(f"duplicate transition for state {s!r}, action {a!r}", lineno, acol)
            seen_pairs[s, a] = lineno
        else:
            raise ParseError(f"unknown directive {kw!r}", lineno, kcol)

    if not header:
        raise ParseError("empty model: expected 'MDP' header", 1)
    if weights and reward_line:
        raise ParseError("model mixes WEIGHT and REWARD", *reward_line)
    if init is None:
        raise ParseError("missing INIT", max(1, len(text.splitlines())))
    if init[0] not in states:
        raise ParseError(f"unknown state {init[0]!r}", init[1], init[2])

    weighted = bool(weights)
    state_names = tuple(states)
    actions = []
    action_idx = {}

    def act(name):
        if name not in action_idx:
            action_idx[name] = len(actions)
            actions.append(name)
        return action_idx[name]

    enabled = [[] for _ in state_names]
    dist = {}
    rewards = {}
    for lineno, _, (s, scol), (a, acol), reward, targets in trans:
        if s not in states:
            raise ParseError(f"unknown state {s!r}", lineno, scol)
        si = states[s][0]
        ai = act(a)
        acc = {}
        for t, p, col in targets:
            if t not in states:
                raise ParseError(f"unknown state {t!r}", lineno, col)
            ti = states[t][0]
            if ti in acc:
                raise ParseError(f"duplicate target {t!r}", lineno, col)
            if p <= 0:
                raise ParseError(f"probability {p} must be positive", lineno, col)
            acc[ti] = p
        total = sum(acc.values())
        if total != 1:
            raise ParseError(f"probability sum {total} != 1", lineno, acol)
        enabled[si].append(ai)
        dist[si, ai] = tuple(sorted(acc.items()))
        if reward:
            rewards[si, ai] = reward

    for name, (si, lineno) in states.items():
        if not enabled[si]:
            if name in absorbing or name in weights:
                ai = act(LOOP)
                enabled[si].append(ai)
                dist[si, ai] = ((si, Fraction(1)),)
            else:
                raise ParseError(f"state {name!r} has no transitions", lineno)

    m = Mdp(
        states=state_names,
        actions=tuple(actions),
        initial=states[init[0]][0],
        enabled=tuple(tuple(sorted(e)) for e in enabled),
        trans=dist,
        terminal_weight={states[n][0]: w for n, w in weights.items()} if weighted else None,
        reward=None if weighted else rewards,
    )
    for name, (si, lineno) in states.items():
        if name in weights and not m.is_absorbing(si):
            raise ParseError(f"state {name}: weighted state not absorbing", lineno)
        if name in absorbing and not m.is_absorbing(si):
            raise ParseError(f"state {name}: declared ABSORBING but has a leaving transition", lineno)
    problems = validate(m)
    if problems:
        raise ParseError("; ".join(problems), 1)
    return m


def _parse_trans(toks, lineno):
    if len(toks) < 5:
        raise ParseError("TRANS needs: <state> <action> -> <state>:<p> ...", lineno, toks[0][1])
    s = (_name(toks[1][0], lineno, toks[1][1], "state"), toks[1][1])
    a = (_name(toks[2][0], lineno, toks[2][1], "action"), toks[2][1])
    i = 3
    reward = None
    if toks[i][0] == "REWARD":
        if i + 1 >= len(toks) or not re.fullmatch(r"\d+", toks[i + 1][0]):
            col = toks[i + 1][1] if i + 1 < len(toks) else toks[i][1]
            raise ParseError("REWARD needs a nonnegative integer", lineno, col)
        reward = int(toks[i + 1][0])
        i += 2
    if i >= len(toks) or toks[i][0] != "->":
        col = toks[i][1] if i < len(toks) else toks[-1][1]
        raise ParseError("expected '->'", lineno, col)
    i += 1
    if i >= len(toks):
        raise ParseError("expected at least one target", lineno, toks[-1][1])
    targets = []
    for tok, col in toks[i:]:
        if tok.count(":") != 1:
            raise ParseError(f"expected <state>:<probability>, got {tok!r}", lineno, col)
        t, p = tok.split(":")
        _name(t, lineno, col, "state")
        targets.append((t, _rational(p, lineno, col + len(t) + 1, "probability"), col))
    return lineno, None, s, a, reward, targets


def _fmt_num(x):
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def format_model(m):
    """Print ``m`` in the model grammar; every transition is written explicitly."""
    out = ["MDP"]
    for s, name in enumerate(m.states):
        line = f"STATE {name}"
        if m.is_absorbing(s):
            line += " ABSORBING"
        if m.terminal_weight is not None and s in m.terminal_weight:
            line += f" WEIGHT {_fmt_num(m.terminal_weight[s])}"
        out.append(line)
    out.append(f"INIT {m.states[m.initial]}")
    for s, name in enumerate(m.states):
        for a in m.enabled[s]:
            line = f"TRANS {name} {m.actions[a]}"
            if m.reward is not None:
                line += f" REWARD {m.rew(s, a)}"
            targets = " ".join(f"{m.states[t]}:{_fmt_num(p)}" for t, p in m.trans[s, a])
            out.append(f"{line} -> {targets}")
    return "\n".join(out) + "\n"


# --- report serialization -------------------------------------------------

def _encode(x):
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, (float, Fraction)):
        try:
            f = float(x)
        except OverflowError:
            # rationals beyond double range stay exact, as a string
            return json.dumps(str(x))
        if not math.isfinite(f):
            return "null"
        return "%.17g" % f
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if isinstance(x, dict):
        items = sorted((str(k), v) for k, v in x.items())
        return "{" + ", ".join(f"{json.dumps(k, ensure_ascii=False)}: {_encode(v)}" for k, v in items) + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in x) + "]"
    if hasattr(x, "item"):  # numpy scalar
        return _encode(x.item())
    raise TypeError(f"cannot serialize {type(x).__name__}")


def to_json(obj):
    return _encode(obj)


def emit_report(r):
    """Canonical JSON bytes for a report (anything with ``as_dict()``, or a dict)."""
    d = r.as_dict() if hasattr(r, "as_dict") else r
    return (_encode(d) + "\n").encode("utf-8")
