"""Random expression trees for property tests."""

import math

from hypothesis import strategies as st

from exactfpt import exprlang as ex

consts = st.floats(min_value=-5, max_value=5, allow_nan=False).map(lambda x: ex.Const(round(x, 3)))
variables = st.sampled_from(["t", "y", "v"]).map(ex.Var)
leaves = st.one_of(consts, variables)


def _extend(children):
    unary = st.tuples(st.sampled_from(["neg", "sin", "cos", "exp", "ln", "sqrt"]), children).map(
        lambda p: ex.Unary(*p))
    binary = st.tuples(st.sampled_from(["add", "sub", "mul", "div"]), children, children).map(
        lambda p: ex.Binary(*p))
    powers = st.tuples(children, st.sampled_from([2.0, 3.0, 0.5, -1.0, 1.5])).map(
        lambda p: ex.Binary("pow", p[0], ex.Const(p[1])))
    return st.one_of(unary, binary, powers)


exprs = st.recursive(leaves, _extend, max_leaves=12)


def random_expr(rng, depth=0):
    """Same grammar as ``exprs`` from a numpy Generator (deterministic corpora)."""
    r = rng.random()
    if depth >= 4 or r < 0.3:
        if rng.random() < 0.4:
            return ex.Const(round(float(rng.uniform(-3, 3)), 3))
        return ex.Var(str(rng.choice(["t", "y", "v"], p=[0.2, 0.6, 0.2])))
    if r < 0.55:
        op = str(rng.choice(["neg", "sin", "cos", "exp", "ln", "sqrt"]))
        return ex.Unary(op, random_expr(rng, depth + 1))
    if r < 0.9:
        op = str(rng.choice(["add", "sub", "mul", "div"]))
        return ex.Binary(op, random_expr(rng, depth + 1), random_expr(rng, depth + 1))
    return ex.Binary("pow", random_expr(rng, depth + 1), ex.Const(float(rng.choice([2.0, 3.0, 0.5, -1.0]))))


def safe_eval(e, **env):
    try:
        v = ex.evaluate(e, **env)
    except (ex.EvalDomainError, OverflowError):
        return None
    return v if math.isfinite(v) else None
