"""Density expression trees over {s, constants, +, *, power, sqrt}.

Config files carry densities as nested tables rather than user code, so a
run is fully reproducible from its TOML alone.  Trees compile to vectorized
numpy callables.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ConfigError

_OPS = ("s", "const", "add", "mul", "pow", "sqrt")


def compile_expr(tree: dict) -> Callable:
    """Compile a tree to a vectorized callable s -> value."""
    op = tree.get("op")
    if op == "s":
        return lambda s: np.asarray(s, dtype=float)
    if op == "const":
        value = float(tree["value"])
        return lambda s: np.full_like(np.asarray(s, dtype=float), value)
    if op == "add":
        parts = [compile_expr(t) for t in tree["args"]]
        return lambda s: sum(p(s) for p in parts)
    if op == "mul":
        parts = [compile_expr(t) for t in tree["args"]]

        def _mul(s):
            out = parts[0](s)
            for p in parts[1:]:
                out = out * p(s)
            return out

        return _mul
    if op == "pow":
        base = compile_expr(tree["base"])
        expo = float(tree["exponent"])
        return lambda s: base(s) ** expo
    if op == "sqrt":
        arg = compile_expr(tree["arg"])
        return lambda s: np.sqrt(arg(s))
    raise ConfigError(f"unknown expression op {op!r}; expected one of {_OPS}")


def validate_expr(tree: dict) -> None:
    compile_expr(tree)  # raises ConfigError on malformed trees


# Convenience constructors used when presets are exported back to config form.

def e_s() -> dict:
    return {"op": "s"}


def e_const(value: float) -> dict:
    return {"op": "const", "value": float(value)}


def e_add(*args: dict) -> dict:
    return {"op": "add", "args": list(args)}


def e_mul(*args: dict) -> dict:
    return {"op": "mul", "args": list(args)}


def e_pow(base: dict, exponent: float) -> dict:
    return {"op": "pow", "base": base, "exponent": float(exponent)}


def e_sqrt(arg: dict) -> dict:
    return {"op": "sqrt", "arg": arg}


def e_poly(coefficients) -> dict:
    """Ascending-coefficient polynomial as an expression tree."""
    terms = []
    for j, c in enumerate(coefficients):
        if c == 0:
            continue
        if j == 0:
            terms.append(e_const(c))
        elif c == 1:
            terms.append(e_pow(e_s(), j) if j > 1 else e_s())
        else:
            base = e_pow(e_s(), j) if j > 1 else e_s()
            terms.append(e_mul(e_const(c), base))
    if not terms:
        return e_const(0.0)
    return terms[0] if len(terms) == 1 else e_add(*terms)
