"""Independent evaluator for the expression grammar, used to freeze the
values in test_truth_table.cpp (OracleValues tests).

Python gives | ^ & + - * and unary - ~ the same precedence as the grammar, and
its unbounded two's-complement integers reduce correctly mod 2^w, so eval()
followed by a mask is a second implementation of the semantics.
"""
import itertools
import random
import re

TABLES = [
    ("(a^b)+2*(a&b)", ["a", "b"], 8),
    ("x&y", ["x", "y"], 8),
    ("(x|y)-(x^y)", ["x", "y"], 8),
    ("-5*(x&~y)+3*(t|z)", ["t", "x", "y", "z"], 8),
    ("4*(t|-y-1)-4*((y+z-(y|z)|y^z)+(y+z-(y|z)&(y^z)))", ["t", "y", "z"], 8),
    ("x*y*y-~x", ["x", "y"], 16),
]

POINTS = [
    ("~x", 8),
    ("-x-1", 8),
    ("(x^y)+2*(x&y)", 8),
    ("x*y-(x|~z)*3", 8),
    ("-5*(x&~y)+3*(t|z)", 16),
    ("x*x*x+y", 64),
]


def value(expr, env, w):
    names = set(re.findall(r"[a-z]\w*", expr))
    return eval(expr, {"__builtins__": {}}, {k: env[k] for k in names}) & ((1 << w) - 1)


def table(expr, vars_, w):
    return [value(expr, dict(zip(vars_, bits)), w) for bits in itertools.product((0, 1), repeat=len(vars_))]


def main():
    for expr, vars_, w in TABLES:
        print(f'{{"{expr}", {{{", ".join(chr(34) + v + chr(34) for v in vars_)}}}, {w}, {{{", ".join(map(str, table(expr, vars_, w)))}}}}},')
    rng = random.Random(2024)
    print()
    for expr, w in POINTS:
        names = sorted(set(re.findall(r"[a-z]\w*", expr)))
        env = {n: rng.randrange(1 << w) for n in names}
        if expr in ("~x", "-x-1"):
            env = {"x": 5}
        args = ", ".join(f'{{"{k}", {v}u}}' for k, v in env.items())
        print(f'{{"{expr}", {{{args}}}, {w}, {value(expr, env, w)}u}},')


if __name__ == "__main__":
    main()
