"""Evaluating trees and their derivatives without letting one bad input
poison a whole training run.

Run: python notebooks/02_safe_numerics.py
"""

import numpy as np

from actevo.cli import run_gradcheck
from actevo.expr import parse
from actevo.numerics import DEFAULT_POLICY, deriv, eval_tree

x = np.linspace(-3, 3, 7)
for name in ("relu", "swish", "tanh_nmin"):
    t = parse(name)
    print(f"{name:10s} f  =", np.round(eval_tree(t, x).values, 4))
    print(f"{'':10s} f' =", np.round(deriv(t, x).values, 4))

# Growth is clamped and reported as saturation, not as overflow.
r = eval_tree(parse("mul(exp(x), one(x))"), [10.0, 100.0, 1000.0])
print("exp clamp:", r.values, "saturated fraction", r.saturated_fraction)

# The two singular channels are kept on purpose and surface as finite=False.
eps = DEFAULT_POLICY.epsilon
r = eval_tree(parse("diveps(one(x), nmin(x))"), [-1.0, -eps])
print("diveps pole:", r.values, "finite:", r.finite)

# Analytic derivatives against central differences, one probe per operator.
errors = run_gradcheck("all-operators")
worst = max(errors, key=errors.get)
print(f"gradcheck: {len(errors)} operators, worst {worst} at {errors[worst]:.2e}")
