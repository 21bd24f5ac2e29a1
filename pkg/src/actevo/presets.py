"""Named activation functions.

Baselines (ReLU, Swish) and functions reported by earlier activation searches.
The depth-1 winners map directly onto one core unit. The published depth-2
winners compose unary operators back to back (``arctan(x^3)``), which a
balanced tree cannot express at depth 2; they are written here as
mathematically equal depth-3 trees, padding each ``u(v(x))`` as
``u(add(v(x), zero(x)))``.

Entries using ``atan`` need the extended alphabet.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Preset:
    expr: str
    formula: str
    note: str = ""


def _pad(op: str, inner: str = "id") -> str:
    """``op(inner(x))`` as a balanced unary-over-core-unit."""
    return f"{op}(add({inner}(x), zero(x)))"


PRESETS: dict[str, Preset] = {
    # baselines
    "relu": Preset("max(relu(x), zero(x))", "max{x, 0}"),
    "swish": Preset("mul(id(x), sigmoid(x))", "x * sigmoid(x)"),
    # exhaustive search over one core unit
    "tanh_nmin": Preset("mul(tanh(x), nmin(x))", "tanh(x) * min{x, 0}"),
    "atan_nmin": Preset("mul(atan(x), nmin(x))", "arctan(x) * min{x, 0}"),
    "nmin_erf": Preset("mul(nmin(x), erf(x))", "min{x, 0} * erf(x)"),
    # found for a second architecture/dataset pair
    "sigmoid_erf": Preset("mul(sigmoid(x), erf(x))", "sigmoid(x) * erf(x)"),
    # evolution, loss-based fitness
    "evo_loss_1": Preset(
        f"mul(exp(sub({_pad('nmin', 'erf')}, {_pad('relu')})), "
        f"nmin(mul({_pad('atan', 'cube')}, {_pad('relu', 'abs')})))",
        "exp(min{erf(x),0} - max{x,0}) * min{arctan(x^3) * max{|x|,0}, 0}",
    ),
    "evo_loss_2": Preset(
        f"mul(exp(max({_pad('nmin', 'erf')}, {_pad('relu')})), "
        f"nmin(mul({_pad('atan', 'cube')}, {_pad('relu', 'abs')})))",
        "exp(max{min{erf(x),0}, max{x,0}}) * min{arctan(x^3) * max{|x|,0}, 0}",
    ),
    "evo_loss_3": Preset(
        f"mul(neg(mul({_pad('atan', 'cube')}, {_pad('cos', 'one')})), "
        f"neg(mul({_pad('atan', 'nmin')}, {_pad('relu', 'abs')})))",
        "(-(arctan(x^3) * cos(1))) * (-(arctan(min{x,0}) * max{|x|,0}))",
    ),
    # evolution, accuracy-based fitness
    "evo_acc_1": Preset(
        f"min(gauss(min({_pad('square', 'sinh')}, {_pad('square', 'zero')})), "
        f"nmin(min({_pad('erf', 'softplus')}, {_pad('asinh')})))",
        "min{exp(-(min{sinh(x)^2, 0^2})^2), min{min{erf(log(1+e^x)), arcsinh(x)}, 0}}",
    ),
    "evo_acc_2": Preset(
        f"min(cos(max({_pad('cube', 'nmin')}, {_pad('softplus', 'one')})), "
        f"gauss(add({_pad('abs', 'relu')}, {_pad('exp', 'sigmoid')})))",
        "min{cos(max{min{x,0}^3, log(1+e^1)}), exp(-(|max{x,0}| + e^sigmoid(x))^2)}",
    ),
    "evo_acc_3": Preset(
        f"max(relu(mul({_pad('logeps', 'nmin')}, {_pad('sigmoid', 'erf')})), "
        f"zero(add({_pad('zero', 'zero')}, {_pad('zero', 'zero')})))",
        "max{max{log(|min{x,0} + eps|) * sigmoid(erf(x)), 0}, 0}",
        "asymptote at x = -eps",
    ),
    # random search
    "random_1": Preset(
        f"add(nmin(max({_pad('cube', 'logeps')}, {_pad('neg', 'logeps')})), "
        f"exp(add({_pad('nmin', 'tanh')}, {_pad('logeps', 'relu')})))",
        "min{max{log(|x+eps|)^3, -log(|x+eps|)}, 0} + exp(min{tanh(x),0} + log(|max{x,0}+eps|))",
        "asymptote at x = -eps",
    ),
    "random_2": Preset(
        f"mul(atan(min({_pad('sinh', 'sin')}, {_pad('atan', 'relu')})), "
        f"tanh(mul({_pad('neg', 'sin')}, {_pad('asinh')})))",
        "arctan(min{sinh(sin(x)), arctan(max{x,0})}) * tanh(-sin(x) * arcsinh(x))",
    ),
    "random_3": Preset(
        f"sub(relu(diveps({_pad('nmin', 'cube')}, {_pad('relu', 'sin')})), "
        f"id(min({_pad('square')}, {_pad('relu')})))",
        "max{min{x^3,0} / (max{sin(x),0} + eps), 0} - min{x^2, max{x,0}}",
    ),
}


def needs_extended(name: str) -> bool:
    return "atan(" in PRESETS[name].expr


def resolve(name: str, extended_alphabet: bool = False):
    from .expr import ParseError, parse

    preset = PRESETS[name]
    if needs_extended(name) and not extended_alphabet:
        raise ParseError(f"preset {name!r} requires the extended alphabet", 0)
    return parse(preset.expr, extended_alphabet)
