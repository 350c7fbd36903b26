"""Built-in example models and start states."""
import math
from dataclasses import dataclass, field

import numpy as np

from .model import BekkModel
from .state import ChainState
from .stationarity import attracting_point

__all__ = ["Example", "EXAMPLES", "get_example", "example_names"]


@dataclass(frozen=True)
class Example:
    name: str
    title: str
    note: str
    build: object  # () -> BekkModel
    starts: dict = field(default_factory=dict)  # name -> (model -> ChainState)

    def model(self):
        return self.build()

    def start(self, key):
        return self.starts[key](self.model())

    def readme(self):
        lines = [f"# {self.name}: {self.title}", "", self.note, ""]
        lines.append(f"Model file: `{self.name}.json` (format bekk-v1).")
        if self.starts:
            lines.append("")
            lines.append("Start states shipped alongside:")
            for key in self.starts:
                lines.append(f"- `{self.name}.start-{key}.json`")
        lines.append("")
        lines.append("Try:")
        lines.append("")
        lines.append(f"    bekk-ergo check {self.name}.json")
        lines.append(f"    bekk-ergo drift {self.name}.json")
        lines.append(f"    bekk-ergo diagnose {self.name}.json")
        return "\n".join(lines) + "\n"


def _scalar():
    return BekkModel(C=[[1.0]], A=[[[math.sqrt(0.2)]]], B=[[[math.sqrt(0.7)]]])


# letters follow the worked bivariate example: Abar = [[a, c], [b, d]],
# Bbar = [[e, g], [f, h]]
EX2X2_LETTERS = {"a": 0.3, "b": 0.1, "c": -0.2, "d": 0.25, "e": 0.8, "f": 0.1, "g": 0.05, "h": 0.85}


def _ex2x2():
    v = EX2X2_LETTERS
    A = np.array([[v["a"], v["c"]], [v["b"], v["d"]]])
    B = np.array([[v["e"], v["g"]], [v["f"], v["h"]]])
    return BekkModel(C=[[1.0, 0.3], [0.3, 1.0]], A=[A], B=[B])


def _ex3310():
    # rank-one Abar with Bbar Abar = 0, hence B A = 0 in vech form
    A = np.array([[0.3, 0.2], [0.3, 0.2]])
    B = np.array([[0.5, -0.5], [0.2, -0.2]])
    return BekkModel(C=[[1.0, 0.3], [0.3, 1.0]], A=[A], B=[B])


EX3311_A, EX3311_B = 0.7, 0.5


def _ex3311():
    return BekkModel(C=np.eye(2), A=[np.diag([EX3311_A, 0.0])], B=[np.diag([0.0, EX3311_B])])


def _ex3311_on(m):
    # a state reachable from T: large first observation, frozen second variance
    T = attracting_point(m)
    x0 = 100.0
    s11 = 1.0 + EX3311_A**2 * x0**2
    return ChainState.from_matrices([np.diag([s11, T.sigma(0)[1, 1]])], [[x0, 0.0]])


def _ex3311_off(m):
    # same as the on-manifold start except the second variance
    y = _ex3311_on(m)
    S = y.sigma(0)
    S[1, 1] = 2.0
    return ChainState.from_matrices([S], y.x_blocks)


EXAMPLES = {
    "scalar": Example(
        name="scalar",
        title="univariate GARCH(1,1) with c = 1, a^2 = 0.2, e^2 = 0.7",
        note=("Closed forms: rho = 0.9, stationary variance 10, volatility fixed point 10/3, "
              "drift constants alpha0 = 14/15, alpha = 29/30, b = 151/15."),
        build=_scalar,
        starts={"T": attracting_point},
    ),
    "ex-2x2": Example(
        name="ex-2x2",
        title="bivariate BEKK GARCH(1,1) with general 2x2 coefficients",
        note=("Abar = [[a, c], [b, d]] and Bbar = [[e, g], [f, h]] with "
              + ", ".join(f"{k} = {v}" for k, v in EX2X2_LETTERS.items())
              + ". `convert --to vech` shows the 3x3 matrices with entries "
              "a^2, 2ac, c^2 / ab, ad+bc, cd / b^2, 2bd, d^2 (and the same pattern in e..h)."),
        build=_ex2x2,
        starts={"T": attracting_point},
    ),
    "ex-3.3.10": Example(
        name="ex-3.3.10",
        title="bivariate GARCH(1,1) with B A = 0: a degenerate state space",
        note=("Starting from T the volatility moves only along the range of A, so the orbit "
              "spans at most 4 of the 5 state coordinates (`diagnose` reports degenerate = true)."),
        build=_ex3310,
        starts={"T": attracting_point},
    ),
    "ex-3.3.11": Example(
        name="ex-3.3.11",
        title="diagonal Abar = diag(a, 0), Bbar = diag(0, b): a frozen second variance",
        note=(f"a = {EX3311_A}, b = {EX3311_B}, C = I.  On the state space the second variance "
              "is constant at 1/(1 - b^2) = 4/3.  A start with a different second variance "
              "never reaches it, so its law never converges in total variation.  "
              "`start-on` lies on the state space, `start-off` does not."),
        build=_ex3311,
        starts={"T": attracting_point, "on": _ex3311_on, "off": _ex3311_off},
    ),
}


def example_names():
    return list(EXAMPLES)


def get_example(name):
    try:
        return EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}") from None
