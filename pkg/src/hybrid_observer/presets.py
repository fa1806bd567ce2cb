"""Built-in scenarios, returned as raw config mappings (see :mod:`.config`).

``paper-example``
    Three-channel, four-state system with an unstable oscillatory mode,
    a fixed three-vertex graph and hand-picked ``L_i``/``K_i``.
``paper-noise``
    The same observer with the plant driven by ``b * 7 cos(10 t)``.
``resilience4``
    Four channels, any three of which stay jointly observable, on the
    four-vertex graph with every bidirectional arc except ``1 <-> 4``;
    agent 2 leaves the network at ``t = 50``.
"""

import copy
import math

__all__ = ["PRESETS", "get_preset"]

_S = math.sqrt(2.0) / 2.0

_EXAMPLE_A = [
    [0.0, 0.4, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 2.0],
    [0.0, 0.0, -2.0, 0.2],
]

EXAMPLE = {
    "schema": 1,
    "name": "paper-example",
    "seed": 0,
    "system": {
        "A": _EXAMPLE_A,
        "C": [[[1, 0, 0, 0]], [[0, 1, 0, 0]], [[0, 0, 1, 1]]],
    },
    "graph": {"mode": "static", "neighbors": {"1": [1, 2], "2": [1, 2, 3], "3": [2, 3]}},
    "observer": {
        "T": 1.0,
        "tau": 0.5,
        "q": 45,
        "omega": 2.0,
        "L": [
            [[0, 1, 0, 0], [1, 0, 0, 0]],
            [[0, 1, 0, 0]],
            [[0, 0, -_S, _S], [0, 0, _S, _S]],
        ],
        "K": [[[-20.0], [-6.0]], [[-2.0]], [[-0.85], [-3.68]]],
    },
    "initial": {
        "x0": [3, 2, 4, 1],
        "w0": [[2, 4], [3], [1, 2]],
        "xhat0": [[-4, -4, -4, -4]] * 3,
    },
    "disturbance": None,
    "simulation": {"t_end": 400.0, "sample_dt": 0.01},
}

NOISE = copy.deepcopy(EXAMPLE)
NOISE["name"] = "paper-noise"
NOISE["disturbance"] = {"b": [1, 1, 1, 1], "amplitude": 7.0, "frequency": 10.0}
NOISE["simulation"] = {"t_end": 200.0, "sample_dt": 0.01}

RESILIENCE4 = {
    "schema": 1,
    "name": "resilience4",
    "seed": 0,
    "system": {
        # two undamped oscillators: each channel sees one coordinate
        "A": [
            [0.0, 1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 2.0],
            [0.0, 0.0, -2.0, 0.0],
        ],
        "C": [[[1, 0, 0, 0]], [[0, 1, 0, 0]], [[0, 0, 1, 0]], [[0, 0, 0, 1]]],
    },
    "graph": {
        "mode": "static",
        "neighbors": {"1": [1, 2, 3], "2": [1, 2, 3, 4], "3": [1, 2, 3, 4], "4": [2, 3, 4]},
    },
    "dropout": [{"t": 50.0, "vertex": 2}],
    "observer": {"T": 1.0, "tau": 0.5, "q": 20, "omega": 0.2},
    "initial": {
        "x0": [1, 2, 3, 4],
        "w0": None,
        "xhat0": None,
    },
    "disturbance": None,
    "simulation": {"t_end": 400.0, "sample_dt": 0.01},
}

PRESETS = {
    "paper-example": EXAMPLE,
    "paper-noise": NOISE,
    "resilience4": RESILIENCE4,
}


def get_preset(name):
    """Deep copy of the named preset mapping."""
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
