"""
Losing an agent
===============

Four agents watch two uncoupled oscillators, one coordinate each, and
any three of them still see the whole state. Agent 2 leaves at t = 50;
the survivors keep converging because their graph stays strongly
connected and their channels stay jointly observable.
"""

import warnings

import numpy as np

from hybrid_observer import config, is_strongly_connected, run
from hybrid_observer.presets import get_preset

result = config.design(config.parse_config(get_preset("resilience4")), strict=False)
schedule = result.schedule
print("graph before:", schedule.graph_at(49.0))
print("graph after: ", schedule.graph_at(50.0),
      " strongly connected:", is_strongly_connected(schedule.graph_at(50.0)))

with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    trace = run(config.sim_config(result))

# The departed agent's column is NaN after the drop.
for t in (0, 25, 49, 50, 100, 200, 400):
    k = int(np.argmin(np.abs(trace.times - t)))
    row = "  ".join(f"{e:9.2e}" for e in trace.err[k])
    print(f"t = {t:3d}   err = {row}")
