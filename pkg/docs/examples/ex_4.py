# Estimation window study: temporal window k against axial window L.
# Longer windows lower the spread of the estimates.

import os

from nlhrflow import ExperimentSpec, run
from nlhrflow.storage import read_json

spec = ExperimentSpec.from_dict({"profile": "desk", "beamformer": "nlhr", "seed": 3})

for k_window in (0.8e-3, 1.6e-3):
    for L_window in (10.0, 20.0):
        name = f"k{k_window * 1e3:g}ms_L{L_window:g}"
        out = os.path.join("out", "windows", name)
        case = spec.with_value("k_window", k_window).with_value("L_window", L_window)
        run(case, out)
        summary = read_json(os.path.join(out, "metrics.json"))["profile"]
        print(f"k = {k_window * 1e3:g} ms, L = {L_window:g} lambda: "
              f"bias {summary['median_bias']:.1f} %, sd {summary['sd']:.1f} %")
