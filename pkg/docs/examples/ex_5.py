# A bright bubble crosses the vessel center. The velocity-time trace at
# the center shows a transient; its width tells how well each beamformer
# separates the bubble from the blood around it.

import os

import numpy as np
from plotly.subplots import make_subplots
import plotly.graph_objects as go

from nlhrflow import ExperimentSpec, run
from nlhrflow.storage import read_csv, read_json

here = os.path.dirname(os.path.abspath(__file__))
spec = ExperimentSpec.from_json(os.path.join(here, "bubble.json"))

fig = make_subplots(rows=1, cols=1)
for beamformer in ("das", "nlhr"):
    out = os.path.join("out", "bubble", beamformer)
    run(spec.with_value("beamformer", beamformer), out)
    transient = read_json(os.path.join(out, "metrics.json"))["transient"]
    print(f"{beamformer}: transient FWHM {transient['fwhm_s'] * 1e3:.2f} ms")

    _, rows = read_csv(os.path.join(out, "trace.csv"))
    trace = np.array(rows, dtype=float)
    fig.add_trace(go.Scatter(x=trace[:, 0] * 1e3, y=trace[:, 1], mode="lines+markers",
                             name=beamformer))

fig.update_xaxes(title_text="Time (ms)")
fig.update_yaxes(title_text="Speed at the vessel center (m/s)")
fig.show()
