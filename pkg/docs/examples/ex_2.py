# Transverse vessel, DAS against NLHR on the same RF data.
# Needs a few minutes per run on the 128 element probe.

import os

from plotly.subplots import make_subplots

from nlhrflow import ExperimentSpec, extract_profile, run
from nlhrflow.experiment import build
from nlhrflow.plotting import plot_profile
from nlhrflow.storage import load_velocity_field, read_json

here = os.path.dirname(os.path.abspath(__file__))
spec = ExperimentSpec.from_json(os.path.join(here, "transverse.json"))
setup = build(spec)

fig = make_subplots(rows=1, cols=2, subplot_titles=("DAS", "NLHR"), shared_yaxes=True)
for col, beamformer in enumerate(("das", "nlhr"), start=1):
    out = os.path.join("out", "transverse", beamformer)
    run(spec.with_value("beamformer", beamformer), out)

    summary = read_json(os.path.join(out, "metrics.json"))["profile"]
    print(f"{beamformer}: bias {summary['median_bias']:.1f} %, sd {summary['sd']:.1f} %, "
          f"angle bias {summary['median_angle_bias']:.1f} deg")

    velocity = load_velocity_field(os.path.join(out, "velocity"))
    report = extract_profile(velocity, setup.flow, setup.grid)
    plot_profile(report, fig, row=1, col=col)

fig.update_layout(title_text="Transverse vessel, peak velocity 50 cm/s", showlegend=False)
fig.show()
