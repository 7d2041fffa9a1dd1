# Rotating disk: a full 2-D vector field over the B-mode image.

import os

from nlhrflow import ExperimentSpec
from nlhrflow.experiment import beamform_stage, build, estimate_stage, evaluate_stage, \
    simulate_stage
from nlhrflow.plotting import plot_vector_field

spec = ExperimentSpec.from_dict({
    "profile": "desk",
    "grid": {"x_min": -4, "x_max": 4, "z_min": 10, "z_max": 20},
    "phantom": {"type": "rotating_disk", "center_depth": 15, "radius": 4,
                "angular_velocity": 50},
    "units": {"x_min": "mm", "x_max": "mm", "z_min": "mm", "z_max": "mm",
              "center_depth": "mm", "radius": "mm"},
    "threads": 4,
})
setup = build(spec)
out = os.path.join("out", "disk")

rf, _ = simulate_stage(spec, out, setup)
ensemble, bmode, _ = beamform_stage(spec, rf, out, setup)
velocity, _, _ = estimate_stage(spec, ensemble, out, rf, setup)
metrics, _, _ = evaluate_stage(spec, velocity, out, setup)
print(metrics["field"])

fig = plot_vector_field(velocity, setup.grid, bmode, stride=6)
fig.show()
