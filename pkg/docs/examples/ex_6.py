# Static tissue around the vessel and the SVD clutter filter.
# The singular value spectrum shows where tissue ends and blood begins.

import os

from nlhrflow import ExperimentSpec
from nlhrflow.experiment import beamform_stage, build, estimate_stage, evaluate_stage, \
    simulate_stage
from nlhrflow.plotting import plot_sv_frequencies, plot_sv_spectrum
from nlhrflow.storage import read_json

spec = ExperimentSpec.from_dict({
    "profile": "desk",
    "tissue": {"level_db": 30},
    "clutter": {"k_remove": 0},
})
setup = build(spec)
out = os.path.join("out", "clutter")

rf, _ = simulate_stage(spec, out, setup)
ensemble, _, _ = beamform_stage(spec, rf, out, setup)

for k_remove in (0, 2):
    case = spec.with_value("k_remove", k_remove)
    case_dir = os.path.join(out, f"k{k_remove}")
    velocity, reports, _ = estimate_stage(case, ensemble, case_dir, rf, setup)
    evaluate_stage(case, velocity, case_dir, setup)
    summary = read_json(os.path.join(case_dir, "metrics.json"))["profile"]
    print(f"k_remove = {k_remove}: bias {summary['median_bias']:.1f} %, "
          f"sd {summary['sd']:.1f} %")

plot_sv_spectrum(reports).show()
plot_sv_frequencies(reports).show()
