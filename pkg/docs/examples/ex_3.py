# Inclined vessels: the flow angle moves away from 90 degrees, the
# estimator has to follow.

import os

from nlhrflow import ExperimentSpec, sweep
from nlhrflow.storage import read_csv

here = os.path.dirname(os.path.abspath(__file__))
spec = ExperimentSpec.from_json(os.path.join(here, "inclined.json"))

out = os.path.join("out", "inclined")
sweep(spec, "inclination", [-20, 0, 20], out, unit="deg")

header, rows = read_csv(os.path.join(out, "comparison.csv"))
print(", ".join(header))
for row in rows:
    print(", ".join(row))
