# Point target under the array center, beamformed with DAS and NLHR.
# The NLHR signal sits at twice the transmit frequency.

import numpy as np
import plotly.graph_objects as go

from nlhrflow import (
    AcquisitionConfig,
    ImagingGrid,
    ScattererField,
    beamform_subapertures,
    build_array,
    mas_beamform,
    multiplication_count,
    resample_rf,
    simulate_rf,
)
from nlhrflow.metrics import axial_spectrum_centroid

##the closed form of the multiply-and-sum equals the sum over channel pairs
signals = np.random.default_rng(0).standard_normal(128)
pairwise = np.sum(np.triu(np.outer(signals, signals), 1))
print(f"MAS closed form: {mas_beamform(signals):.6f}, pairwise: {pairwise:.6f}")
print(f"multiplications saved per sample: {multiplication_count(128)}")

array = build_array(64, 0.3e-3)
cfg = AcquisitionConfig(8e6, 50e6, 10e3, num_frames=2, alpha_set=(6.0,))

point = ScattererField(np.array([0.0]), np.array([15e-3]), np.array([1.0]))
rf = simulate_rf([point, point], array, cfg, z_max=17e-3, start_time=12e-6)
rf = resample_rf(rf, 2, 1)

wavelength = cfg.wavelength
grid = ImagingGrid.from_extent(0.0, 0.0, 14e-3, 16e-3, wavelength / 2, wavelength / 12)

fig = go.Figure()
for beamformer in ("das", "nlhr"):
    ensemble = beamform_subapertures(rf, grid, array, cfg, beamformer)
    line = ensemble.left[0, :, 0]
    centroid = axial_spectrum_centroid(line, grid.dz, cfg.sound_speed)
    print(f"{beamformer}: axial spectral centroid {centroid / 1e6:.2f} MHz")
    fig.add_trace(go.Scatter(x=grid.z_coords * 1e3, y=line / np.nanmax(np.abs(line)),
                             mode="lines", name=beamformer))

fig.update_xaxes(title_text="Depth (mm)")
fig.update_yaxes(title_text="Normalised amplitude")
fig.update_layout(title_text="Left sub-aperture signal at 6 degrees")
fig.show()
