"""Plotly figures for inspecting a run: velocity profiles, singular-value
spectra, velocity-time traces, vector maps over B-mode and slow-time
spectrograms.

Each function returns a ``plotly.graph_objects.Figure``; when ``fig``,
``row`` and ``col`` are given the traces are added to that subplot
instead.
"""

# Third Party Imports
import numpy as np
import plotly.figure_factory as ff
import plotly.graph_objects as go
from plotly.subplots import make_subplots


def _place(data, fig, row, col, title, xlabel, ylabel):
    if row and col and fig:
        for trace in data:
            fig.add_trace(trace, row=row, col=col)
        fig.update_xaxes(title_text=xlabel, row=row, col=col)
        fig.update_yaxes(title_text=ylabel, row=row, col=col)
        return fig
    fig = go.Figure(data=data)
    fig.update_layout(title_text=title, title_font_size=24)
    fig.update_xaxes(title_text=xlabel)
    fig.update_yaxes(title_text=ylabel)
    return fig


def plot_profile(report, fig=None, row=None, col=None):
    """Measured velocity magnitude against radial position with the true
    profile and a one-standard-deviation band.

    Parameters
    ----------
    report : ProfileReport
    fig : plotly.graph_objects.Figure, optional
        Figure to add the traces to, by default None
    row, col : int, optional
        Subplot position, by default None

    Returns
    -------
    figure : `plotly.graph_objs._figure.Figure`
    """
    r = report.radial_positions * 1e3
    sd = report.v_sd_percent / 100 * report.peak_velocity
    data = [
        go.Scatter(x=r, y=report.true_v, mode="lines", name="truth",
                   line=dict(color="black", dash="dash")),
        go.Scatter(x=r, y=report.measured_v + sd, mode="lines", line=dict(width=0),
                   showlegend=False, hoverinfo="skip"),
        go.Scatter(x=r, y=report.measured_v - sd, mode="lines", line=dict(width=0),
                   fill="tonexty", fillcolor="rgba(0, 0, 255, 0.2)", name="+/- 1 SD",
                   hoverinfo="skip"),
        go.Scatter(x=r, y=report.measured_v, mode="lines", name="measured",
                   line=dict(color="blue", width=2),
                   hovertemplate="r: %{x:.2f} mm<br>v: %{y:.3f} m/s"),
    ]
    return _place(data, fig, row, col, "Velocity profile", "Radial position (mm)",
                  "Velocity (m/s)")


def plot_sv_spectrum(reports, fig=None, row=None, col=None):
    """Singular values in dB, one line per (angle, side) cube."""
    data = []
    for report in reports:
        name = " ".join(str(s) for s in report.source) or "cube"
        data.append(go.Scatter(x=np.arange(report.singular_values_db.size),
                               y=report.singular_values_db, mode="lines", name=name))
    return _place(data, fig, row, col, "Singular value spectrum", "Component",
                  "Singular value (dB)")


def plot_sv_frequencies(reports, fig=None, row=None, col=None):
    """Mean Doppler frequency of every temporal singular vector."""
    data = []
    for report in reports:
        name = " ".join(str(s) for s in report.source) or "cube"
        data.append(go.Scatter(x=np.arange(report.frequencies.size), y=report.frequencies,
                               mode="markers", name=name))
    return _place(data, fig, row, col, "Temporal singular vector frequency", "Component",
                  "Frequency (Hz)")


def plot_velocity_trace(times, magnitude, angle=None, truth=None):
    """Velocity (and optionally angle) against time at one pixel.

    Parameters
    ----------
    times : array_like
        Window center times (s).
    magnitude : array_like
        Speed (m/s).
    angle : array_like, optional
        Angle (degrees); drawn in a second row when given.
    truth : array_like, optional
        True speed at ``times``.
    """
    t = np.asarray(times) * 1e3
    rows = 2 if angle is not None else 1
    fig = make_subplots(rows=rows, cols=1, shared_xaxes=True, vertical_spacing=0.08)
    fig.add_trace(go.Scatter(x=t, y=magnitude, mode="lines+markers", name="speed"),
                  row=1, col=1)
    if truth is not None:
        fig.add_trace(go.Scatter(x=t, y=truth, mode="lines", name="truth",
                                 line=dict(color="black", dash="dash")), row=1, col=1)
    fig.update_yaxes(title_text="Velocity (m/s)", row=1, col=1)
    if angle is not None:
        fig.add_trace(go.Scatter(x=t, y=angle, mode="lines+markers", name="angle"),
                      row=2, col=1)
        fig.update_yaxes(title_text="Angle (deg)", row=2, col=1)
    fig.update_xaxes(title_text="Time (ms)", row=rows, col=1)
    fig.update_layout(title_text="Velocity trace", title_font_size=24)
    return fig


def plot_vector_field(field, grid, bmode=None, window=0, stride=4, scale=None):
    """Velocity arrows over a B-mode image.

    Parameters
    ----------
    field : VelocityField
        Estimates on ``grid``.
    grid : ImagingGrid
    bmode : numpy.ndarray, optional
        (n_x, n_z) image in dB drawn underneath.
    window : int
        Estimation window to draw, by default 0
    stride : int
        Every ``stride``-th pixel along each axis gets an arrow.
    scale : float, optional
        Arrow length per m/s in meters; by default the largest speed spans
        ``stride`` lateral pixels.
    """
    n_x, n_z = grid.shape
    vx = field.vx[:, window].reshape(n_x, n_z)[::stride, ::stride]
    vz = field.vz[:, window].reshape(n_x, n_z)[::stride, ::stride]
    x = grid.x_coords[::stride] * 1e3
    z = grid.z_coords[::stride] * 1e3
    xx, zz = np.meshgrid(x, z, indexing="ij")

    ok = np.isfinite(vx) & np.isfinite(vz)
    if scale is None:
        top = np.nanmax(np.hypot(vx, vz)) if np.any(ok) else 0.0
        scale = (stride * (grid.dx or 1e-4)) / top if top > 0 else 1.0
    u = np.where(ok, vx, 0.0) * scale * 1e3
    w = np.where(ok, vz, 0.0) * scale * 1e3

    if np.any(ok):
        fig = ff.create_quiver(xx[ok], zz[ok], u[ok], w[ok], scale=1.0, arrow_scale=0.3,
                               name="velocity", line=dict(color="red", width=1))
    else:
        fig = go.Figure()
    if bmode is not None:
        fig.add_trace(go.Heatmap(x=grid.x_coords * 1e3, y=grid.z_coords * 1e3,
                                 z=np.asarray(bmode).T, colorscale="gray",
                                 showscale=False))
        # heatmap underneath the arrows
        fig.data = (fig.data[-1],) + fig.data[:-1]
    fig.update_yaxes(autorange="reversed", title_text="Depth (mm)")
    fig.update_xaxes(title_text="Lateral (mm)")
    fig.update_layout(title_text="Vector flow", title_font_size=24)
    return fig


def plot_spectrogram(frequencies, times, power, dynamic_range=40.0):
    """Slow-time spectrogram in dB relative to its maximum."""
    power = np.asarray(power, dtype=float)
    peak = power.max() if power.size else 0.0
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(power / peak) if peak > 0 else np.zeros_like(power)
    db = np.clip(db, -dynamic_range, 0.0)
    fig = go.Figure(data=go.Heatmap(x=np.asarray(times) * 1e3, y=frequencies, z=db,
                                    colorscale="Viridis", colorbar=dict(title="dB")))
    fig.update_xaxes(title_text="Time (ms)")
    fig.update_yaxes(title_text="Frequency (Hz)")
    fig.update_layout(title_text="Slow-time spectrogram", title_font_size=24)
    return fig
