from nlhrflow.version import __version__
from nlhrflow.geometry import (
    TransducerArray,
    AcquisitionConfig,
    ImagingGrid,
    PixelSet,
    build_array,
    config_errors,
    validate_config,
)
from nlhrflow.phantom import (
    ParabolicVessel,
    PulsatileVessel,
    RotatingDisk,
    UniformFlow,
    ScattererField,
    RFFrameSet,
    Bubble,
    flow_velocity_at,
    seed_scatterers,
    seed_tissue,
    advance_scatterers,
    scatterer_trajectory,
    synth_pulse,
    simulate_rf,
)
from nlhrflow.beamforming import (
    SubApertureEnsemble,
    SlowTimeEnsemble,
    resample_rf,
    compute_delays,
    subaperture_weights,
    channel_directive_beams,
    form_subapertures,
    das_beamform,
    mas_beamform,
    multiplication_count,
    beamform_subapertures,
    bandpass_2f0,
    to_slowtime_ensemble,
    bmode_image,
)
from nlhrflow.clutter import (
    CasoratiMatrix,
    SvdReport,
    svd_filter,
    sv_report,
    filter_ensemble,
)
from nlhrflow.velocity import (
    EstimatorConfig,
    VelocityField,
    kasai_frequency,
    tac_estimate,
    tac_forward,
    tac_field,
    directional_line,
    dcc_estimate,
    dcc_field,
)
from nlhrflow.metrics import (
    ProfileReport,
    velocity_bias_sd,
    angle_bias_sd,
    extract_profile,
    field_error_summary,
)
from nlhrflow.experiment import ExperimentSpec, run, sweep
from nlhrflow.data_validation import ConfigError, PipelineError
