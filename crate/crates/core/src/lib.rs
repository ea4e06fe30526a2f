//! Universal quantum cloning of photon polarization by stimulated emission.
//!
//! * [`cloning`]: closed-form fidelities for Fock-state cloning and for mean
//!   intensities of a gain/absorption amplifier.
//! * [`kernel`]: master-equation and Monte Carlo simulation of the two-mode
//!   amplifier, including post-selection on the output photon number.
//! * [`units`]: optical power, dB losses and photons per mode.
//! * [`pipeline`]: ingestion of measurement records, `(G, Q)` fitting and
//!   fidelity curves, synthetic datasets.

pub mod cloning;
pub mod error;
pub mod kernel;
pub mod optimize;
pub mod pipeline;
pub mod units;

pub use cloning::{
    fidelity_from_distribution, gain_from_mus, mean_fidelity, mean_fidelity_model, mean_outputs,
    optimal_fidelity, optimal_fidelity_ratio, stimulated_weights, AmplifierParams, CloneProcess,
    ConditionalCloneResult, MeanIntensities,
};
pub use error::{Error, Result};
pub use kernel::{
    evolve_master, evolve_master_with, postselect_total, process_probability, sample_trajectories,
    InputState, JointPhotonDistribution, MasterOptions, PostSelection, TrajectoryBatch,
};
pub use pipeline::{
    bracketing_curves, fit_fidelity_curve, fit_linear_means, ingest, synthesize, CurvePoint,
    FitMethod, FitReport, MeasurementRecord, SyntheticSpec, Units,
};
pub use units::{
    apply_loss_db, extinction_floor, photons_to_power, power_to_photons, CalibrationConfig,
    OpticalMode,
};
