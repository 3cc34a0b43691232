//! Simulator for optical random neural networks whose projection kernel is
//! chosen by rotating a scattering disk, plus the digital readout and the
//! genetic search over disk orientations.

pub mod binfmt;
pub mod data;
pub mod diffuser;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod optics;
pub mod pipeline;
pub mod readout;

pub use data::{Dataset, GrayImage, Split};
pub use diffuser::{step_to_angle, AngularStep, DiffuserConfig, DiffuserScreen, STEPS_PER_REVOLUTION};
pub use error::{Error, Result};
pub use evolve::{ga_run, Fitness, GaConfig, GaOutcome, GaState, GenerationRecord, MutationMode};
pub use grid::RealGrid;
pub use optics::{CameraFrame, FieldGrid, OpticsConfig};
pub use pipeline::{Evaluation, OpticalPipeline, ReadoutConfig};
pub use readout::{FeatureMatrix, LabelVector, RidgeModel};
