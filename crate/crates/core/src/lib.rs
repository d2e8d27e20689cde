//! Fourier-domain augmentation for medical image slices: amplitude
//! modulation in frequency sectors, phase-attention mixing, class-wise
//! intensity remapping, and uncertainty-guided fusion of two augmented views.

pub mod amplitude;
pub mod config;
pub mod error;
pub mod fat;
pub mod fourier;
pub mod image;
pub mod io;
pub mod location;
pub mod metrics;
pub mod phantom;
pub mod phase_attention;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod uncertainty;

pub use config::AugConfig;
pub use error::{FiestaError, Result};
pub use image::{Image2D, LabelMap, ProbabilityMap, UncertaintyMap};
pub use rng::RngStream;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
