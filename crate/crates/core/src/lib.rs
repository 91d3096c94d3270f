//! Evidential surface-water detection for multi-spectral rasters.
//!
//! Two independent views of a scene are turned into Dempster-Shafer mass
//! functions over the frame `{water, non-water}`:
//!
//! * a spectral model, thresholding the NIR band at the valley of its histogram;
//! * a supervised model, a linear classifier over normalized-difference indices
//!   trained on pixels the spectral model is confident about.
//!
//! The spectral masses are discounted where the models disagree, the two
//! sources are averaged, and each pixel is labeled water, non-water or
//! ignorance with a cardinality-weighted pignistic decision.
//!
//! [`fusion::run_pipeline`] runs the whole chain; the individual steps are
//! public for experimentation.

pub mod belief;
pub mod error;
pub mod fusion;
pub mod indices;
pub mod labels;
pub mod raster;
pub mod scene;
pub mod spectral;
pub mod supervised;

pub use error::{Error, Result};
