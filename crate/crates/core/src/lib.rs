pub mod calibration;
pub mod error;
pub mod harness;
pub mod electrochem;
pub mod params;
pub mod plant;
pub mod sim;

pub use error::{Error, Result};
