pub mod error;
pub mod microsim;
pub mod model;
pub mod netcore;
pub mod trainer;
pub mod tsgrid;
pub mod window;

pub use error::{Error, Result};
