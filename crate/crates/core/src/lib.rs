pub mod error;
pub mod mpnum;
pub mod orthopoly;
pub mod hypfun;
pub mod kernels;
pub mod matelem;
pub mod oracle;

pub use error::{Error, Result};
pub use mpnum::{ExtReal, PrecisionContext};
