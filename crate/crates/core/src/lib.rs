//! Rate-energy tradeoff solvers for the two-user MIMO interference channel
//! with simultaneous wireless information and power transfer.

pub mod beamformers;
pub mod boundary;
pub mod census;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod oracle;
mod roots;
pub mod scheduler;

pub use channel::ChannelSet;
pub use error::{Error, Result};
pub use metrics::{Beamformer, TxCovariance};
