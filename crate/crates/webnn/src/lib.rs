//! Web neural network: a complete-digraph recurrent layer over `Q` neurons
//! whose `Q×Q` state matrix evolves for `T` timesteps.

pub mod cli;
pub mod data;
pub mod error;
pub mod models;
pub mod tensor;
pub mod training;
pub mod web;

pub use error::{Error, Result};
pub use tensor::{Real, Tape, Tensor, Var};
