//! Balance energy of signed synaptic matrices, ripple replay over a place
//! field population, Hebbian plasticity with a balance regularizer, and a
//! knowledge-to-neuron interpretation pipeline.

pub mod balance;
pub mod config;
pub mod experiment;
pub mod interpret;
pub mod io;
pub mod matrix;
pub mod plasticity;
pub mod population;
pub mod ripple;
pub mod seed;

pub use balance::{
    balance_energy_fast, balance_energy_naive, balance_gradient_fast, balance_gradient_naive,
    descend_balance, BalanceError, DescentConfig, Kernel, Penalty,
};
pub use matrix::{DenseMatrix, MatrixError, SynapticMatrix};
