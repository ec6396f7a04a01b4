//! Curve's two-coin Compound pool: invariant math, the swap contract and
//! the deposit zap.

pub mod math;
mod pool;
mod zap;

pub use pool::{SwapParams, SwapPool, Withdrawal, BALANCES};
pub use zap::{DepositZap, ZapDeposit};

#[cfg(test)]
mod tests;
