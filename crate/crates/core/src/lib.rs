pub mod checker;
pub mod compound;
pub mod curve;
pub mod kernel;
pub mod ledger;
pub mod harness;
