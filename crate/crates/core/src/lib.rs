pub mod current;
pub mod diagnostics;
pub mod harness;
pub mod kmc;
pub mod observables;
pub mod pde;
