//! Exponential moments of the discrete Gaussian and the `e^(12K)` identity
//! for the local-Gibbs test observables.

use surface_hydro::diagnostics::{gibbs_exp_moment, gibbs_f_expectations, truncation_bound};

fn main() {
    for k in [0.25, 1.0, 2.0] {
        println!("K = {k}");
        for lambda in [-0.5, 0.0, 0.3, 1.7] {
            println!(
                "  E exp(2K z) at lambda = {lambda:+.1}: {:.6e}   E exp(-4K z): {:.6e}",
                gibbs_exp_moment(lambda, 2.0, k),
                gibbs_exp_moment(lambda, -4.0, k)
            );
        }
        let (p, m) = gibbs_f_expectations((0.2, -0.7, 1.1), k);
        println!(
            "  E f+ = {p:.4e}, E f- = {m:.4e}, ln(E f+ E f-) = {:.12} vs 12K = {}",
            (p * m).ln(),
            12.0 * k
        );
        println!(
            "  series truncated at |n - lambda| <= {}",
            truncation_bound(k)
        );
    }
}
