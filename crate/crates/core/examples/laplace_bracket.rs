//! Discounted criterion: the mirror coupling maximizes `E[exp(-q tau)]`.
//! Simulated brackets are compared with the closed form and with constant
//! and switching couplings run on the same random numbers.
//!
//! ```text
//! cargo run --release --example laplace_bracket
//! ```

use gbm_coupling::analytic::psi;
use gbm_coupling::simulate::{
    estimate_laplace, paired_laplace_difference, simulate_tau, switching_policy, CouplingPolicy, SimConfig,
};
use gbm_coupling::{derive, ProblemSpec, Sign};

fn main() -> gbm_coupling::Result<()> {
    let d = derive(&ProblemSpec::new(3.0, 1.0, 0.1, 0.5, 0.8, 0.4)?)?;
    let cfg = SimConfig { n_paths: 20_000, dt: 2e-3, horizon: 30.0, master_seed: 7, bridge_correction: true };
    let mirror = simulate_tau(&d, &CouplingPolicy::Mirror, &cfg)?;
    let others = [
        CouplingPolicy::Synchronous,
        CouplingPolicy::Constant(0.0),
        switching_policy(Sign::Plus, (0.8, 1.0), (0.3, 0.5))?,
    ];
    for q in [0.5, 2.0] {
        let b = estimate_laplace(&mirror, q, None)?;
        println!(
            "q = {q}: mirror bracket [{:.5}, {:.5}] +/- {:.5}, closed form {:.5}",
            b.lower.mean,
            b.upper.mean,
            b.lower.std_error,
            psi(&d, q, Sign::Plus)?.value
        );
        for p in &others {
            let out = simulate_tau(&d, p, &cfg)?;
            let diff = paired_laplace_difference(&mirror, &out, q)?;
            println!("    mirror - {:<40} {:+.5} ({:+.1} se)", p.label(), diff.mean, diff.mean / diff.std_error);
        }
    }
    Ok(())
}
