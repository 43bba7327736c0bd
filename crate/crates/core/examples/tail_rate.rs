//! Exponential tail rates of the coupling time by splitting and regression,
//! against the closed-form limits `-mu^2 / (2 sigma_pm^2)`.
//!
//! ```text
//! cargo run --release --example tail_rate
//! ```

use gbm_coupling::analytic::tail_rates;
use gbm_coupling::cli::experiments::default_tail_horizon;
use gbm_coupling::simulate::{tail_rate_regression, CouplingPolicy, SimConfig, TailGrid};
use gbm_coupling::{derive, ProblemSpec};

fn main() -> gbm_coupling::Result<()> {
    // sigma1 = 1, sigma2 = 2 and mu = 1.5: both couplings decay exponentially.
    let d = derive(&ProblemSpec::new(2.0, 1.0, 0.0, 3.0, 1.0, 2.0)?)?;
    let rates = tail_rates(&d)?;
    for (policy, exact) in [(CouplingPolicy::Mirror, rates.rate_mirror), (CouplingPolicy::Synchronous, rates.rate_sync)] {
        let t_max = default_tail_horizon(exact);
        let grid = TailGrid::geometric(t_max, 8, (2f64.ln() / exact.abs()).min(t_max / 8.0));
        let cfg = SimConfig { n_paths: 2000, dt: 0.01, horizon: t_max, master_seed: 3, bridge_correction: true };
        let fit = tail_rate_regression(&d, &policy, &grid, &cfg)?;
        println!(
            "{:<12} fitted {:.5} +/- {:.5}, limit {exact:.5} (t up to {t_max:.1})",
            policy.label(),
            fit.rate,
            fit.std_error
        );
        for p in &fit.points {
            println!("    t = {:>8.2}  ln P = {:>10.4}  survivors {}", p.t, p.ln_survival, p.survivors);
        }
    }
    Ok(())
}
