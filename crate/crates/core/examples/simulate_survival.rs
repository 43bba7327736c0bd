//! Monte Carlo survival of the mirror and synchronous couplings against the
//! closed form.
//!
//! ```text
//! cargo run --release --example simulate_survival
//! ```

use gbm_coupling::analytic::phi;
use gbm_coupling::simulate::{estimate_survival, simulate_tau, CouplingPolicy, SimConfig};
use gbm_coupling::{derive, ProblemSpec, Sign};

fn main() -> gbm_coupling::Result<()> {
    let d = derive(&ProblemSpec::new(2.0, 1.0, 0.0, 0.5, 0.5, 1.0)?)?;
    let cfg = SimConfig { n_paths: 200_000, dt: 1e-3, horizon: 4.0, master_seed: 1, bridge_correction: true };
    for (sign, policy) in [(Sign::Plus, CouplingPolicy::Mirror), (Sign::Minus, CouplingPolicy::Synchronous)] {
        let out = simulate_tau(&d, &policy, &cfg)?;
        println!("{}", policy.label());
        for t in [0.25, 1.0, 4.0] {
            let e = estimate_survival(&out, t)?;
            let exact = phi(&d, t, sign)?;
            println!(
                "  t = {t:<5} simulated {:.5} +/- {:.5}   closed form {exact:.5}   ({:+.2} se)",
                e.mean,
                e.std_error,
                (e.mean - exact) / e.std_error.max(f64::MIN_POSITIVE)
            );
        }
    }
    Ok(())
}
