//! Closed-form values of both candidate couplings for one problem.
//!
//! ```text
//! cargo run --example analytic_table
//! ```

use gbm_coupling::analytic::{phi, phi_xy, psi, tail_rates};
use gbm_coupling::params::{classify_discounted, classify_finite_horizon};
use gbm_coupling::{derive, ProblemSpec, Sign};

fn main() -> gbm_coupling::Result<()> {
    let spec = ProblemSpec::new(2.0, 1.0, 0.0, 1.0, 1.0, 1.0)?;
    let d = derive(&spec)?;
    println!("mu = {}, sigma+ = {}, sigma- = {}, z0 = {:.6}", d.mu, d.sigma_plus, d.sigma_minus, d.z0);

    println!("\n{:>6} {:>12} {:>12} {:>14}", "t", "phi mirror", "phi sync", "phi_xy mirror");
    for t in [0.1, 0.25, 0.5, 1.0, 2.0, 4.0] {
        println!(
            "{t:>6} {:>12.6} {:>12.6} {:>14.6}",
            phi(&d, t, Sign::Plus)?,
            phi(&d, t, Sign::Minus)?,
            phi_xy(&d, t, Sign::Plus, d.z0)?
        );
    }

    println!("\n{:>6} {:>12} {:>12}", "q", "psi mirror", "psi sync");
    for q in [0.25, 0.5, 1.0, 2.0, 4.0] {
        println!("{q:>6} {:>12.6} {:>12.6}", psi(&d, q, Sign::Plus)?.value, psi(&d, q, Sign::Minus)?.value);
    }

    let rates = tail_rates(&d)?;
    println!("\ntail rates: mirror {}, synchronous {}", rates.rate_mirror, rates.rate_sync);
    for sign in [Sign::Plus, Sign::Minus] {
        let f = classify_finite_horizon(&d, sign, 1.0)?;
        let q = classify_discounted(&d, sign);
        println!("{sign}: finite horizon {:?} ({:?}), discounted {:?}", f.verdict, f.reason, q.verdict);
    }
    Ok(())
}
