//! Fit a density to draws from a two-component Laplace mixture and compare
//! it with the truth.

use npmle_boost::sim::kl_divergence;
use npmle_boost::{fit_samples, DistributionSpec, FitConfig, LearnerSpec};

fn main() -> npmle_boost::Result<()> {
    let truth = DistributionSpec::laplace_mixture();
    let raw = truth.sample(500, 1)?;
    let (ens, _) = fit_samples(&raw, &FitConfig::new(LearnerSpec::smooth_spline(), 200))?;

    let (lo, hi) = ens.support();
    println!("support [{lo:.3}, {hi:.3}], {} knots, {} learners", ens.knots().len(), ens.len());
    println!("log-likelihood {:.6}", ens.log_likelihood()?);
    println!("{:>8} {:>10} {:>10}", "x", "fitted", "true");
    for x in [-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0] {
        println!("{x:>8.2} {:>10.5} {:>10.5}", ens.density_or_zero(x), truth.pdf(x));
    }
    let kl = kl_divergence(&truth, &ens, 2001)?;
    println!("KL {:.5} (true mass outside support {:.4})", kl.kl, kl.truncated_mass);
    Ok(())
}
