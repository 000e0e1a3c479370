//! Watch the exact and surrogate log-likelihoods over the boosting path.

use npmle_boost::{fit_samples, DistributionSpec, FitConfig, LearnerSpec};

fn main() -> npmle_boost::Result<()> {
    let raw = DistributionSpec::student_t().sample(500, 3)?;
    let cfg = FitConfig::new(LearnerSpec::gaussian_kernel(), 300).with_trace();
    let (_, trace) = fit_samples(&raw, &cfg)?;
    println!("{:>5} {:>12} {:>12} {:>10} {:>10}", "m", "loglik", "surrogate", "Z", "gap");
    for r in trace.records.iter().filter(|r| [0, 1, 2, 5, 10, 30, 100, 300].contains(&r.iteration)) {
        // L - (1 + surrogate) = Z - 1 - log Z
        let gap = r.log_likelihood - 1.0 - r.surrogate;
        println!(
            "{:>5} {:>12.6} {:>12.6} {:>10.5} {:>10.2e}",
            r.iteration, r.log_likelihood, r.surrogate, r.normalizer, gap
        );
    }
    println!("max weight drift {:.1e}", trace.max_weight_drift());
    Ok(())
}
