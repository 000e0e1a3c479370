//! Draw from each ground-truth distribution and check the sample against
//! its density.

use npmle_boost::DistributionSpec;

fn main() -> npmle_boost::Result<()> {
    let mut dists: Vec<(String, DistributionSpec)> = DistributionSpec::fitting_study()
        .into_iter()
        .map(|(n, d)| (n.to_string(), d))
        .collect();
    dists.push(("gmm beta=0.25".into(), DistributionSpec::gmm(0.25)));

    for (name, d) in dists {
        let raw = d.sample(20_000, 42)?;
        let v = raw.values();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        // fraction within one unit of the mean against the cdf
        let within = v.iter().filter(|x| (**x - mean).abs() <= 1.0).count() as f64 / v.len() as f64;
        let expected = d.cdf(mean + 1.0) - d.cdf(mean - 1.0);
        println!(
            "{name:<16} mean {mean:>8.4}  P(|X-mean|<=1) sample {within:.4} exact {expected:.4}  pdf(mean) {:.4}",
            d.pdf(mean)
        );
    }
    println!("{}", serde_json::to_string(&DistributionSpec::gmm(0.5))?);
    Ok(())
}
