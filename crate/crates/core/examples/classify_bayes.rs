//! Two-class Bayes classifier from boosted class densities.
//!
//! Pass a headed CSV with `age` and `chd` columns to run on real data;
//! otherwise a synthetic two-Gaussian task is used.

use npmle_boost::classify::{fit_bayes, split_experiment, GaussianTask, SplitConfig};
use npmle_boost::io::read_labeled_file;
use npmle_boost::{FitConfig, LearnerSpec};

fn main() -> npmle_boost::Result<()> {
    let task = GaussianTask::default();
    let data = match std::env::args().nth(1) {
        Some(path) => read_labeled_file(path, "age", "chd")?,
        None => {
            println!("synthetic task, Bayes error {:.4}", task.bayes_error());
            task.sample(600, 5)?
        }
    };
    println!("{} rows, class counts {:?}", data.len(), data.class_counts());

    let fit = FitConfig::new(LearnerSpec::smooth_spline(), 500);
    let model = fit_bayes(&data, &fit)?;
    println!("priors {:?}, resubstitution error {:.4}", model.priors(), model.error_rate(&data));

    let report = split_experiment(&data, &SplitConfig::new(20, 0.7, fit))?;
    let s = report.summary;
    println!(
        "20 random 70/30 splits: train {:.4} (sd {:.4}), test {:.4} (sd {:.4}), skipped {}",
        s.train_mean, s.train_sd, s.test_mean, s.test_sd, s.skipped
    );
    Ok(())
}
