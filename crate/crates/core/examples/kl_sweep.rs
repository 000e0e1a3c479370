//! A small version of the mixture-weight sweep: mean KL by beta and M.

use npmle_boost::sim::{kl_sweep, SweepConfig};
use npmle_boost::LearnerSpec;

fn main() -> npmle_boost::Result<()> {
    let betas = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    let iterations = vec![1, 10, 100, 500];
    let mut cfg = SweepConfig::new(betas.clone(), iterations.clone(), 5, LearnerSpec::smooth_spline());
    cfg.sample_size = 300;
    let res = kl_sweep(&cfg)?;

    print!("{:>6}", "beta");
    for m in &iterations {
        print!(" {:>16}", format!("M={m}"));
    }
    println!();
    for b in &betas {
        print!("{b:>6.2}");
        for m in &iterations {
            let a = res.aggregate(*b, *m).expect("cell was run");
            print!(" {:>16}", format!("{:.4} ({:.4})", a.mean, a.sd));
        }
        println!();
    }
    Ok(())
}
