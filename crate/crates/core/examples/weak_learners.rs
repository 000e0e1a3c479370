//! The three weak learners on one weighted least squares problem.

use npmle_boost::learners::{fit_cart, fit_kernel_ridge, fit_spline, FittedLearner};

fn main() -> npmle_boost::Result<()> {
    let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
    let w: Vec<f64> = x.iter().map(|v| 1.0 + 0.5 * (v * 1.3).cos()).collect();
    let g: Vec<f64> = x.iter().map(|v| (v * 0.8).sin() + 0.1 * (v * 7.0).sin()).collect();

    let spline = fit_spline(&x, &w, &g, 3.0)?;
    let kernel = fit_kernel_ridge(&x, &w, &g, 1.0, 1.0)?;
    let tree = fit_cart(&x, &w, &g, 10)?;

    if let FittedLearner::Spline(s) = &spline {
        println!("spline lambda for df 3: {:.4e}", s.lambda().unwrap_or(0.0));
    }
    if let FittedLearner::Cart(t) = &tree {
        println!("tree leaves: {}", t.leaf_count());
    }
    println!("{:>6} {:>8} {:>8} {:>8} {:>8}", "x", "g", "spline", "kernel", "tree");
    for i in (0..x.len()).step_by(4) {
        println!(
            "{:>6.2} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            x[i],
            g[i],
            spline.predict(x[i]),
            kernel.predict(x[i]),
            tree.predict(x[i])
        );
    }
    Ok(())
}
