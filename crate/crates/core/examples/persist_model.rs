//! Save a fitted model, load it back and evaluate it on a grid.

use npmle_boost::{fit_samples, model, DistributionSpec, FitConfig, LearnerSpec};

fn main() -> npmle_boost::Result<()> {
    let raw = DistributionSpec::exponential().sample(400, 8)?;
    let (ens, _) = fit_samples(&raw, &FitConfig::new(LearnerSpec::gaussian_kernel(), 100))?;

    let path = std::env::temp_dir().join("npmle-example-model.json");
    model::save(&ens, &path)?;
    let loaded = model::load(&path)?;
    println!("saved {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());

    let grid = loaded.density_grid(9)?;
    for p in &grid {
        println!("x {:>8.4}  f {:>9.5}  density {:>8.5}  original {:>8.5}", p.x, p.f, p.density, ens.density_or_zero(p.x));
    }
    std::fs::remove_file(&path)?;
    Ok(())
}
