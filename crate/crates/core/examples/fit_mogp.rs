// Fits a coregionalized GP to the Liu pair and reports what it learned.

use synthfid::benchfns::LIU;
use synthfid::mogp::{self, FitConfig, KernelChoice};

fn run() -> synthfid::Result<()> {
    let data = LIU.grid(30)?;
    let config = FitConfig { kernel: KernelChoice::Rbf, restarts: 2, max_iters: 60, ..FitConfig::default() };
    let model = mogp::fit(&data, &config)?;

    println!("log marginal likelihood {:.4}", model.log_marginal_likelihood());
    println!("task covariance:{}", model.task().covariance());
    println!("fidelity correlation {:.4}", model.task().correlation(0, 1));

    let archive = synthfid::io::model_to_json(&model, Some(&config))?;
    let back = synthfid::io::model_from_json(&archive)?;
    assert_eq!(back.task().covariance(), model.task().covariance());
    println!("archive round-trips ({} bytes)", archive.len());
    Ok(())
}

fn main() {
    run().unwrap();
}
