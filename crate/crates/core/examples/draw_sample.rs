// Draws synthetic fidelities with requested correlations to the basis.

use synthfid::benchfns::LIU;
use synthfid::mogp::{self, FitConfig, KernelChoice};
use synthfid::sampler::{self, PriorDraw};

fn run() -> synthfid::Result<()> {
    let data = LIU.grid(40)?;
    let config = FitConfig { kernel: KernelChoice::Rbf, restarts: 1, max_iters: 40, ..FitConfig::default() };
    let model = mogp::fit(&data, &config)?;
    let basis = sampler::build_basis(&model, 7, PriorDraw::Matrix)?;
    println!("basis correlation:{}", basis.correlation());

    for seed in 0..3 {
        let spec = basis.bounds_session()?.sample_random(seed)?;
        let s = sampler::draw_with_basis(&model, &basis, &spec)?;
        println!("requested {:.4?}", s.requested);
        println!("achieved  {:.4?}", s.achieved);
        println!("implied task covariances {:.4?}", s.implied_task_cross);
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
