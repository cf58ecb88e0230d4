// The full pipeline on the Currin pair: grid, fit, draw, export.

use synthfid::benchfns::CURRIN;
use synthfid::mogp::{self, FitConfig, KernelChoice};
use synthfid::sampler::{self, PriorDraw};

fn run() -> synthfid::Result<()> {
    let data = CURRIN.grid(8)?;
    println!("{}: {} points over {:?}", CURRIN.name, data.n_points(), CURRIN.domain);
    let config = FitConfig { kernel: KernelChoice::Rbf, restarts: 1, max_iters: 30, ..FitConfig::default() };
    let model = mogp::fit(&data, &config)?;

    let basis = sampler::build_basis(&model, 1, PriorDraw::Cholesky)?;
    let mut samples = Vec::new();
    for k in 0..4 {
        let spec = basis.bounds_session()?.sample_random(k)?;
        samples.push(sampler::draw_with_basis(&model, &basis, &spec)?.values);
    }
    let mut csv = Vec::new();
    synthfid::io::write_plot_data(&data, &samples, &mut csv)?;
    let text = String::from_utf8(csv).expect("utf-8");
    println!("plot data header: {}", text.lines().next().unwrap_or(""));
    Ok(())
}

fn main() {
    run().unwrap();
}
