//! Multi-restart maximization of the log marginal likelihood.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelHyperparams, MixtureComponent, NoiseVariance, TaskMatrix};
use crate::optim::{self, BfgsSettings};

use super::likelihood::KroneckerLikelihood;
use super::{FidelityDataset, MogpModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelChoice {
    Rbf,
    SpectralMixture { mixtures: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// One learned noise variance for all fidelities.
    Shared,
    /// A learned noise variance per fidelity.
    PerFidelity,
    /// Held at the given value.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Closed-form kernel gradients; task and noise parameters by central
    /// differences on the cached eigendecomposition.
    Analytic,
    /// Central differences for every parameter.
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub kernel: KernelChoice,
    pub noise: NoiseMode,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub gradient: GradientMode,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            kernel: KernelChoice::SpectralMixture { mixtures: 4 },
            noise: NoiseMode::Shared,
            restarts: 8,
            max_iters: 200,
            seed: 0,
            gradient: GradientMode::Analytic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub initial_lml: Option<f64>,
    pub final_lml: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Best log marginal likelihood, as evaluated by the fitting objective.
    pub lml: f64,
    pub best_restart: usize,
    pub iterations: usize,
    pub restarts: Vec<RestartOutcome>,
}

/// Maps the flat optimizer vector to hyperparameters.
struct Layout {
    template: Kernel,
    /// Free kernel log-params (RBF signal variance is pinned to 1; the task
    /// matrix carries the scale).
    kernel_free: usize,
    n_t: usize,
    noise: NoiseMode,
}

impl Layout {
    fn new(template: Kernel, n_t: usize, noise: NoiseMode) -> Self {
        let kernel_free = match &template {
            Kernel::Rbf { lengthscales, .. } => lengthscales.len(),
            Kernel::SpectralMixture { .. } => template.num_params(),
        };
        Layout {
            template,
            kernel_free,
            n_t,
            noise,
        }
    }

    fn n_task(&self) -> usize {
        TaskMatrix::num_unconstrained(self.n_t)
    }

    fn n_noise(&self) -> usize {
        match self.noise {
            NoiseMode::Shared => 1,
            NoiseMode::PerFidelity => self.n_t,
            NoiseMode::Fixed(_) => 0,
        }
    }

    fn len(&self) -> usize {
        self.kernel_free + self.n_task() + self.n_noise()
    }

    fn kernel(&self, p: &[f64]) -> Kernel {
        match &self.template {
            Kernel::Rbf { .. } => {
                let mut full = p[..self.kernel_free].to_vec();
                full.push(0.0);
                self.template.with_log_params(&full)
            }
            Kernel::SpectralMixture { .. } => self.template.with_log_params(&p[..self.kernel_free]),
        }
    }

    fn task(&self, p: &[f64]) -> TaskMatrix {
        let s = self.kernel_free;
        TaskMatrix::from_unconstrained(self.n_t, &p[s..s + self.n_task()])
    }

    fn noise_values(&self, p: &[f64]) -> Vec<f64> {
        let s = self.kernel_free + self.n_task();
        match self.noise {
            NoiseMode::Shared => vec![p[s].exp(); self.n_t],
            NoiseMode::PerFidelity => p[s..s + self.n_t].iter().map(|v| v.exp()).collect(),
            NoiseMode::Fixed(v) => vec![v; self.n_t],
        }
    }

    fn noise_variance(&self, p: &[f64]) -> NoiseVariance {
        let s = self.kernel_free + self.n_task();
        match self.noise {
            NoiseMode::Shared => NoiseVariance::Shared(p[s].exp()),
            NoiseMode::PerFidelity => {
                NoiseVariance::PerFidelity(p[s..s + self.n_t].iter().map(|v| v.exp()).collect())
            }
            NoiseMode::Fixed(v) => NoiseVariance::Shared(v),
        }
    }
}

/// Data-derived scales used for initialization and bounds.
struct Scales {
    span: Vec<f64>,
    /// Smallest non-zero spacing per dimension.
    min_gap: Vec<f64>,
    moment: f64,
}

impl Scales {
    fn new(data: &FidelityDataset) -> Self {
        let span = data
            .bounds()
            .iter()
            .map(|(lo, hi)| if hi > lo { hi - lo } else { 1.0 })
            .collect::<Vec<_>>();
        let min_gap = (0..data.n_dims())
            .map(|d| {
                let mut c: Vec<f64> = data.x().column(d).iter().copied().collect();
                c.sort_by(f64::total_cmp);
                c.windows(2)
                    .map(|w| w[1] - w[0])
                    .filter(|g| *g > 0.0)
                    .fold(f64::INFINITY, f64::min)
            })
            .zip(&span)
            .map(|(g, s)| if g.is_finite() { g } else { *s })
            .collect();
        let moment = data
            .second_moments()
            .into_iter()
            .fold(0.0f64, f64::max)
            .max(1e-12);
        Scales {
            span,
            min_gap,
            moment,
        }
    }
}

/// Spectral mixture variance corresponding to lengthscale `l`.
fn sm_variance(l: f64) -> f64 {
    1.0 / (2.0 * PI * l).powi(2)
}

fn template(choice: KernelChoice, d: usize) -> Result<Kernel> {
    match choice {
        KernelChoice::Rbf => Ok(Kernel::rbf(vec![1.0; d], 1.0)),
        KernelChoice::SpectralMixture { mixtures } => {
            if mixtures == 0 {
                return Err(Error::InvalidHyperparams("need at least one mixture".into()));
            }
            Ok(Kernel::SpectralMixture {
                components: vec![
                    MixtureComponent {
                        weight: 1.0,
                        means: vec![1.0; d],
                        variances: vec![1.0; d],
                    };
                    mixtures
                ],
            })
        }
    }
}

fn bounds(layout: &Layout, scales: &Scales) -> (Vec<f64>, Vec<f64>) {
    let mut lo = Vec::with_capacity(layout.len());
    let mut hi = Vec::with_capacity(layout.len());
    match &layout.template {
        Kernel::Rbf { .. } => {
            for s in &scales.span {
                lo.push((1e-3 * s).ln());
                hi.push((1e2 * s).ln());
            }
        }
        Kernel::SpectralMixture { components } => {
            for _ in components {
                lo.push(1e-6f64.ln());
                hi.push(1e3f64.ln());
                for (s, g) in scales.span.iter().zip(&scales.min_gap) {
                    lo.push((1e-3 / s).ln());
                    hi.push((1.0 / g).ln());
                }
                for s in &scales.span {
                    lo.push(sm_variance(1e2 * s).ln());
                    hi.push(sm_variance(1e-3 * s).ln());
                }
            }
        }
    }
    let b = 1e3 * scales.moment.sqrt() + 1.0;
    for _ in 0..layout.n_task() {
        lo.push(-b);
        hi.push(b);
    }
    for _ in 0..layout.n_noise() {
        lo.push((1e-10 * scales.moment).ln());
        hi.push((10.0 * scales.moment).ln());
    }
    (lo, hi)
}

fn initial_point(
    layout: &Layout,
    scales: &Scales,
    data: &FidelityDataset,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut p = Vec::with_capacity(layout.len());
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| rng.random_range(lo.ln()..hi.ln());
    match &layout.template {
        Kernel::Rbf { .. } => {
            for s in &scales.span {
                p.push(log_uniform(rng, 0.01 * s, 2.0 * s));
            }
        }
        Kernel::SpectralMixture { components } => {
            let q = components.len();
            let n = data.n_points();
            for _ in 0..q {
                p.push((1.0 / q as f64).ln());
                // frequencies from reciprocals of random pairwise distances
                let i = rng.random_range(0..n);
                let j = (i + rng.random_range(1..n)) % n;
                for d in 0..data.n_dims() {
                    let gap = (data.x()[(i, d)] - data.x()[(j, d)]).abs();
                    let nyquist = 0.5 / scales.min_gap[d];
                    let base = if gap > 0.0 { (1.0 / gap).min(nyquist) } else { nyquist };
                    let mu = (rng.random::<f64>() * base).max(1e-3 / scales.span[d]);
                    p.push(mu.ln());
                }
                for s in &scales.span {
                    let l = log_uniform(rng, 0.01 * s, 2.0 * s).exp();
                    p.push(sm_variance(l).ln());
                }
            }
        }
    }
    let n_t = data.n_fidelities();
    let y = data.y();
    let n = data.n_points() as f64;
    let mut sigma = (y.transpose() * y) / n;
    let ridge = 1e-6 * (sigma.trace() / n_t as f64).max(1e-12);
    for k in 0..n_t {
        sigma[(k, k)] += ridge;
    }
    let task = TaskMatrix::from_covariance(&sigma).unwrap_or_else(|_| {
        let diag = nalgebra::DMatrix::from_fn(n_t, n_t, |i, j| {
            if i == j {
                sigma[(i, i)].max(1e-12).sqrt()
            } else {
                0.0
            }
        });
        TaskMatrix::from_factor(diag).expect("positive diagonal")
    });
    p.extend(task.to_unconstrained());
    let moments = data.second_moments();
    match layout.noise {
        NoiseMode::Shared => {
            let m = moments.iter().sum::<f64>() / n_t as f64;
            p.push(log_uniform(rng, 1e-4 * m.max(1e-12), 1e-1 * m.max(1e-12)));
        }
        NoiseMode::PerFidelity => {
            for m in moments {
                p.push(log_uniform(rng, 1e-4 * m.max(1e-12), 1e-1 * m.max(1e-12)));
            }
        }
        NoiseMode::Fixed(_) => {}
    }
    p
}

struct Objective<'a> {
    layout: &'a Layout,
    data: &'a FidelityDataset,
    gradient: GradientMode,
}

impl Objective<'_> {
    fn lml_at(&self, p: &[f64]) -> Option<f64> {
        let kernel = self.layout.kernel(p);
        let kl = KroneckerLikelihood::new(&kernel, self.data).ok()?;
        let v = kl.evaluate(&self.layout.task(p).covariance(), &self.layout.noise_values(p));
        v.is_finite().then_some(v)
    }

    /// Log marginal likelihood and its gradient.
    fn lml_grad(&self, p: &[f64]) -> Option<(f64, Vec<f64>)> {
        let layout = self.layout;
        let kernel = layout.kernel(p);
        let kl = KroneckerLikelihood::new(&kernel, self.data).ok()?;
        let sigma = layout.task(p).covariance();
        let analytic = self.gradient == GradientMode::Analytic;
        let parts = kl.parts(&sigma, &layout.noise_values(p), analytic);
        if !parts.lml.is_finite() {
            return None;
        }
        let mut grad = vec![0.0; p.len()];
        let nk = layout.kernel_free;
        if analytic {
            let w = kl.kernel_gradient_weights(&sigma, &parts);
            let g = kernel.gram_grad_contract(self.data.x(), &w);
            grad[..nk].copy_from_slice(&g[..nk]);
            let noise = layout.noise_values(p);
            let (gs, gn) = kl.task_noise_gradient(&noise, &parts);
            let l = layout.task(p).factor();
            // dΣ/dL for Σ = LLᵀ
            let gl = (&gs + gs.transpose()) * &l;
            let mut at = nk;
            for i in 0..layout.n_t {
                for j in 0..=i {
                    grad[at] = if i == j {
                        gl[(i, j)] / (1.0 + (-p[at]).exp())
                    } else {
                        gl[(i, j)]
                    };
                    at += 1;
                }
            }
            match layout.noise {
                NoiseMode::Shared => grad[at] = gn.iter().zip(&noise).map(|(g, d)| g * d).sum(),
                NoiseMode::PerFidelity => {
                    for k in 0..layout.n_t {
                        grad[at + k] = gn[k] * noise[k];
                    }
                }
                NoiseMode::Fixed(_) => {}
            }
        } else {
            let h = 1e-5;
            let mut q = p.to_vec();
            for i in 0..p.len() {
                q[i] = p[i] + h;
                let up = self.lml_at(&q)?;
                q[i] = p[i] - h;
                let dn = self.lml_at(&q)?;
                q[i] = p[i];
                grad[i] = (up - dn) / (2.0 * h);
            }
        }
        Some((parts.lml, grad))
    }
}

/// Fits kernel hyperparameters, task matrix and noise by maximizing the log
/// marginal likelihood from `config.restarts` random starting points.
pub fn fit(data: &FidelityDataset, config: &FitConfig) -> Result<MogpModel> {
    if config.restarts == 0 {
        return Err(Error::InvalidHyperparams("need at least one restart".into()));
    }
    if let NoiseMode::Fixed(v) = config.noise {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidHyperparams(format!("fixed noise must be non-negative: {v}")));
        }
    }
    let layout = Layout::new(
        template(config.kernel, data.n_dims())?,
        data.n_fidelities(),
        config.noise,
    );
    let scales = Scales::new(data);
    let (lower, upper) = bounds(&layout, &scales);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let starts: Vec<Vec<f64>> = (0..config.restarts)
        .map(|_| {
            let mut p = initial_point(&layout, &scales, data, &mut rng);
            for ((v, lo), hi) in p.iter_mut().zip(&lower).zip(&upper) {
                *v = v.clamp(*lo, *hi);
            }
            p
        })
        .collect();

    let objective = Objective {
        layout: &layout,
        data,
        gradient: config.gradient,
    };
    let settings = BfgsSettings {
        max_iters: config.max_iters,
        ..BfgsSettings::default()
    };
    let results: Vec<(RestartOutcome, Option<Vec<f64>>)> = starts
        .par_iter()
        .map(|x0| {
            let initial_lml = objective.lml_at(x0);
            let run = optim::minimize(
                |p| objective.lml_grad(p).map(|(f, g)| (-f, g.iter().map(|v| -v).collect())),
                x0,
                &lower,
                &upper,
                &settings,
            );
            match run {
                Ok(m) => (
                    RestartOutcome {
                        initial_lml,
                        final_lml: Some(-m.value),
                        iterations: m.iterations,
                        converged: m.converged,
                        error: None,
                    },
                    Some(m.x),
                ),
                Err(e) => (
                    RestartOutcome {
                        initial_lml,
                        final_lml: None,
                        iterations: 0,
                        converged: false,
                        error: Some(e),
                    },
                    None,
                ),
            }
        })
        .collect();

    let best = results
        .iter()
        .enumerate()
        .filter_map(|(i, (o, x))| Some((i, o.final_lml?, x.as_ref()?)))
        .fold(None::<(usize, f64, &Vec<f64>)>, |acc, cur| match acc {
            Some(a) if a.1 >= cur.1 => Some(a),
            _ => Some(cur),
        });
    let Some((best_restart, lml, x)) = best else {
        return Err(Error::Fit {
            causes: results
                .iter()
                .enumerate()
                .map(|(i, (o, _))| {
                    format!("restart {i}: {}", o.error.as_deref().unwrap_or("unknown failure"))
                })
                .collect(),
        });
    };
    let hyper = KernelHyperparams {
        kernel: layout.kernel(x),
        noise: layout.noise_variance(x),
    };
    let task = layout.task(x);
    let diagnostics = FitDiagnostics {
        lml,
        best_restart,
        iterations: results[best_restart].0.iterations,
        restarts: results.into_iter().map(|(o, _)| o).collect(),
    };
    MogpModel::new(data.clone(), hyper, task, Some(diagnostics))
}

/// The objective maximized by [`fit`], evaluated at arbitrary hyperparameters.
pub fn fit_objective(
    data: &FidelityDataset,
    params: &KernelHyperparams,
    task: &TaskMatrix,
) -> Result<f64> {
    super::likelihood::check_shapes(data, params, task)?;
    let kl = KroneckerLikelihood::new(&params.kernel, data)?;
    let noise: Vec<f64> = (0..data.n_fidelities())
        .map(|k| params.noise.for_fidelity(k))
        .collect();
    Ok(kl.evaluate(&task.covariance(), &noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn toy(n_t: usize) -> FidelityDataset {
        let n = 12;
        let x = DMatrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64);
        let y = DMatrix::from_fn(n, n_t, |i, k| {
            let t = x[(i, 0)];
            (6.0 * t).sin() + 0.3 * k as f64 * (11.0 * t).cos()
        });
        FidelityDataset::with_default_labels(x, y).unwrap()
    }

    fn gradient_check(choice: KernelChoice, noise: NoiseMode, n_t: usize) {
        let data = toy(n_t);
        let layout = Layout::new(template(choice, 1).unwrap(), n_t, noise);
        let scales = Scales::new(&data);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = initial_point(&layout, &scales, &data, &mut rng);
        let obj = Objective {
            layout: &layout,
            data: &data,
            gradient: GradientMode::Analytic,
        };
        let (_, g) = obj.lml_grad(&p).unwrap();
        for i in 0..p.len() {
            let h = 1e-5;
            let mut q = p.clone();
            q[i] += h;
            let up = obj.lml_at(&q).unwrap();
            q[i] -= 2.0 * h;
            let dn = obj.lml_at(&q).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let tol = 1e-4 * fd.abs().max(g[i].abs()).max(1e-2);
            assert!((fd - g[i]).abs() <= tol, "param {i}: fd {fd} analytic {}", g[i]);
        }
    }

    #[test]
    fn analytic_gradient_rbf() {
        gradient_check(KernelChoice::Rbf, NoiseMode::PerFidelity, 2);
    }

    #[test]
    fn analytic_gradient_through_noise_floor() {
        gradient_check(KernelChoice::Rbf, NoiseMode::Fixed(0.0), 2);
    }

    #[test]
    fn analytic_gradient_spectral_mixture() {
        gradient_check(KernelChoice::SpectralMixture { mixtures: 2 }, NoiseMode::Shared, 3);
    }

    #[test]
    fn fit_is_deterministic() {
        let data = toy(2);
        let config = FitConfig {
            kernel: KernelChoice::Rbf,
            restarts: 3,
            max_iters: 40,
            seed: 11,
            ..FitConfig::default()
        };
        let a = fit(&data, &config).unwrap();
        let b = fit(&data, &config).unwrap();
        assert_eq!(a.diagnostics(), b.diagnostics());
        assert_eq!(a.hyperparams(), b.hyperparams());
    }

    #[test]
    fn best_lml_dominates_every_start() {
        let data = toy(2);
        let config = FitConfig {
            kernel: KernelChoice::SpectralMixture { mixtures: 2 },
            restarts: 3,
            max_iters: 30,
            seed: 5,
            ..FitConfig::default()
        };
        let m = fit(&data, &config).unwrap();
        let d = m.diagnostics().unwrap();
        for r in &d.restarts {
            if let Some(init) = r.initial_lml {
                assert!(d.lml >= init);
            }
        }
    }
}
