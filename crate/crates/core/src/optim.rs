//! Box-clipped BFGS used for hyperparameter fitting.

/// Stopping rules for [`minimize`].
#[derive(Clone, Debug)]
pub struct BfgsSettings {
    pub max_iters: usize,
    /// Stop when the infinity norm of the (projected) gradient falls below this.
    pub grad_tol: f64,
    /// Stop when the relative decrease of the objective falls below this.
    pub f_tol: f64,
    /// Largest step (infinity norm) tried by the line search.
    pub max_step: f64,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        BfgsSettings {
            max_iters: 200,
            grad_tol: 1e-6,
            f_tol: 1e-12,
            max_step: 2.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn clip(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient with components that push against an active bound zeroed.
fn projected(g: &[f64], x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    g.iter()
        .zip(x)
        .zip(lower.iter().zip(upper))
        .map(|((&gi, &xi), (&lo, &hi))| {
            if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// Minimizes `objective` over the box `[lower, upper]`.
///
/// `objective` returns the value and gradient, or `None` when the point cannot
/// be evaluated; the line search backs off from such points. An error is
/// returned only if the starting point itself fails.
pub fn minimize<F>(
    mut objective: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    settings: &BfgsSettings,
) -> Result<Minimum, String>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clip(&mut x, lower, upper);
    let (mut f, mut g) = match objective(&x) {
        Some((f, g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => (f, g),
        _ => return Err("objective could not be evaluated at the starting point".into()),
    };
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset(&mut h);
    let mut first = true;

    for iter in 0..settings.max_iters {
        let pg = projected(&g, &x, lower, upper);
        if pg.iter().fold(0.0f64, |m, v| m.max(v.abs())) < settings.grad_tol {
            return Ok(Minimum {
                x,
                value: f,
                iterations: iter,
                converged: true,
            });
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &pg)).collect();
        if dot(&dir, &pg) >= 0.0 {
            reset(&mut h);
            dir = pg.iter().map(|v| -v).collect();
        }
        let norm = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm > settings.max_step {
            dir.iter_mut().for_each(|v| *v *= settings.max_step / norm);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            clip(&mut trial, lower, upper);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            if step.iter().all(|v| *v == 0.0) {
                break;
            }
            if let Some((ft, gt)) = objective(&trial) {
                if ft.is_finite()
                    && gt.iter().all(|v| v.is_finite())
                    && ft <= f + 1e-4 * decrease.min(0.0)
                {
                    accepted = Some((trial, step, ft, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((xt, s, ft, gt)) = accepted else {
            return Ok(Minimum {
                x,
                value: f,
                iterations: iter,
                converged: false,
            });
        };

        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first {
                let scale = sy / dot(&y, &y);
                reset(&mut h);
                h.iter_mut().for_each(|v| *v *= scale);
                first = false;
            }
            // H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }

        let rel = (f - ft).abs() / (1.0 + f.abs());
        x = xt;
        f = ft;
        g = gt;
        if rel < settings.f_tol {
            return Ok(Minimum {
                x,
                value: f,
                iterations: iter + 1,
                converged: true,
            });
        }
    }
    Ok(Minimum {
        x,
        value: f,
        iterations: settings.max_iters,
        converged: false,
    })
}
