//! Derivative-free minimizers for the stabilization parameter search.

/// Golden-section search on `[lo, hi]` until the bracket is narrower than
/// `tol`. Returns the best point evaluated.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: f64,
    /// Every coordinate is clamped to `>= lower`.
    pub lower: f64,
    pub diameter_tol: f64,
    pub max_evaluations: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 1.0,
            lower: 0.0,
            diameter_tol: 1e-2,
            max_evaluations: 60,
        }
    }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..simplex.len() {
        for j in i + 1..simplex.len() {
            let s: f64 =
                simplex[i].0.iter().zip(&simplex[j].0).map(|(a, b)| (a - b) * (a - b)).sum();
            d = d.max(s.sqrt());
        }
    }
    d
}

/// Nelder-Mead simplex search from `start`. Returns the best vertex.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    start: &[f64],
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let clamp = |x: Vec<f64>| -> Vec<f64> { x.into_iter().map(|v| v.max(opts.lower)).collect() };
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let x0 = clamp(start.to_vec());
    let f0 = eval(&x0, &mut evals);
    let mut simplex = vec![(x0.clone(), f0)];
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += opts.initial_step;
        let x = clamp(x);
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }
    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        clamp(c.iter().zip(w).map(|(c, w)| c + t * (w - c)).collect())
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if evals >= opts.max_evaluations || diameter(&simplex) < opts.diameter_tol {
            break;
        }
        let worst = simplex[n].clone();
        let centroid: Vec<f64> =
            (0..n).map(|k| simplex[..n].iter().map(|v| v.0[k]).sum::<f64>() / n as f64).collect();
        // x_r = c + alpha (c - x_w)
        let xr = point(&centroid, &worst.0, -opts.reflection);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = point(&centroid, &worst.0, -opts.reflection * opts.expansion);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = point(&centroid, &xr, opts.contraction);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = point(&centroid, &worst.0, opts.contraction);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x = point(&best, &v.0, opts.shrink);
                    let fx = eval(&x, &mut evals);
                    *v = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_quadratic() {
        let (x, fx) = golden_section(|g| (g - 3.0).powi(2), 0.0, 100.0, 1e-2);
        assert!((x - 3.0).abs() < 1e-2);
        assert!(fx < 1e-4);
    }

    #[test]
    fn golden_boundary_minimum() {
        let (x, _) = golden_section(|g| g + 1.0, 0.0, 100.0, 1e-2);
        assert!(x < 1e-2);
    }

    #[test]
    fn simplex_shifted_bowl() {
        let (x, _) = nelder_mead(
            |g| (g[0] - 1.0).powi(2) + (g[1] - 2.0).powi(2),
            &[1.0, 1.0],
            &NelderMeadOptions::default(),
        );
        assert!((x[0] - 1.0).abs() < 1e-2, "{x:?}");
        assert!((x[1] - 2.0).abs() < 1e-2, "{x:?}");
    }

    #[test]
    fn simplex_respects_lower_bound() {
        let (x, _) = nelder_mead(
            |g| (g[0] + 5.0).powi(2) + (g[1] - 2.0).powi(2),
            &[1.0, 1.0],
            &NelderMeadOptions::default(),
        );
        assert!(x[0] >= 0.0 && x[0] < 1e-2);
    }

    #[test]
    fn scaled_objective_gives_same_argmin() {
        let f = |g: &[f64]| (g[0] - 4.0).powi(2) + 3.0 * (g[1] - 0.5).powi(2) + g[0] * g[1];
        let a = nelder_mead(f, &[1.0, 1.0], &NelderMeadOptions::default());
        let b = nelder_mead(|g| 7.5 * f(g), &[1.0, 1.0], &NelderMeadOptions::default());
        assert_eq!(a.0, b.0);
    }
}
