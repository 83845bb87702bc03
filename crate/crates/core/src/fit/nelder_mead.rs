//! Nelder-Mead simplex minimization.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iters: usize,
    /// Stop once `f_worst - f_best <= rel_tol * |f_best| + abs_tol`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial simplex edge along each coordinate.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iters: 2000,
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            initial_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub best_history: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `x0`. Non-finite objective values are treated as +inf.
pub fn minimize(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult {
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut order: Vec<usize> = (0..=n).collect();

    while iterations < opts.max_iters {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);
        let spread = values[worst] - values[best];
        if spread <= opts.rel_tol * values[best].abs() + opts.abs_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / n as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr);
        if fr < values[best] {
            let xe = along(REFLECT * EXPAND);
            let fe = eval(&xe);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
        } else if fr < values[second] {
            simplex[worst] = xr;
            values[worst] = fr;
        } else {
            let (xc, fc) = if fr < values[worst] {
                let xc = along(REFLECT * CONTRACT);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-CONTRACT);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(values[worst]) {
                simplex[worst] = xc;
                values[worst] = fc;
            } else {
                let anchor = simplex[best].clone();
                for &i in &order[1..] {
                    for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                        *x = a + SHRINK * (*x - a);
                    }
                    values[i] = eval(&simplex[i]);
                }
            }
        }
        let best_now = values.iter().copied().fold(f64::INFINITY, f64::min);
        history.push(best_now);
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    NelderMeadResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        evaluations,
        converged,
        best_history: history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let opts = NelderMeadOptions {
            max_iters: 5000,
            rel_tol: 0.0,
            abs_tol: 1e-20,
            initial_step: 0.5,
        };
        let r = minimize(rosenbrock, &[-1.2, 1.0], &opts);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn best_value_never_increases() {
        let r = minimize(
            |x| {
                x.iter()
                    .enumerate()
                    .map(|(i, v)| (i as f64 + 1.0) * (v - 0.3).powi(2))
                    .sum::<f64>()
                    + x[0].sin()
            },
            &[2.0, -1.0, 0.5, 3.0],
            &NelderMeadOptions::default(),
        );
        assert!(r.best_history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.best_history.last().copied().unwrap_or(r.f), r.f);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let opts = NelderMeadOptions {
            max_iters: 3,
            ..NelderMeadOptions::default()
        };
        let r = minimize(rosenbrock, &[-1.2, 1.0], &opts);
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn nan_is_treated_as_worst() {
        let r = minimize(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 1.0).powi(2) },
            &[0.5],
            &NelderMeadOptions::default(),
        );
        assert!((r.x[0] - 1.0).abs() < 1e-3);
    }
}
