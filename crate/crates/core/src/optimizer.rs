//! Nelder-Mead simplex minimisation.
//!
//! Stops when every vertex lies within `tol` (sup-norm) of the best vertex
//! or when the evaluation budget is spent.

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    pub tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            tol: 1e-6,
            initial_step: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Counted<F> {
    f: F,
    evals: usize,
    best_x: Vec<f64>,
    best_value: f64,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < self.best_value {
            self.best_value = v;
            self.best_x.clear();
            self.best_x.extend_from_slice(x);
        }
        v
    }
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Minimises `f` starting from `x0`. The returned point is the best point
/// evaluated, so its value is no larger than that of any simplex vertex.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let k = x0.len();
    let mut obj = Counted {
        f,
        evals: 0,
        best_x: x0.to_vec(),
        best_value: f64::INFINITY,
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    simplex.push(x0.to_vec());
    for i in 0..k {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| obj.eval(v)).collect();
    let mut converged = false;

    loop {
        // order vertices by value, best first
        let mut idx: Vec<usize> = (0..=k).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        if diameter(&simplex) < opts.tol {
            converged = true;
            break;
        }
        if obj.evals >= opts.max_evals {
            break;
        }

        let mut centroid = vec![0.0; k];
        for v in &simplex[..k] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / k as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[k])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = obj.eval(&xr);
        if fr < values[0] {
            let xe = along(REFLECT * EXPAND);
            let fe = obj.eval(&xe);
            if fe < fr {
                simplex[k] = xe;
                values[k] = fe;
            } else {
                simplex[k] = xr;
                values[k] = fr;
            }
            continue;
        }
        if fr < values[k - 1] {
            simplex[k] = xr;
            values[k] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[k] {
            let xc = along(REFLECT * CONTRACT);
            let fc = obj.eval(&xc);
            (xc, (fc <= fr).then_some(fc))
        } else {
            let xc = along(-CONTRACT);
            let fc = obj.eval(&xc);
            (xc, (fc < values[k]).then_some(fc))
        };
        if let Some(fc) = fc {
            simplex[k] = xc;
            values[k] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=k {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + SHRINK * (*x - b);
            }
            values[i] = obj.eval(&simplex[i]);
        }
    }

    Minimum {
        x: obj.best_x,
        value: obj.best_value,
        evals: obj.evals,
        converged,
    }
}
