//! Damped Gauss-Newton (Levenberg-Marquardt) fit of one generating
//! function to scattered (xB, t, value +- sigma) observations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GeneratorParams;
use crate::seeds::{purpose, rng_for};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorObservation {
    pub xb: f64,
    pub t: f64,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorFitOptions {
    pub n_starts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Parameters held at the given value, in (a, b, c, d, e, f) order.
    pub fixed: [Option<f64>; 6],
}

impl Default for GeneratorFitOptions {
    fn default() -> Self {
        Self { n_starts: 20, max_iter: 500, seed: 0, fixed: [None; 6] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorFit {
    pub params: GeneratorParams,
    /// Weighted sum of squared residuals.
    pub sse: f64,
    /// 6 x 6 covariance estimate; rows and columns of fixed parameters are zero.
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
}

struct Problem<'a> {
    obs: &'a [GeneratorObservation],
    fixed: [Option<f64>; 6],
    free: Vec<usize>,
}

impl Problem<'_> {
    fn full(&self, x: &[f64]) -> GeneratorParams {
        let mut p = [0.0; 6];
        let mut it = x.iter();
        for (i, v) in p.iter_mut().enumerate() {
            *v = match self.fixed[i] {
                Some(c) => c,
                None => *it.next().unwrap(),
            };
        }
        GeneratorParams::new(p)
    }

    fn residuals(&self, x: &[f64]) -> Option<DVector<f64>> {
        let g = self.full(x);
        let mut r = DVector::zeros(self.obs.len());
        for (i, o) in self.obs.iter().enumerate() {
            let v = g.eval(o.xb, o.t).ok()?;
            r[i] = (v - o.value) / o.sigma;
            if !r[i].is_finite() {
                return None;
            }
        }
        Some(r)
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.obs.len(), x.len());
        let mut xp = x.to_vec();
        for k in 0..x.len() {
            let h = 1e-7 * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            let rp = self.residuals(&xp)?;
            xp[k] = x[k] - h;
            let rm = self.residuals(&xp)?;
            xp[k] = x[k];
            j.set_column(k, &((rp - rm) / (2.0 * h)));
        }
        Some(j)
    }

    /// Runs LM from `x0`; returns (x, sse, iterations) or None when the start
    /// never produced finite residuals.
    fn solve(&self, x0: Vec<f64>, max_iter: usize) -> Option<(Vec<f64>, f64, usize, bool)> {
        let mut x = x0;
        let mut r = self.residuals(&x)?;
        let mut sse = r.norm_squared();
        let mut lambda = 1e-3;
        for it in 0..max_iter {
            let j = self.jacobian(&x)?;
            let jtj = j.transpose() * &j;
            let jtr = j.transpose() * &r;
            let mut accepted = false;
            while lambda < 1e16 {
                let mut a = jtj.clone();
                for d in 0..a.nrows() {
                    a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
                }
                let step = match a.clone().cholesky() {
                    Some(c) => c.solve(&(-&jtr)),
                    None => match a.lu().solve(&(-&jtr)) {
                        Some(s) => s,
                        None => {
                            lambda *= 4.0;
                            continue;
                        }
                    },
                };
                let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                if let Some(rn) = self.residuals(&xn) {
                    let sn = rn.norm_squared();
                    if sn < sse {
                        let gain = sse - sn;
                        let small_step = step.norm() <= 1e-12 * (DVector::from_vec(x.clone()).norm() + 1e-12);
                        x = xn;
                        r = rn;
                        sse = sn;
                        lambda = (lambda / 3.0).max(1e-12);
                        accepted = true;
                        if gain <= 1e-15 * sse || sse < 1e-28 || small_step {
                            return Some((x, sse, it + 1, true));
                        }
                        break;
                    }
                }
                lambda *= 4.0;
            }
            if !accepted {
                // No descent direction left at any damping: a minimum.
                return Some((x, sse, it + 1, true));
            }
        }
        Some((x, sse, max_iter, false))
    }
}

pub fn fit_generator(obs: &[GeneratorObservation], opts: &GeneratorFitOptions) -> Result<GeneratorFit> {
    let mut distinct: Vec<(u64, u64)> = obs.iter().map(|o| (o.xb.to_bits(), o.t.to_bits())).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 6 {
        return Err(Error::DegenerateData(format!("{} distinct (xB, t) points, need at least 6", distinct.len())));
    }
    if obs.iter().any(|o| !(o.sigma > 0.0) || !o.value.is_finite()) {
        return Err(Error::ZeroSigma("generator observation".into()));
    }
    let free: Vec<usize> = (0..6).filter(|&i| opts.fixed[i].is_none()).collect();
    let problem = Problem { obs, fixed: opts.fixed, free };
    let n_free = problem.free.len();

    let lo = obs.iter().map(|o| o.value).fold(f64::INFINITY, f64::min);
    let hi = obs.iter().map(|o| o.value).fold(f64::NEG_INFINITY, f64::max);
    let mean = obs.iter().map(|o| o.value).sum::<f64>() / obs.len() as f64;
    let mut rng = rng_for(opts.seed, &[purpose::MULTISTART]);
    let ranges = [(-5.0, 5.0), (-5.0, 5.0), (-3.0, 3.0), (-3.0, 3.0), (-2.0, 2.0), (lo, hi.max(lo + 1e-12))];
    let base = [0.0, 1.0, 0.0, 0.0, 0.0, mean];

    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut total_iter = 0;
    for s in 0..opts.n_starts.max(1) {
        let x0: Vec<f64> = problem
            .free
            .iter()
            .map(|&i| if s == 0 { base[i] } else { rng.random_range(ranges[i].0..=ranges[i].1) })
            .collect();
        if let Some((x, sse, it, conv)) = problem.solve(x0, opts.max_iter) {
            total_iter += it;
            if conv && best.as_ref().is_none_or(|b| sse < b.1) {
                best = Some((x, sse, it));
            }
        }
    }
    let (x, sse, _) = best.ok_or(Error::Convergence { iterations: total_iter })?;

    let mut covariance = vec![vec![0.0; 6]; 6];
    if let Some(j) = problem.jacobian(&x) {
        let dof = obs.len().saturating_sub(n_free).max(1) as f64;
        let jtj = j.transpose() * &j;
        if let Ok(inv) = jtj.pseudo_inverse(1e-12) {
            let scale = sse / dof;
            for (a, &ia) in problem.free.iter().enumerate() {
                for (b, &ib) in problem.free.iter().enumerate() {
                    covariance[ia][ib] = scale * inv[(a, b)];
                }
            }
        }
    }
    Ok(GeneratorFit { params: problem.full(&x), sse, covariance, iterations: total_iter })
}
