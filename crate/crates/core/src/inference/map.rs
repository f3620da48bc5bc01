//! Maximum a posteriori search in unconstrained coordinates.
//!
//! Each restart runs a quasi-Newton (BFGS) ascent with central-difference
//! gradients. When the line search fails, or progress stalls, a Nelder-Mead
//! simplex continues from the current point. The objective is the plain
//! posterior without the Jacobian term, so the reported value is the
//! constrained-space log-posterior.

use std::cell::Cell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::transform::ParamSpec;
use crate::distributions::RandomSource;
use crate::error::{Error, Result};

/// Central-difference step in unconstrained coordinates.
pub const FD_STEP: f64 = 1e-6;
/// Relative improvement below which a restart is considered converged.
pub const REL_TOL: f64 = 1e-9;
/// Evaluation budget per restart.
pub const MAX_EVALS: usize = 5000;
/// Scale of the Gaussian jitter for restarts after the first.
pub const RESTART_JITTER: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    /// Constrained-space optimum.
    pub point: Vec<f64>,
    pub log_posterior: f64,
    pub converged: bool,
    /// Posterior evaluations summed over all restarts.
    pub n_evaluations: usize,
    /// Which restart produced `point` (0 is the supplied start).
    pub restart_index: usize,
}

struct Objective<'a, F> {
    posterior: &'a F,
    spec: &'a ParamSpec,
    evals: Cell<usize>,
}

impl<F: Fn(&[f64]) -> f64> Objective<'_, F> {
    /// Negative log-posterior at an unconstrained point; `+inf` if infeasible.
    fn value(&self, u: &[f64]) -> f64 {
        self.evals.set(self.evals.get() + 1);
        let v = (self.posterior)(&self.spec.from_unconstrained(u));
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    }

    fn budget_left(&self) -> bool {
        self.evals.get() < MAX_EVALS
    }

    fn gradient(&self, u: &[f64]) -> Option<Vec<f64>> {
        let mut x = u.to_vec();
        let mut g = Vec::with_capacity(u.len());
        for i in 0..u.len() {
            let orig = x[i];
            x[i] = orig + FD_STEP;
            let up = self.value(&x);
            x[i] = orig - FD_STEP;
            let dn = self.value(&x);
            x[i] = orig;
            if !up.is_finite() || !dn.is_finite() {
                return None;
            }
            g.push((up - dn) / (2.0 * FD_STEP));
        }
        Some(g)
    }
}

struct RestartOutcome {
    u: Vec<f64>,
    f: f64,
    converged: bool,
    evals: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rel_gain(old: f64, new: f64) -> f64 {
    (old - new) / old.abs().max(1.0)
}

fn optimize<F: Fn(&[f64]) -> f64>(obj: &Objective<'_, F>, start: Vec<f64>) -> RestartOutcome {
    let mut u = start;
    let mut f = obj.value(&u);
    let mut converged = false;

    while obj.budget_left() {
        let (bu, bf, stalled) = bfgs(obj, u, f);
        // A simplex pass either confirms the optimum or escapes a spot
        // where the gradient was unusable.
        let (su, sf) = nelder_mead(obj, &bu, bf, if stalled { 0.25 } else { 0.02 });
        let gained = rel_gain(bf, sf);
        if sf < bf {
            u = su;
            f = sf;
        } else {
            u = bu;
            f = bf;
        }
        if gained < REL_TOL {
            converged = obj.budget_left();
            break;
        }
    }

    RestartOutcome {
        u,
        f,
        converged,
        evals: obj.evals.get(),
    }
}

/// Returns the final point, value and whether the run ended on a failed
/// line search or gradient evaluation.
fn bfgs<F: Fn(&[f64]) -> f64>(obj: &Objective<'_, F>, mut u: Vec<f64>, mut f: f64) -> (Vec<f64>, f64, bool) {
    let n = u.len();
    if n == 0 {
        return (u, f, false);
    }
    let identity = |scale: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect())
            .collect()
    };
    let mut hinv = identity(1.0);
    let Some(mut g) = obj.gradient(&u) else {
        return (u, f, true);
    };
    let mut first = true;

    while obj.budget_left() {
        let mut d: Vec<f64> = hinv.iter().map(|row| -dot(row, &g)).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            hinv = identity(1.0);
            d = g.iter().map(|x| -x).collect();
            slope = -dot(&g, &g);
            if slope == 0.0 {
                return (u, f, false);
            }
        }

        // Backtracking line search with the Armijo condition.
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            if !obj.budget_left() {
                break;
            }
            let trial: Vec<f64> = u.iter().zip(&d).map(|(x, di)| x + alpha * di).collect();
            let ft = obj.value(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((nu, nf)) = accepted else {
            return (u, f, true);
        };
        let Some(ng) = obj.gradient(&nu) else {
            return (nu, nf, true);
        };

        let s: Vec<f64> = nu.iter().zip(&u).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = ng.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if first {
                hinv = identity(sy / dot(&y, &y));
                first = false;
            }
            let hy: Vec<f64> = hinv.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }

        let gain = rel_gain(f, nf);
        u = nu;
        f = nf;
        g = ng;
        if gain < REL_TOL {
            return (u, f, false);
        }
    }
    (u, f, false)
}

fn nelder_mead<F: Fn(&[f64]) -> f64>(obj: &Objective<'_, F>, start: &[f64], f0: f64, step: f64) -> (Vec<f64>, f64) {
    let n = start.len();
    if n == 0 {
        return (start.to_vec(), f0);
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.to_vec(), f0)];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += step;
        let fv = obj.value(&v);
        simplex.push((v, fv));
    }

    let centroid = |s: &[(Vec<f64>, f64)]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        for (v, _) in &s[..n] {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi / n as f64;
            }
        }
        c
    };
    let along =
        |c: &[f64], w: &[f64], t: f64| -> Vec<f64> { c.iter().zip(w).map(|(ci, wi)| ci + t * (wi - ci)).collect() };

    while obj.budget_left() {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst.is_finite() && (worst - best).abs() <= REL_TOL * best.abs().max(1.0) {
            break;
        }
        let c = centroid(&simplex);
        let xr = along(&c, &simplex[n].0, -1.0);
        let fr = obj.value(&xr);
        if fr < best {
            let xe = along(&c, &simplex[n].0, -2.0);
            let fe = obj.value(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let x = along(&c, &xr, 0.5);
                let fx = obj.value(&x);
                (x, fx)
            } else {
                let x = along(&c, &simplex[n].0, 0.5);
                let fx = obj.value(&x);
                (x, fx)
            };
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let b = simplex[0].0.clone();
                for k in 1..=n {
                    let x = along(&b, &simplex[k].0, 0.5);
                    let fx = obj.value(&x);
                    simplex[k] = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Maximizes `posterior` (a log-density over the constrained space).
///
/// Restart 0 starts at `init`; restart `k > 0` starts at `init` plus
/// Gaussian jitter drawn from the `k`-th sub-stream of `rs`, so adding
/// restarts never changes the earlier ones.
pub fn map_fit<F>(
    posterior: F,
    spec: &ParamSpec,
    init: &[f64],
    n_restarts: usize,
    rs: &RandomSource,
) -> Result<MapResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let u0 = spec.to_unconstrained(init)?;
    let n_restarts = n_restarts.max(1);

    let outcomes: Vec<Option<RestartOutcome>> = (0..n_restarts)
        .into_par_iter()
        .map(|k| {
            let start: Vec<f64> = if k == 0 {
                u0.clone()
            } else {
                let mut sub = rs.substream(0x006d_6170, k as u64);
                u0.iter().map(|x| x + RESTART_JITTER * sub.standard_normal()).collect()
            };
            let obj = Objective {
                posterior: &posterior,
                spec,
                evals: Cell::new(0),
            };
            if !obj.value(&start).is_finite() {
                return None;
            }
            Some(optimize(&obj, start))
        })
        .collect();

    let n_evaluations =
        outcomes.iter().flatten().map(|o| o.evals).sum::<usize>() + outcomes.iter().filter(|o| o.is_none()).count();
    let (restart_index, best) = outcomes
        .iter()
        .enumerate()
        .filter_map(|(k, o)| o.as_ref().map(|o| (k, o)))
        .fold(None::<(usize, &RestartOutcome)>, |acc, (k, o)| match acc {
            Some((_, b)) if b.f <= o.f => acc,
            _ => Some((k, o)),
        })
        .ok_or(Error::AllRestartsInfeasible)?;

    Ok(MapResult {
        point: spec.from_unconstrained(&best.u),
        log_posterior: -best.f,
        converged: best.converged && best.f.is_finite(),
        n_evaluations,
        restart_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::transform::Bound;

    #[test]
    fn one_dimensional_gaussian() {
        let spec = ParamSpec::from_pairs([("x", Bound::Unbounded)]).unwrap();
        let r = map_fit(|x: &[f64]| -0.5 * x[0] * x[0], &spec, &[3.0], 1, &RandomSource::new(0)).unwrap();
        assert!(r.point[0].abs() < 1e-6, "{:?}", r);
        assert!(r.converged);
        assert_eq!(r.restart_index, 0);
    }

    #[test]
    fn correlated_gaussian_mode() {
        // Precision of a unit-variance pair with correlation 0.8.
        let rho: f64 = 0.8;
        let det = 1.0 - rho * rho;
        let lp = move |x: &[f64]| {
            let a = x[0] - 1.0;
            let b = x[1] - 2.0;
            -0.5 * (a * a - 2.0 * rho * a * b + b * b) / det
        };
        let spec = ParamSpec::from_pairs([("a", Bound::Unbounded), ("b", Bound::Unbounded)]).unwrap();
        let r = map_fit(lp, &spec, &[-3.0, 5.0], 1, &RandomSource::new(0)).unwrap();
        assert!(
            (r.point[0] - 1.0).abs() < 1e-5 && (r.point[1] - 2.0).abs() < 1e-5,
            "{:?}",
            r
        );
    }

    #[test]
    fn bounded_mode() {
        // Beta(3, 5)-shaped density on (0, 1): mode at 2/6.
        let spec = ParamSpec::from_pairs([("p", Bound::UnitInterval)]).unwrap();
        let lp = |x: &[f64]| 2.0 * x[0].ln() + 4.0 * (1.0 - x[0]).ln();
        let r = map_fit(lp, &spec, &[0.9], 3, &RandomSource::new(5)).unwrap();
        assert!((r.point[0] - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_everywhere() {
        let spec = ParamSpec::from_pairs([("x", Bound::Unbounded)]).unwrap();
        let r = map_fit(|_: &[f64]| f64::NEG_INFINITY, &spec, &[0.0], 3, &RandomSource::new(0));
        assert_eq!(r, Err(Error::AllRestartsInfeasible));
    }

    #[test]
    fn more_restarts_never_worse() {
        // Bimodal target; the start sits near the lower mode.
        let lp = |x: &[f64]| {
            let a = (-0.5 * (x[0] + 2.0).powi(2)).exp();
            let b = 3.0 * (-0.5 * (x[0] - 3.0).powi(2)).exp();
            (a + b).ln()
        };
        let spec = ParamSpec::from_pairs([("x", Bound::Unbounded)]).unwrap();
        let rs = RandomSource::new(17);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..6 {
            let r = map_fit(lp, &spec, &[-2.0], k, &rs).unwrap();
            assert!(r.log_posterior >= prev);
            prev = r.log_posterior;
        }
    }
}
