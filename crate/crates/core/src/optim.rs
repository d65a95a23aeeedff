//! Derivative-free search machinery: box bounds, Latin hypercube designs,
//! a clipped Nelder-Mead simplex maximiser and its multistart driver.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BicoError, Result};
use crate::stats::splitmix64;

/// Axis-aligned box `[lo_d, hi_d]` with `lo_d < hi_d` finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct BoxBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(ranges: Vec<(f64, f64)>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(BicoError::invalid("bounds need at least one dimension"));
        }
        for (d, &(lo, hi)) in ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(BicoError::invalid(format!(
                    "dimension {d}: need finite lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        let (lo, hi) = ranges.into_iter().unzip();
        Ok(BoxBounds { lo, hi })
    }

    /// `dim` copies of `[lo, hi]`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        BoxBounds::new(vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self, d: usize) -> f64 {
        self.lo[d]
    }

    pub fn hi(&self, d: usize) -> f64 {
        self.hi[d]
    }

    pub fn width(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .enumerate()
                .all(|(d, &v)| v >= self.lo[d] && v <= self.hi[d])
    }

    pub fn clip(&self, p: &mut [f64]) {
        for (d, v) in p.iter_mut().enumerate() {
            *v = if v.is_nan() {
                0.5 * (self.lo[d] + self.hi[d])
            } else {
                v.clamp(self.lo[d], self.hi[d])
            };
        }
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|d| self.lo[d] + rng.random::<f64>() * self.width(d))
            .collect()
    }

    /// Cartesian product `self × other`.
    pub fn concat(&self, other: &BoxBounds) -> BoxBounds {
        BoxBounds {
            lo: self.lo.iter().chain(&other.lo).copied().collect(),
            hi: self.hi.iter().chain(&other.hi).copied().collect(),
        }
    }

    pub fn ranges(&self) -> Vec<(f64, f64)> {
        self.lo.iter().copied().zip(self.hi.iter().copied()).collect()
    }
}

impl TryFrom<Vec<(f64, f64)>> for BoxBounds {
    type Error = BicoError;

    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        BoxBounds::new(v)
    }
}

impl From<BoxBounds> for Vec<(f64, f64)> {
    fn from(b: BoxBounds) -> Self {
        b.ranges()
    }
}

/// Latin hypercube design of `n` points: along every dimension each of the
/// `n` equal-width bins holds exactly one point.
pub fn lhs_sample<R: Rng + ?Sized>(n: usize, bounds: &BoxBounds, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; bounds.dim()]; n];
    if n == 0 {
        return points;
    }
    let mut bins: Vec<usize> = (0..n).collect();
    for d in 0..bounds.dim() {
        bins.shuffle(rng);
        let w = bounds.width(d);
        for (p, &bin) in points.iter_mut().zip(&bins) {
            let u: f64 = rng.random();
            let v = bounds.lo(d) + (bin as f64 + u) / n as f64 * w;
            // guard the open upper edge against rounding
            p[d] = v.min(bounds.hi(d));
        }
    }
    points
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const INITIAL_STEP: f64 = 0.05;
const DIAMETER_TOL: f64 = 1e-6;

fn sanitize(v: f64) -> f64 {
    if v.is_finite() { v } else { f64::NEG_INFINITY }
}

/// Maximises `f` over `bounds` with a Nelder-Mead simplex started at
/// `start`. Proposals leaving the box are clipped back onto it. Stops when
/// the simplex diameter falls below `1e-6` of the box width in every
/// dimension or after `max_evals` evaluations. Returns the best evaluated
/// point and its value.
pub fn nelder_mead_max<F>(
    f: &mut F,
    bounds: &BoxBounds,
    start: &[f64],
    max_evals: usize,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64 + ?Sized,
{
    let n = bounds.dim();
    let mut x0 = start.to_vec();
    bounds.clip(&mut x0);

    let mut evals = 0usize;
    let mut best = (x0.clone(), f64::NEG_INFINITY);
    let mut eval = |x: &[f64], evals: &mut usize, best: &mut (Vec<f64>, f64)| -> f64 {
        *evals += 1;
        let v = sanitize(f(x));
        if v > best.1 || *evals == 1 {
            *best = (x.to_vec(), v);
        }
        v
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&x0, &mut evals, &mut best);
    simplex.push((x0.clone(), v0));
    for d in 0..n {
        if evals >= max_evals {
            return best;
        }
        let mut v = x0.clone();
        let step = INITIAL_STEP * bounds.width(d);
        v[d] = if v[d] + step <= bounds.hi(d) {
            v[d] + step
        } else {
            v[d] - step
        };
        let fv = eval(&v, &mut evals, &mut best);
        simplex.push((v, fv));
    }

    let point_along = |c: &[f64], towards: &[f64], coef: f64| -> Vec<f64> {
        let mut p: Vec<f64> = c
            .iter()
            .zip(towards)
            .map(|(ci, ti)| ci + coef * (ti - ci))
            .collect();
        bounds.clip(&mut p);
        p
    };

    while evals < max_evals {
        // descending by value; -inf vertices sink to the end
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));

        let diameter_small = (0..n).all(|d| {
            let w = bounds.width(d);
            simplex
                .iter()
                .all(|(v, _)| (v[d] - simplex[0].0[d]).abs() < DIAMETER_TOL * w)
        });
        if diameter_small {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, vi) in centroid.iter_mut().zip(v) {
                *c += vi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let second_worst = simplex[n - 1].1;
        let best_val = simplex[0].1;

        let xr = point_along(&centroid, &worst.0, -REFLECT);
        let fr = eval(&xr, &mut evals, &mut best);

        if fr > best_val {
            if evals >= max_evals {
                simplex[n] = (xr, fr);
                break;
            }
            let xe = point_along(&centroid, &worst.0, -EXPAND);
            let fe = eval(&xe, &mut evals, &mut best);
            simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr > second_worst {
            simplex[n] = (xr, fr);
            continue;
        }
        if evals >= max_evals {
            break;
        }

        let (xc, fc, accept) = if fr > worst.1 {
            let xc = point_along(&centroid, &xr, CONTRACT);
            let fc = eval(&xc, &mut evals, &mut best);
            (xc, fc, fc >= fr)
        } else {
            let xc = point_along(&centroid, &worst.0, CONTRACT);
            let fc = eval(&xc, &mut evals, &mut best);
            (xc, fc, fc > worst.1)
        };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }

        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if evals >= max_evals {
                break;
            }
            let p = point_along(&anchor, &vertex.0, SHRINK);
            let fp = eval(&p, &mut evals, &mut best);
            *vertex = (p, fp);
        }
    }

    best
}

/// Runs [`nelder_mead_max`] from every point in `seeds` and from `n_starts`
/// random starts, returning the overall best.
///
/// Random start `i` is drawn from its own generator, seeded from a single
/// draw of `rng` mixed with `i`, so the first `k` starts are the same for any
/// `n_starts >= k` and the result never gets worse as starts are added.
pub fn multistart_max<F, R>(
    f: &mut F,
    bounds: &BoxBounds,
    n_starts: usize,
    max_evals: usize,
    rng: &mut R,
    seeds: &[Vec<f64>],
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64 + ?Sized,
    R: Rng + ?Sized,
{
    let base: u64 = rng.random();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let consider = |cand: (Vec<f64>, f64), best: &mut Option<(Vec<f64>, f64)>| {
        if best.as_ref().is_none_or(|b| cand.1 > b.1) {
            *best = Some(cand);
        }
    };
    for s in seeds {
        let cand = nelder_mead_max(f, bounds, s, max_evals);
        consider(cand, &mut best);
    }
    for i in 0..n_starts {
        let mut restart_rng = ChaCha8Rng::seed_from_u64(splitmix64(base ^ i as u64));
        let start = bounds.sample_uniform(&mut restart_rng);
        let cand = nelder_mead_max(f, bounds, &start, max_evals);
        consider(cand, &mut best);
    }
    best.unwrap_or_else(|| {
        let mid = bounds.midpoint();
        let v = sanitize(f(&mid));
        (mid, v)
    })
}

/// Index and value of the largest `f(p)` over a finite candidate set.
pub fn argmax_discrete<T, F>(candidates: &[T], mut f: F) -> Option<(usize, f64)>
where
    F: FnMut(&T) -> f64,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let v = sanitize(f(c));
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}
