//! Expected maximum of a finite family of lines `a_i + b_i Z`, `Z ~ N(0, 1)`.

use crate::error::{BicoError, Result};
use crate::stats::{norm_cdf, norm_pdf};

/// `z Φ(z) + φ(z) = E[max(Z + z, 0)]`.
#[inline]
fn gain(z: f64) -> f64 {
    z * norm_cdf(z) + norm_pdf(z)
}

/// `E_Z[max_i (means_i + slopes_i Z)] − max_i means_i`.
///
/// Lines are sorted by slope, dominated ones dropped (slope ties within
/// `1e-12·max|slope|` keep the larger intercept), and the expectation is
/// accumulated over the breakpoints `c_k` of the upper envelope as
/// `Σ_k (b_{k+1} − b_k) f(−|c_k|)` with `f(z) = z Φ(z) + φ(z)`.
pub fn kg_discrete(means: &[f64], slopes: &[f64]) -> Result<f64> {
    if means.is_empty() || means.len() != slopes.len() {
        return Err(BicoError::invalid(format!(
            "need equal, nonzero numbers of means and slopes (got {} and {})",
            means.len(),
            slopes.len()
        )));
    }
    if means.iter().chain(slopes).any(|v| !v.is_finite()) {
        return Err(BicoError::invalid("non-finite line coefficient"));
    }

    let mut lines: Vec<(f64, f64)> = slopes.iter().copied().zip(means.iter().copied()).collect();
    lines.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let scale = slopes.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let tie = 1e-12 * scale;

    // collapse slope ties, keeping the largest intercept (sorted last)
    let mut distinct: Vec<(f64, f64)> = Vec::with_capacity(lines.len());
    for (b, a) in lines {
        match distinct.last_mut() {
            Some(last) if (b - last.0).abs() <= tie => {
                if a >= last.1 {
                    *last = (last.0, a);
                }
            }
            _ => distinct.push((b, a)),
        }
    }
    if distinct.len() == 1 {
        return Ok(0.0);
    }

    // upper envelope: envelope[k] dominates on (breaks[k], breaks[k+1])
    let mut envelope: Vec<(f64, f64)> = Vec::with_capacity(distinct.len());
    let mut breaks: Vec<f64> = Vec::with_capacity(distinct.len());
    for (b, a) in distinct {
        loop {
            let Some(&(bt, at)) = envelope.last() else {
                envelope.push((b, a));
                breaks.push(f64::NEG_INFINITY);
                break;
            };
            // z where the new (steeper) line overtakes the top of the stack
            let z = (at - a) / (b - bt);
            if z <= *breaks.last().unwrap() {
                envelope.pop();
                breaks.pop();
                continue;
            }
            envelope.push((b, a));
            breaks.push(z);
            break;
        }
    }

    let mut kg = 0.0;
    for k in 1..envelope.len() {
        kg += (envelope[k].0 - envelope[k - 1].0) * gain(-breaks[k].abs());
    }
    Ok(kg.max(0.0))
}
