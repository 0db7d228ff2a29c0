//! Stationary point of the expected per-pair objective.
//!
//! For a fixed `(x, r, y)` the expected objective as a function of the logit
//! `t = (x+r)·y` is `ℓ(t) = c₁·log σ(t) + c₂·log σ(−t)` with `c₁ = #(x,r,y)`
//! and `c₂ = k·#(x,r)·P_r(y)`. Its maximizer is a shifted pointwise mutual
//! information.

use crate::error::{DremError, Result};
use crate::trainer::objective::sigmoid;

fn validate(count_xry: f64, count_xr: f64, p_r_y: f64, k: usize) -> Result<()> {
    if !(count_xry > 0.0 && count_xr > 0.0) {
        return Err(DremError::InvalidArgument(format!("counts must be positive, got ({count_xry}, {count_xr})")));
    }
    if !(p_r_y > 0.0 && p_r_y <= 1.0) {
        return Err(DremError::InvalidArgument(format!("noise probability {p_r_y} is outside (0, 1]")));
    }
    if k == 0 {
        return Err(DremError::InvalidArgument("k must be ≥ 1".into()));
    }
    Ok(())
}

/// `log(#(x,r,y) / (#(x,r)·P_r(y))) − log k`.
pub fn shifted_pmi(count_xry: f64, count_xr: f64, p_r_y: f64, k: usize) -> Result<f64> {
    validate(count_xry, count_xr, p_r_y, k)?;
    Ok((count_xry / (count_xr * p_r_y)).ln() - (k as f64).ln())
}

/// Maximizes `ℓ(t)` numerically. `ℓ` is strictly concave, so its derivative
/// `c₁·σ(−t) − c₂·σ(t)` is strictly decreasing and is bisected to machine
/// precision.
pub fn scalar_optimum_check(count_xry: f64, count_xr: f64, p_r_y: f64, k: usize) -> Result<f64> {
    validate(count_xry, count_xr, p_r_y, k)?;
    let c1 = count_xry;
    let c2 = k as f64 * count_xr * p_r_y;
    let slope = |t: f64| c1 * sigmoid(-t) - c2 * sigmoid(t);
    let (mut lo, mut hi) = (-1.0, 1.0);
    while slope(lo) < 0.0 {
        lo *= 2.0;
    }
    while slope(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
