//! Integer-order Bessel functions of the first kind by Miller's backward recurrence.

use crate::error::{Error, Result};

/// Largest order supported.
pub const MAX_ORDER: u32 = 60;
/// Largest |x| supported.
pub const MAX_ARG: f64 = 30.0;

const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_BY: f64 = 1e-250;

fn check_range(n: u32, x: f64) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::domain(format!("Bessel order {n} exceeds {MAX_ORDER}")));
    }
    if !(x.abs() <= MAX_ARG) {
        return Err(Error::domain(format!("Bessel argument {x} outside [-{MAX_ARG}, {MAX_ARG}]")));
    }
    Ok(())
}

/// `J_0(x) ..= J_{n_max}(x)` in one backward sweep.
pub fn bessel_j_all(n_max: u32, x: f64) -> Result<Vec<f64>> {
    check_range(n_max, x)?;
    let n_max = n_max as usize;
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    let ax = x.abs();
    // Start far enough above both n and x that the seed error has decayed below
    // double precision by the time the recurrence reaches the orders we keep.
    let mut start = n_max.max(ax.ceil() as usize) + 40;
    if start % 2 == 1 {
        start += 1;
    }
    let two_over_x = 2.0 / ax;
    let mut j_above = 0.0;
    let mut j_here = 1e-30;
    let mut even_sum = 0.0;
    for k in (1..=start).rev() {
        let j_below = k as f64 * two_over_x * j_here - j_above;
        j_above = j_here;
        j_here = j_below;
        // j_here now holds J_{k-1}
        let order = k - 1;
        if order <= n_max {
            out[order] = j_here;
        }
        if order % 2 == 0 && order > 0 {
            even_sum += j_here;
        }
        if j_here.abs() > RESCALE_ABOVE {
            j_here *= RESCALE_BY;
            j_above *= RESCALE_BY;
            even_sum *= RESCALE_BY;
            for v in out.iter_mut().skip(order) {
                *v *= RESCALE_BY;
            }
        }
    }
    // J_0 + 2 Σ J_2k = 1
    let norm = out[0] + 2.0 * even_sum;
    for (n, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && n % 2 == 1 {
            *v = -*v;
        }
    }
    Ok(out)
}

/// `J_n(x)` for `0 <= n <= 60`, `|x| <= 30`; absolute error below 1e-10.
pub fn bessel_j(n: u32, x: f64) -> Result<f64> {
    Ok(bessel_j_all(n, x)?[n as usize])
}

/// `J_n(x)` for signed order, using `J_{-n} = (-1)^n J_n`.
pub fn bessel_j_signed(n: i32, x: f64) -> Result<f64> {
    let v = bessel_j(n.unsigned_abs(), x)?;
    Ok(if n < 0 && n % 2 != 0 { -v } else { v })
}
