use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

/// Number of predictors with a nonzero coefficient surface.
pub const ACTIVE_PREDICTORS: usize = 10;

/// True coefficient surface `β_p(s)` for `p ∈ 1..=10`, `s ∈ [0,1]²`.
///
/// Case lists are evaluated top to bottom and the first matching case wins;
/// cases with contradictory conditions never fire.
#[allow(clippy::if_same_then_else, clippy::impossible_comparisons)]
pub fn true_beta(p: usize, s: [f64; 2]) -> Result<f64> {
    let [x, y] = s;
    let sum = x + y;
    let diff = x - y;
    let v = match p {
        1 => {
            if x < 0.5 && y < 0.5 {
                1.0
            } else if x >= 0.5 && y >= 0.5 {
                -1.0
            } else {
                0.0
            }
        }
        2 => {
            if x < 0.5 && y < 0.5 {
                1.0
            } else if (0.5..0.75).contains(&x) && (0.5..0.75).contains(&y) {
                0.5
            } else if x >= 0.75 && y >= 0.75 {
                0.0
            } else {
                -1.0
            }
        }
        3 => indicator(x <= 0.5),
        4 => indicator(y <= 0.5),
        5 => {
            if x <= 0.5 && y <= 0.5 {
                SQRT_2
            } else if x <= 0.5 {
                1.0
            } else {
                0.0
            }
        }
        6 => SQRT_2 * indicator(sum <= 0.5),
        7 => SQRT_2 * indicator(diff <= 0.5),
        8 => SQRT_2 * indicator(sum <= 1.5),
        9 => SQRT_2 * indicator(diff >= -0.5),
        10 => {
            let band = (0.5..=1.5).contains(&sum);
            if band && diff <= -0.5 {
                1.0
            } else if band && diff >= 0.5 {
                1.0
            } else if band && diff.abs() <= 0.5 {
                0.5
            } else if sum <= 0.5 && diff.abs() <= 0.5 {
                SQRT_2
            } else if sum <= 0.5 && sum >= 1.5 {
                -1.0
            } else {
                0.0
            }
        }
        _ => {
            return Err(Error::IndexOutOfRange(format!(
                "predictor {p} has no coefficient surface (valid: 1..=10)"
            )))
        }
    };
    Ok(v)
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}
