//! Two-coin StableSwap invariant:
//! `Ann·(x+y) + D = Ann·D + D³/(4·x·y)` with `Ann = A·n^n`.
//!
//! Intermediate products are taken in `i128`; inputs up to about 10^12 are
//! safe, larger ones surface as [`ModelError::Overflow`].

use crate::kernel::ModelError;

pub const N_COINS: i128 = 2;
pub const MAX_ITERATIONS: usize = 255;

/// `A·n^n` for the two-coin pool.
pub fn ann(amp: i64) -> i128 {
    amp as i128 * N_COINS * N_COINS
}

fn mul(a: i128, b: i128) -> Result<i128, ModelError> {
    a.checked_mul(b).ok_or(ModelError::Overflow)
}

fn div(a: i128, b: i128) -> Result<i128, ModelError> {
    if b == 0 {
        return Err(ModelError::DivisionByZero);
    }
    Ok(a.div_euclid(b))
}

fn narrow(v: i128) -> Result<i64, ModelError> {
    i64::try_from(v).map_err(|_| ModelError::Overflow)
}

fn diverged(what: &str) -> ModelError {
    ModelError::Numeric(format!("{what} did not converge in {MAX_ITERATIONS} iterations"))
}

/// Invariant `D` of a balance pair. A pool with an empty side has `D = x + y`.
pub fn get_d(balances: [i64; 2], amp: i64) -> Result<i64, ModelError> {
    let [x, y] = balances.map(i128::from);
    if x < 0 || y < 0 {
        return Err(ModelError::Numeric("negative pool balance".into()));
    }
    let s = x + y;
    if x == 0 || y == 0 {
        return narrow(s);
    }
    let ann = ann(amp);
    let mut d = s;
    for _ in 0..MAX_ITERATIONS {
        let d_p = div(mul(mul(d, d)?, d)?, mul(N_COINS * N_COINS, mul(x, y)?)?)?;
        let prev = d;
        let num = mul(mul(ann, s)? + mul(N_COINS, d_p)?, d)?;
        let den = mul(ann - 1, d)? + mul(N_COINS + 1, d_p)?;
        d = div(num, den)?;
        if (d - prev).abs() <= 1 {
            return narrow(d);
        }
    }
    Err(diverged("get_D"))
}

/// Balance of the other coin when one coin's balance is `x` and the
/// invariant is `d`.
pub fn get_y_for(x: i64, d: i64, amp: i64) -> Result<i64, ModelError> {
    let (x, d) = (x as i128, d as i128);
    if x <= 0 || d < 0 {
        return Err(ModelError::Numeric("get_y needs a positive balance".into()));
    }
    if d == 0 {
        return Ok(0);
    }
    let ann = ann(amp);
    let c = div(mul(mul(d, d)?, d)?, mul(mul(N_COINS * N_COINS, x)?, ann)?)?;
    let b = x + div(d, ann)?;
    let mut y = d;
    for _ in 0..MAX_ITERATIONS {
        let prev = y;
        let den = 2 * y + b - d;
        if den <= 0 {
            return Err(ModelError::Numeric("get_y left the curve".into()));
        }
        y = div(mul(y, y)? + c, den)?;
        if (y - prev).abs() <= 1 {
            return narrow(y);
        }
    }
    Err(diverged("get_y"))
}

/// New balance of coin `j` after coin `i` moves to `x_new`.
pub fn get_y(i: usize, j: usize, x_new: i64, balances: [i64; 2], amp: i64) -> Result<i64, ModelError> {
    if i == j || i > 1 || j > 1 {
        return Err(ModelError::Numeric(format!("bad coin pair ({i}, {j})")));
    }
    let d = get_d(balances, amp)?;
    get_y_for(x_new, d, amp)
}

/// Balance of coin `i` that puts the pool on invariant `d`, the other coin fixed.
pub fn get_y_d(i: usize, balances: [i64; 2], d: i64, amp: i64) -> Result<i64, ModelError> {
    if i > 1 {
        return Err(ModelError::Numeric(format!("bad coin index {i}")));
    }
    get_y_for(balances[1 - i], d, amp)
}
