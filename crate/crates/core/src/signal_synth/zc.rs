use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub(crate) fn check_root(root: u32, len: u32) -> Result<()> {
    if len < 2 || root == 0 || root >= len {
        return Err(Error::param(format!(
            "Zadoff-Chu root must satisfy 0 < r < V (r={root}, V={len})"
        )));
    }
    if gcd(root as u64, len as u64) != 1 {
        return Err(Error::param(format!(
            "Zadoff-Chu root {root} is not coprime with length {len}"
        )));
    }
    Ok(())
}

/// Zadoff-Chu sequence `z_r(v) = exp(-j*pi*r*v*(v+1)/V)` for `v = 0..V`.
///
/// The phase index `r*v*(v+1)` is reduced modulo `2V` in integer arithmetic
/// so long sequences keep full precision.
pub fn gen_zc(root: u32, len: u32) -> Result<Vec<Complex64>> {
    check_root(root, len)?;
    let r = root as u64;
    let v_len = len as u64;
    let period = 2 * v_len;
    Ok((0..v_len)
        .map(|v| {
            let k = (r % period) * ((v * (v + 1)) % period) % period;
            let phase = -std::f64::consts::PI * k as f64 / v_len as f64;
            Complex64::from_polar(1.0, phase)
        })
        .collect())
}

/// Zero-order-hold upsampling: every input sample is repeated `factor` times.
pub fn upsample_zc(seq: &[Complex64], factor: usize) -> Result<Vec<Complex64>> {
    if factor == 0 {
        return Err(Error::param("upsampling factor must be at least 1"));
    }
    let mut out = Vec::with_capacity(seq.len() * factor);
    for &s in seq {
        out.extend(std::iter::repeat_n(s, factor));
    }
    Ok(out)
}

/// Generated and upsampled preamble for one candidate root.
pub fn zc_reference(root: u32, len: u32, factor: usize) -> Result<Vec<Complex64>> {
    upsample_zc(&gen_zc(root, len)?, factor)
}
