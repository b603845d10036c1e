//! Bessel and hypergeometric series behind the port-correlation parameter.
//!
//! The series for `J_n(x)` and `₁F₂(a; b, c; z)` alternate with peak terms
//! that grow like `e^{2√|z|}`. At `W = 10` the peak is around 1e23 while the
//! sum is around 1e-2, so plain `f64` summation is useless. Every series is
//! therefore summed in binary fixed point on `BigInt`, with the number of
//! fraction bits chosen from a cheap log-magnitude pre-pass so that the
//! cancellation never reaches the 53 bits that are returned.

use core::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{Float, Signed, ToPrimitive, Zero};

/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 500;

/// Stop once `|term| < TERM_RATIO_STOP * |sum|`.
const TERM_RATIO_STOP: u64 = 10_000_000_000_000_000; // 1e16

/// Fraction bits kept beyond the magnitude of the largest term.
const GUARD_BITS: u32 = 128;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecFunError {
    #[error("argument outside the supported domain: {0}")]
    Domain(&'static str),
    #[error("series did not converge within {terms} terms (partial sum {partial_sum})")]
    NoConvergence { partial_sum: f64, terms: usize },
}

/// First-order Bessel function of the first kind.
pub fn bessel_j1(x: f64) -> Result<f64, SpecFunError> {
    bessel_jn(1, x)
}

/// `J_n(x)` for integer order `n ≥ 0`, by its power series.
pub fn bessel_jn(n: u32, x: f64) -> Result<f64, SpecFunError> {
    if !x.is_finite() {
        return Err(SpecFunError::Domain("Bessel argument must be finite"));
    }
    let bits = bessel_bits(n, x.abs());
    let half_x = Dyadic::from_f64(x).to_fixed(1, bits);
    let j = bessel_fixed(n, &half_x, bits)?;
    Ok(fixed_to_f64(&j, bits))
}

/// Generalized hypergeometric function `₁F₂(a; b, c; z)`.
pub fn hyp1f2(a: f64, b: f64, c: f64, z: f64) -> Result<f64, SpecFunError> {
    if ![a, b, c, z].iter().all(|v| v.is_finite()) {
        return Err(SpecFunError::Domain("hypergeometric parameters must be finite"));
    }
    if is_nonpositive_integer(b) || is_nonpositive_integer(c) {
        return Err(SpecFunError::Domain(
            "lower parameters must not be non-positive integers",
        ));
    }
    let params = Params::new(a, b, c);
    let bits = hyp_bits(&params, z.abs());
    let zf = Dyadic::from_f64(z).to_fixed(0, bits);
    let f = hyp1f2_fixed(&params, &zf, bits)?;
    Ok(fixed_to_f64(&f, bits))
}

/// Port correlation parameter of a fluid antenna spanning `w` wavelengths:
/// `μ = √2 · √( ₁F₂(½; 1, 3/2; −π²w²) − J₁(2πw)/(2πw) )`, clamped to `[0, 1]`.
///
/// `w = 0` returns the limiting value 1 (all ports coincide).
pub fn port_correlation_mu(w: f64) -> Result<f64, SpecFunError> {
    if !w.is_finite() || w < 0.0 {
        return Err(SpecFunError::Domain("antenna size must be finite and non-negative"));
    }
    if w == 0.0 {
        return Ok(1.0);
    }
    let params = Params::new(0.5, 1.0, 1.5);
    let pi_w = core::f64::consts::PI * w;
    let bits = hyp_bits(&params, pi_w * pi_w).max(bessel_bits(1, 2.0 * pi_w)) + 8;

    let pi = pi_fixed(bits);
    let w_fixed = Dyadic::from_f64(w).to_fixed(0, bits);
    let pi_w = mul_fixed(&pi, &w_fixed, bits);
    let z = -mul_fixed(&pi_w, &pi_w, bits);
    let f = hyp1f2_fixed(&params, &z, bits)?;

    // J₁(x)/x with x = 2πw, i.e. half-argument πw.
    let j1 = bessel_fixed(1, &pi_w, bits)?;
    let two_pi_w: BigInt = &pi_w << 1u32;
    let ratio = (j1 << bits) / &two_pi_w;

    let radicand = fixed_to_f64(&((f - ratio) << 1u32), bits);
    Ok(radicand.clamp(0.0, 1.0).sqrt())
}

fn is_nonpositive_integer(v: f64) -> bool {
    v <= 0.0 && v.fract() == 0.0
}

/// Exact value `m · 2^e` of a finite `f64`.
#[derive(Clone, Debug)]
struct Dyadic {
    m: BigInt,
    e: i32,
}

impl Dyadic {
    fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            return Self { m: BigInt::zero(), e: 0 };
        }
        let (mantissa, exponent, sign) = Float::integer_decode(x);
        let m = BigInt::from(mantissa) * i64::from(sign);
        Self { m, e: i32::from(exponent) }
    }

    fn from_int(k: i64) -> Self {
        Self { m: BigInt::from(k), e: 0 }
    }

    fn add(&self, other: &Self) -> Self {
        let e = self.e.min(other.e);
        let m = (&self.m << (self.e - e) as u32) + (&other.m << (other.e - e) as u32);
        Self { m, e }
    }

    fn mul(&self, other: &Self) -> Self {
        Self { m: &self.m * &other.m, e: self.e + other.e }
    }

    /// Fixed-point representation of `self · 2^-extra_shift` with `bits`
    /// fraction bits.
    fn to_fixed(&self, extra_shift: u32, bits: u32) -> BigInt {
        shift(&self.m, self.e + bits as i32 - extra_shift as i32)
    }
}

fn shift(v: &BigInt, by: i32) -> BigInt {
    match by.cmp(&0) {
        Ordering::Greater => v << by as u32,
        Ordering::Less => v >> (-by) as u32,
        Ordering::Equal => v.clone(),
    }
}

fn mul_fixed(a: &BigInt, b: &BigInt, bits: u32) -> BigInt {
    (a * b) >> bits
}

/// `t · num / den` for exact dyadic `num`, `den`.
fn scale_by_ratio(t: &BigInt, num: &Dyadic, den: &Dyadic) -> BigInt {
    let by = num.e - den.e;
    let (n, d) = if by >= 0 {
        (t * &num.m << by as u32, den.m.clone())
    } else {
        (t * &num.m, &den.m << (-by) as u32)
    };
    n / d
}

fn fixed_to_f64(v: &BigInt, bits: u32) -> f64 {
    let len = v.bits();
    let (top, dropped) = if len > 62 {
        let drop = (len - 62) as u32;
        (v >> drop, drop as i32)
    } else {
        (v.clone(), 0)
    };
    let top = top.to_i64().expect("62-bit value fits in i64") as f64;
    libm::ldexp(top, dropped - bits as i32)
}

/// π with `bits` fraction bits (Machin's formula).
fn pi_fixed(bits: u32) -> BigInt {
    let work = bits + 16;
    let atan_inv = |x: u32| -> BigInt {
        let x = BigInt::from(x);
        let x2 = &x * &x;
        let mut power = (BigInt::from(1) << work) / &x;
        let mut sum = power.clone();
        let mut k = 1u32;
        while !power.is_zero() {
            power /= &x2;
            let term = &power / BigInt::from(2 * k + 1);
            if k % 2 == 1 {
                sum -= term;
            } else {
                sum += term;
            }
            k += 1;
        }
        sum
    };
    let pi = atan_inv(5) * 16 - atan_inv(239) * 4;
    pi >> 16u32
}

fn terms_converged(term: &BigInt, sum: &BigInt) -> bool {
    term.abs() * TERM_RATIO_STOP < sum.abs()
}

#[derive(Clone, Debug)]
struct Params {
    a: Dyadic,
    b: Dyadic,
    c: Dyadic,
    af: f64,
    bf: f64,
    cf: f64,
}

impl Params {
    fn new(a: f64, b: f64, c: f64) -> Self {
        Self {
            a: Dyadic::from_f64(a),
            b: Dyadic::from_f64(b),
            c: Dyadic::from_f64(c),
            af: a,
            bf: b,
            cf: c,
        }
    }
}

/// Working precision for `₁F₂` at `|z| = abs_z`: enough fraction bits that
/// the largest term still carries `GUARD_BITS` beyond the unit.
fn hyp_bits(p: &Params, abs_z: f64) -> u32 {
    if abs_z == 0.0 {
        return GUARD_BITS;
    }
    let ln_z = abs_z.ln();
    let mut ln_term = 0.0f64;
    let mut ln_max = 0.0f64;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let num = (p.af + kf).abs();
        if num == 0.0 {
            break;
        }
        ln_term += num.ln() + ln_z - (p.bf + kf).abs().ln() - (p.cf + kf).abs().ln() - (kf + 1.0).ln();
        ln_max = ln_max.max(ln_term);
        if ln_term < ln_max - 120.0 {
            break;
        }
    }
    GUARD_BITS + (ln_max / core::f64::consts::LN_2).ceil().max(0.0) as u32 + 16
}

fn hyp1f2_fixed(p: &Params, z: &BigInt, bits: u32) -> Result<BigInt, SpecFunError> {
    let one = BigInt::from(1) << bits;
    let mut term = one.clone();
    let mut sum = one;
    for k in 0..MAX_TERMS {
        let kd = Dyadic::from_int(k as i64);
        let num = p.a.add(&kd);
        if num.m.is_zero() {
            return Ok(sum);
        }
        let den = p.b.add(&kd).mul(&p.c.add(&kd)).mul(&Dyadic::from_int(k as i64 + 1));
        term = scale_by_ratio(&mul_fixed(&term, z, bits), &num, &den);
        sum += &term;
        if term.is_zero() || terms_converged(&term, &sum) {
            return Ok(sum);
        }
    }
    Err(SpecFunError::NoConvergence {
        partial_sum: fixed_to_f64(&sum, bits),
        terms: MAX_TERMS,
    })
}

fn bessel_bits(n: u32, abs_x: f64) -> u32 {
    if abs_x == 0.0 {
        return GUARD_BITS;
    }
    let ln_h2 = 2.0 * (abs_x / 2.0).ln();
    let mut ln_term = n as f64 * (abs_x / 2.0).ln() - libm::lgamma(n as f64 + 1.0);
    let mut ln_max = ln_term.max(0.0);
    for k in 0..MAX_TERMS {
        ln_term += ln_h2 - ((k + 1) as f64).ln() - ((k + 1) as f64 + n as f64).ln();
        ln_max = ln_max.max(ln_term);
        if ln_term < ln_max - 120.0 {
            break;
        }
    }
    GUARD_BITS + (ln_max / core::f64::consts::LN_2).ceil().max(0.0) as u32 + 16
}

/// `J_n` from the half-argument `x/2` in fixed point.
fn bessel_fixed(n: u32, half_x: &BigInt, bits: u32) -> Result<BigInt, SpecFunError> {
    let mut term = BigInt::from(1) << bits;
    for k in 1..=n {
        term = mul_fixed(&term, half_x, bits) / BigInt::from(k);
    }
    if term.is_zero() {
        return Ok(term);
    }
    let h2 = mul_fixed(half_x, half_x, bits);
    let mut sum = term.clone();
    for k in 0..MAX_TERMS as u64 {
        let den = BigInt::from((k + 1) * (k + 1 + u64::from(n)));
        term = -(mul_fixed(&term, &h2, bits) / den);
        sum += &term;
        if term.is_zero() || terms_converged(&term, &sum) {
            return Ok(sum);
        }
    }
    Err(SpecFunError::NoConvergence {
        partial_sum: fixed_to_f64(&sum, bits),
        terms: MAX_TERMS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn j1_at_zero_and_small_argument() {
        assert_eq!(bessel_j1(0.0).unwrap(), 0.0);
        let x = 1e-8;
        assert!((bessel_j1(x).unwrap() / x - 0.5).abs() < 1e-15);
    }

    #[test]
    fn j1_against_reference_values() {
        // Extended-precision references (50-digit series evaluation).
        assert!((bessel_j1(PI).unwrap() - 0.284_615_343_179_752_757_3).abs() < 1e-15);
        assert!((bessel_j1(1.0).unwrap() - 0.440_050_585_744_933_516_0).abs() < 1e-15);
        assert!((bessel_j1(2.0).unwrap() - 0.576_724_807_756_873_387_2).abs() < 1e-15);
        assert!((bessel_j1(20.0 * PI).unwrap() - -0.070_753_593_901_804_094_31).abs() < 1e-13);
    }

    #[test]
    fn bessel_recurrence() {
        for x in [0.5, 1.0, 2.0, 5.0] {
            let lhs = bessel_jn(0, x).unwrap() + bessel_jn(2, x).unwrap();
            let rhs = 2.0 * bessel_j1(x).unwrap() / x;
            assert!((lhs - rhs).abs() < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn hyp1f2_special_values() {
        assert_eq!(hyp1f2(0.5, 1.0, 1.5, 0.0).unwrap(), 1.0);
        let f = hyp1f2(0.5, 1.0, 1.5, -1.0).unwrap();
        assert!(rel(f, 0.712_885_146_598_513_284_5) < 1e-14);
        let z = 1e-6;
        let f = hyp1f2(0.5, 1.0, 1.5, z).unwrap();
        assert!((f - (1.0 + z / 3.0)).abs() < 1e-12);
        let f = hyp1f2(0.5, 1.0, 1.5, -PI * PI * 100.0).unwrap();
        assert!(rel(f, 0.014_771_721_130_089_320_13) < 1e-12);
    }

    #[test]
    fn hyp1f2_rejects_bad_parameters() {
        assert!(matches!(hyp1f2(0.5, 0.0, 1.5, 1.0), Err(SpecFunError::Domain(_))));
        assert!(matches!(hyp1f2(0.5, 1.0, -2.0, 1.0), Err(SpecFunError::Domain(_))));
        assert!(matches!(hyp1f2(f64::NAN, 1.0, 1.5, 1.0), Err(SpecFunError::Domain(_))));
        assert!(matches!(bessel_j1(f64::INFINITY), Err(SpecFunError::Domain(_))));
    }

    #[test]
    fn hyp1f2_terminates_for_negative_integer_numerator() {
        // ₁F₂(-1; b, c; z) = 1 - z/(b c)
        let f = hyp1f2(-1.0, 2.0, 3.0, 6.0).unwrap();
        assert!((f - 0.0).abs() < 1e-15);
    }

    #[test]
    fn hyp1f2_reports_non_convergence() {
        match hyp1f2(0.5, 1.0, 1.5, -1e7) {
            Err(SpecFunError::NoConvergence { terms, .. }) => assert_eq!(terms, MAX_TERMS),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn mu_limits_and_reference_values() {
        assert_eq!(port_correlation_mu(0.0).unwrap(), 1.0);
        assert!((port_correlation_mu(1e-4).unwrap() - 1.0).abs() < 1e-6);
        let refs = [
            (0.1, 0.991_822_593_868_640_658_8),
            (0.25, 0.950_424_115_929_666_692_6),
            (0.5, 0.822_599_623_583_469_775_6),
            (1.0, 0.556_107_207_024_927_611_3),
            (2.0, 0.396_664_784_074_121_879_0),
            (5.0, 0.251_924_182_354_000_324_9),
            (10.0, 0.178_313_205_070_113_584_6),
        ];
        for (w, mu) in refs {
            assert!(rel(port_correlation_mu(w).unwrap(), mu) < 1e-12, "w = {w}");
        }
        assert!(port_correlation_mu(-0.1).is_err());
        assert!(port_correlation_mu(f64::NAN).is_err());
    }

    #[test]
    fn pi_digits() {
        let bits = 200;
        assert_eq!(fixed_to_f64(&pi_fixed(bits), bits), PI);
    }
}
