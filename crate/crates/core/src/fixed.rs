//! Two's-complement fixed-point numbers and the plaintext reference computations.
//!
//! Every secure computation in this crate is checked against the functions here:
//! [`trajectory_plain`] is the bit-exact definition of the trajectory unit vector that the
//! two-party circuit must reproduce, and [`in_bounds_plain`] is the range predicate proven in
//! zero knowledge.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Bitwidths exercised by the benchmark sweeps.
pub const SWEEP_BITWIDTHS: [u32; 6] = [8, 16, 32, 64, 100, 128];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FixedError {
    #[error("invalid fixed-point format k={k} f={f}: {reason}")]
    InvalidParams { k: u32, f: u32, reason: &'static str },
    #[error("value {0} is outside the representable range")]
    OutOfRange(String),
    #[error("fixed-point operands use different formats")]
    ParamMismatch,
    #[error("satellite and aircraft positions coincide")]
    Degenerate,
    #[error("cannot parse `{0}` as a decimal number")]
    Parse(String),
    #[error("invalid bounds: {0} minimum exceeds maximum")]
    InvalidBounds(char),
}

/// Fixed-point format: `k` total bits, `f` of them fractional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FpParams {
    k: u32,
    f: u32,
}

impl FpParams {
    pub fn new(k: u32, f: u32) -> Result<Self, FixedError> {
        if !(8..=128).contains(&k) {
            return Err(FixedError::InvalidParams { k, f, reason: "k must lie in 8..=128" });
        }
        if f + 3 > k {
            return Err(FixedError::InvalidParams { k, f, reason: "need k - f >= 3" });
        }
        Ok(Self { k, f })
    }

    /// The format used when only a bitwidth is given: `f = min(20, k / 2)`.
    pub fn for_bitwidth(k: u32) -> Result<Self, FixedError> {
        Self::new(k, (k / 2).min(20))
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn f(&self) -> u32 {
        self.f
    }

    /// Mask selecting the low `k` bits of a raw pattern.
    pub fn mask(&self) -> u128 {
        if self.k == 128 {
            u128::MAX
        } else {
            (1u128 << self.k) - 1
        }
    }

    pub fn min_raw(&self) -> i128 {
        if self.k == 128 {
            i128::MIN
        } else {
            -(1i128 << (self.k - 1))
        }
    }

    pub fn max_raw(&self) -> i128 {
        if self.k == 128 {
            i128::MAX
        } else {
            (1i128 << (self.k - 1)) - 1
        }
    }
}

impl Default for FpParams {
    fn default() -> Self {
        Self { k: 64, f: 20 }
    }
}

impl fmt::Display for FpParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}.{}", self.k - self.f, self.f)
    }
}

/// A `k`-bit two's-complement integer interpreted as `raw / 2^f`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPoint {
    raw: u128,
    params: FpParams,
}

impl FixedPoint {
    /// Wraps a raw bit pattern; bits above `k` are discarded.
    pub fn from_bits(bits: u128, params: FpParams) -> Self {
        Self { raw: bits & params.mask(), params }
    }

    /// Builds a value from its signed raw integer, rejecting integers that need more than `k` bits.
    pub fn from_raw(raw: i128, params: FpParams) -> Result<Self, FixedError> {
        if raw < params.min_raw() || raw > params.max_raw() {
            return Err(FixedError::OutOfRange(raw.to_string()));
        }
        Ok(Self::from_bits(raw as u128, params))
    }

    pub fn zero(params: FpParams) -> Self {
        Self { raw: 0, params }
    }

    /// The raw `k`-bit pattern.
    pub fn bits(&self) -> u128 {
        self.raw
    }

    /// The raw pattern sign-extended to a signed integer.
    pub fn raw(&self) -> i128 {
        let k = self.params.k;
        if k == 128 {
            self.raw as i128
        } else {
            let shift = 128 - k;
            ((self.raw << shift) as i128) >> shift
        }
    }

    pub fn params(&self) -> FpParams {
        self.params
    }

    /// The bits of the raw pattern, least significant first.
    pub fn to_bits_lsb(&self) -> Vec<bool> {
        (0..self.params.k).map(|i| (self.raw >> i) & 1 == 1).collect()
    }

    pub fn from_bits_lsb(bits: &[bool], params: FpParams) -> Self {
        let raw = bits
            .iter()
            .take(params.k as usize)
            .enumerate()
            .fold(0u128, |acc, (i, &b)| acc | ((b as u128) << i));
        Self::from_bits(raw, params)
    }

    /// Approximate value as a float; exact only while the raw integer fits in 53 bits.
    pub fn to_f64(&self) -> f64 {
        self.raw() as f64 / 2f64.powi(self.params.f as i32)
    }

    /// Exact decimal rendering of `raw / 2^f`.
    pub fn to_decimal(&self) -> String {
        let raw = BigInt::from(self.raw());
        let f = self.params.f;
        let (sign, mag) = (raw.sign(), raw.magnitude().clone());
        let int_part = &mag >> f;
        let frac_mask = (BigUint::one() << f) - 1u32;
        let frac = &mag & &frac_mask;
        let mut out = String::new();
        if sign == Sign::Minus {
            out.push('-');
        }
        out.push_str(&int_part.to_string());
        if !frac.is_zero() {
            // frac / 2^f == frac * 5^f / 10^f
            let digits = (frac * BigUint::from(5u32).pow(f)).to_string();
            let padded = format!("{:0>width$}", digits, width = f as usize);
            out.push('.');
            out.push_str(padded.trim_end_matches('0'));
        }
        out
    }
}

impl fmt::Debug for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.to_decimal(), self.params)
    }
}

impl fmt::Display for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

fn check_int_range(scaled_floor: &BigInt, params: FpParams, shown: &dyn fmt::Display) -> Result<FixedPoint, FixedError> {
    // |value| < 2^(k-f-1)  <=>  raw fits in k bits
    let raw = scaled_floor
        .to_i128()
        .filter(|r| *r >= params.min_raw() && *r <= params.max_raw())
        .ok_or_else(|| FixedError::OutOfRange(shown.to_string()))?;
    Ok(FixedPoint::from_bits(raw as u128, params))
}

/// Encodes a real value as `floor(value * 2^f)` in `k`-bit two's complement.
pub fn encode(value: f64, params: FpParams) -> Result<FixedPoint, FixedError> {
    if !value.is_finite() {
        return Err(FixedError::OutOfRange(value.to_string()));
    }
    // Scaling by a power of two is exact in binary floating point, as is floor.
    let scaled = (value * 2f64.powi(params.f as i32)).floor();
    let limit = 2f64.powi(params.k as i32 - 1);
    if scaled < -limit || scaled >= limit {
        return Err(FixedError::OutOfRange(value.to_string()));
    }
    let raw = BigInt::from(scaled as i128);
    check_int_range(&raw, params, &value)
}

/// Encodes a decimal string exactly, without going through floating point.
pub fn encode_decimal(text: &str, params: FpParams) -> Result<FixedPoint, FixedError> {
    let s = text.trim();
    let err = || FixedError::Parse(text.to_string());
    let (negative, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => (&body[..pos], body[pos + 1..].parse::<i32>().map_err(|_| err())?),
        None => (body, 0),
    };
    let (int_digits, frac_digits) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_digits.is_empty() && frac_digits.is_empty() {
        return Err(err());
    }
    if !int_digits.bytes().chain(frac_digits.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int_digits}{frac_digits}");
    let mut numer = if digits.is_empty() { BigInt::zero() } else { digits.parse::<BigInt>().map_err(|_| err())? };
    if negative {
        numer = -numer;
    }
    let dec_exp = exponent - frac_digits.len() as i32;
    if dec_exp.unsigned_abs() > 4000 {
        return Err(FixedError::OutOfRange(text.to_string()));
    }
    let scaled = numer << params.f as usize;
    let ten = BigInt::from(10u32);
    let floor = if dec_exp >= 0 {
        scaled * ten.pow(dec_exp as u32)
    } else {
        scaled.div_floor(&ten.pow(dec_exp.unsigned_abs()))
    };
    check_int_range(&floor, params, &text)
}

/// Integer square root: the largest `r` with `r * r <= n`.
pub fn isqrt(n: &BigUint) -> BigUint {
    if n.is_zero() {
        return BigUint::zero();
    }
    // Newton iteration from an over-estimate decreases monotonically to floor(sqrt(n)).
    let mut x = BigUint::one() << n.bits().div_ceil(2);
    loop {
        let y = (&x + n / &x) >> 1;
        if y >= x {
            return x;
        }
        x = y;
    }
}

pub fn isqrt_u128(n: u128) -> u128 {
    isqrt(&BigUint::from(n)).to_u128().expect("sqrt of a u128 fits in u64")
}

fn same_params(values: &[FixedPoint]) -> Result<FpParams, FixedError> {
    let params = values[0].params;
    if values.iter().any(|v| v.params != params) {
        return Err(FixedError::ParamMismatch);
    }
    Ok(params)
}

/// Unit vector from `sat` towards `air`.
///
/// Widths follow the circuit exactly: differences are exact, the squared norm is exact, the
/// magnitude is `isqrt` of the squared norm on raw integers, and each component is
/// `(v_i * 2^f) / m` truncated toward zero.
pub fn trajectory_plain(sat: &[FixedPoint; 3], air: &[FixedPoint; 3]) -> Result<[FixedPoint; 3], FixedError> {
    let all: Vec<FixedPoint> = sat.iter().chain(air.iter()).copied().collect();
    let params = same_params(&all)?;
    let v: Vec<BigInt> = (0..3).map(|i| BigInt::from(air[i].raw()) - BigInt::from(sat[i].raw())).collect();
    let norm_sq: BigUint = v.iter().map(|c| c.magnitude() * c.magnitude()).sum();
    let m = isqrt(&norm_sq);
    if m.is_zero() {
        return Err(FixedError::Degenerate);
    }
    let mut out = [FixedPoint::zero(params); 3];
    for (slot, comp) in out.iter_mut().zip(&v) {
        let q = (comp.magnitude() << params.f as usize) / &m;
        let signed = if comp.is_negative() { -BigInt::from(q) } else { BigInt::from(q) };
        *slot = check_int_range(&signed, params, &signed)?;
    }
    Ok(out)
}

/// Axis-aligned box `[min, max]` per coordinate, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bounds {
    pub x_min: FixedPoint,
    pub x_max: FixedPoint,
    pub y_min: FixedPoint,
    pub y_max: FixedPoint,
    pub z_min: FixedPoint,
    pub z_max: FixedPoint,
}

impl Bounds {
    pub fn new(x: (FixedPoint, FixedPoint), y: (FixedPoint, FixedPoint), z: (FixedPoint, FixedPoint)) -> Result<Self, FixedError> {
        let b = Self { x_min: x.0, x_max: x.1, y_min: y.0, y_max: y.1, z_min: z.0, z_max: z.1 };
        b.validate()?;
        Ok(b)
    }

    /// The same interval on every axis.
    pub fn cube(min: FixedPoint, max: FixedPoint) -> Result<Self, FixedError> {
        Self::new((min, max), (min, max), (min, max))
    }

    pub fn validate(&self) -> Result<(), FixedError> {
        same_params(&self.as_array())?;
        for (axis, (lo, hi)) in ['x', 'y', 'z'].into_iter().zip(self.pairs()) {
            if lo.raw() > hi.raw() {
                return Err(FixedError::InvalidBounds(axis));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> FpParams {
        self.x_min.params
    }

    /// `[x_min, x_max, y_min, y_max, z_min, z_max]`
    pub fn as_array(&self) -> [FixedPoint; 6] {
        [self.x_min, self.x_max, self.y_min, self.y_max, self.z_min, self.z_max]
    }

    pub fn from_array(v: [FixedPoint; 6]) -> Result<Self, FixedError> {
        Self::new((v[0], v[1]), (v[2], v[3]), (v[4], v[5]))
    }

    fn pairs(&self) -> [(FixedPoint, FixedPoint); 3] {
        [(self.x_min, self.x_max), (self.y_min, self.y_max), (self.z_min, self.z_max)]
    }
}

/// `1` iff every coordinate lies within its inclusive interval (signed comparison).
pub fn in_bounds_plain(loc: &[FixedPoint; 3], bounds: &Bounds) -> Result<bool, FixedError> {
    let mut all = loc.to_vec();
    all.extend_from_slice(&bounds.as_array());
    same_params(&all)?;
    Ok(loc
        .iter()
        .zip(bounds.pairs())
        .all(|(c, (lo, hi))| c.raw() >= lo.raw() && c.raw() <= hi.raw()))
}

/// One timestamped point of a flight path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathPoint {
    pub t_ms: u64,
    pub pos: [FixedPoint; 3],
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("flight path line {line}: {message}")]
pub struct PathError {
    pub line: usize,
    pub message: String,
}

/// Parses `t_ms,x,y,z` lines. Blank lines, `#` comments and a `t_ms,...` header are skipped.
/// Timestamps must be nondecreasing.
pub fn parse_flight_path(text: &str, params: FpParams) -> Result<Vec<PathPoint>, PathError> {
    let mut points: Vec<PathPoint> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("t_ms") {
            continue;
        }
        let fail = |message: String| PathError { line, message };
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(fail(format!("expected 4 fields, found {}", fields.len())));
        }
        let t_ms = fields[0].parse::<u64>().map_err(|_| fail(format!("bad timestamp `{}`", fields[0])))?;
        let mut pos = [FixedPoint::zero(params); 3];
        for (slot, text) in pos.iter_mut().zip(&fields[1..]) {
            *slot = encode_decimal(text, params).map_err(|e| fail(e.to_string()))?;
        }
        if let Some(prev) = points.last() {
            if t_ms < prev.t_ms {
                return Err(fail("timestamps must be nondecreasing".into()));
            }
        }
        points.push(PathPoint { t_ms, pos });
    }
    if points.is_empty() {
        return Err(PathError { line: 0, message: "no points".into() });
    }
    Ok(points)
}

/// Position at `t_ms`: the latest point not after `t_ms`, or the first point before the path starts.
pub fn position_at(path: &[PathPoint], t_ms: u64) -> [FixedPoint; 3] {
    let idx = path.partition_point(|p| p.t_ms <= t_ms);
    path[idx.saturating_sub(1)].pos
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(k: u32, f: u32) -> FpParams {
        FpParams::new(k, f).unwrap()
    }

    fn fx(v: f64, params: FpParams) -> FixedPoint {
        encode(v, params).unwrap()
    }

    fn v3(a: f64, b: f64, c: f64, params: FpParams) -> [FixedPoint; 3] {
        [fx(a, params), fx(b, params), fx(c, params)]
    }

    #[test]
    fn params_validation() {
        assert!(FpParams::new(7, 0).is_err());
        assert!(FpParams::new(129, 0).is_err());
        assert!(FpParams::new(16, 14).is_err());
        assert!(FpParams::new(16, 13).is_ok());
        assert_eq!(FpParams::for_bitwidth(8).unwrap().f(), 4);
        assert_eq!(FpParams::for_bitwidth(64).unwrap(), FpParams::default());
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode(1.5, p(16, 4)).unwrap().bits(), 24);
        assert_eq!(encode(0.0, p(16, 4)).unwrap().bits(), 0);
        assert_eq!(encode(0.0, p(128, 20)).unwrap().bits(), 0);
        assert_eq!(encode(-2.25, p(16, 8)).unwrap().bits(), 64960);
    }

    #[test]
    fn encode_range_errors() {
        // k=16, f=8: |value| < 2^7
        assert!(encode(127.99, p(16, 8)).is_ok());
        assert!(matches!(encode(128.0, p(16, 8)), Err(FixedError::OutOfRange(_))));
        assert!(encode(-128.0, p(16, 8)).is_ok());
        assert!(encode(-128.5, p(16, 8)).is_err());
        assert!(encode(f64::NAN, p(16, 8)).is_err());
    }

    #[test]
    fn encode_floors_toward_negative_infinity() {
        assert_eq!(encode(-0.001, p(16, 4)).unwrap().raw(), -1);
        assert_eq!(encode(0.001, p(16, 4)).unwrap().raw(), 0);
        assert_eq!(encode_decimal("-0.001", p(16, 4)).unwrap().raw(), -1);
    }

    #[test]
    fn decimal_parsing() {
        let params = p(64, 20);
        for s in ["1.5", "-2.25", "0", "123456.75", "1e3", "-3.5E-1", ".5"] {
            let exact = encode_decimal(s, params).unwrap();
            let float = encode(s.parse::<f64>().unwrap(), params).unwrap();
            assert_eq!(exact, float, "{s}");
        }
        assert!(encode_decimal("abc", params).is_err());
        assert!(encode_decimal("1.2.3", params).is_err());
        assert!(encode_decimal("", params).is_err());
        assert!(encode_decimal("99999999999999999999", params).is_err());
    }

    #[test]
    fn roundtrip_exhaustive_small_widths() {
        for (k, f) in [(8, 0), (8, 5), (12, 6), (16, 8)] {
            let params = p(k, f);
            for bits in 0..(1u128 << k) {
                let x = FixedPoint::from_bits(bits, params);
                assert_eq!(encode_decimal(&x.to_decimal(), params).unwrap(), x);
            }
        }
    }

    #[test]
    fn isqrt_examples() {
        assert_eq!(isqrt_u128(0), 0);
        assert_eq!(isqrt_u128(16), 4);
        assert_eq!(isqrt_u128(255), 15);
        assert_eq!(isqrt_u128(u128::MAX), u64::MAX as u128);
    }

    #[test]
    fn isqrt_exhaustive_16_bit() {
        for n in 0u128..(1 << 16) {
            let r = isqrt_u128(n);
            assert!(r * r <= n && n < (r + 1) * (r + 1), "n={n}");
        }
    }

    #[test]
    fn trajectory_examples() {
        let params = p(64, 16);
        let u = trajectory_plain(&v3(0., 0., 0., params), &v3(0., 0., 5., params)).unwrap();
        assert_eq!(u.map(|c| c.raw()), [0, 0, 65536]);

        let u = trajectory_plain(&v3(1., 1., 1., params), &v3(4., 5., 1., params)).unwrap();
        assert_eq!(u.map(|c| c.raw()), [39321, 52428, 0]);

        let u = trajectory_plain(&v3(2., 0., 0., params), &v3(0., 0., 0., params)).unwrap();
        assert_eq!(u.map(|c| c.raw()), [-65536, 0, 0]);
    }

    #[test]
    fn trajectory_truncates_toward_zero() {
        let params = p(64, 16);
        let u = trajectory_plain(&v3(4., 5., 1., params), &v3(1., 1., 1., params)).unwrap();
        assert_eq!(u.map(|c| c.raw()), [-39321, -52428, 0]);
    }

    #[test]
    fn trajectory_degenerate_and_mismatch() {
        let params = p(32, 8);
        let a = v3(1., 2., 3., params);
        assert_eq!(trajectory_plain(&a, &a), Err(FixedError::Degenerate));
        let b = v3(1., 2., 3., p(32, 9));
        assert_eq!(trajectory_plain(&a, &b), Err(FixedError::ParamMismatch));
    }

    #[test]
    fn trajectory_extreme_corners_k128() {
        let params = p(128, 20);
        let lo = FixedPoint::from_raw(params.min_raw(), params).unwrap();
        let hi = FixedPoint::from_raw(params.max_raw(), params).unwrap();
        let u = trajectory_plain(&[lo, lo, lo], &[hi, hi, hi]).unwrap();
        // components are equal and close to 1/sqrt(3)
        assert_eq!(u[0], u[1]);
        let approx = u[0].to_f64();
        assert!((approx - 1.0 / 3f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn in_bounds_examples() {
        let params = p(16, 4);
        let b = Bounds::cube(fx(0., params), fx(10., params)).unwrap();
        assert!(in_bounds_plain(&v3(5., 5., 5., params), &b).unwrap());
        assert!(!in_bounds_plain(&v3(11., 5., 5., params), &b).unwrap());
        assert!(in_bounds_plain(&v3(10., 0., 10., params), &b).unwrap());
        let other = v3(5., 5., 5., p(16, 5));
        assert_eq!(in_bounds_plain(&other, &b), Err(FixedError::ParamMismatch));
    }

    #[test]
    fn invalid_bounds_rejected() {
        let params = p(16, 4);
        let err = Bounds::new(
            (fx(0., params), fx(1., params)),
            (fx(2., params), fx(1., params)),
            (fx(0., params), fx(1., params)),
        );
        assert_eq!(err, Err(FixedError::InvalidBounds('y')));
    }

    #[test]
    fn in_bounds_exhaustive_k8_matches_scalar_comparisons() {
        let params = p(8, 0);
        let all: Vec<FixedPoint> = (0..256u128).map(|b| FixedPoint::from_bits(b, params)).collect();
        // exhaustive over location x against a fixed set of y/z cases and all (min, max) pairs on x
        let y = fx(3., params);
        let z = fx(-3., params);
        for &lo in all.iter().step_by(5) {
            for &hi in all.iter().step_by(7) {
                if lo.raw() > hi.raw() {
                    continue;
                }
                let b = Bounds::new((lo, hi), (fx(-4., params), fx(4., params)), (fx(-3., params), fx(0., params))).unwrap();
                for &x in &all {
                    let expect = x.raw() >= lo.raw() && x.raw() <= hi.raw();
                    assert_eq!(in_bounds_plain(&[x, y, z], &b).unwrap(), expect);
                }
            }
        }
    }

    #[test]
    fn flight_path_parsing() {
        let params = p(32, 8);
        let text = "t_ms,x,y,z\n# comment\n0,1.0,2.0,3.0\n\n1000, 1.5 ,2,3\n2000,-1,-2,-3\n";
        let path = parse_flight_path(text, params).unwrap();
        assert_eq!(path.len(), 3);
        assert_eq!(path[1].pos[0].raw(), 384);
        assert_eq!(position_at(&path, 0).map(|c| c.raw()), [256, 512, 768]);
        assert_eq!(position_at(&path, 999), path[0].pos);
        assert_eq!(position_at(&path, 1000), path[1].pos);
        assert_eq!(position_at(&path, 99_999), path[2].pos);

        let err = parse_flight_path("0,1,2,3\n5,1,2\n", params).unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_flight_path("0,1,2,3\n10,1,x,3\n", params).unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_flight_path("10,1,2,3\n5,1,2,3\n", params).unwrap_err();
        assert_eq!(err.line, 2);
    }
}
