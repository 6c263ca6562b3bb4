//! Error function family: `erf`, `erfc` and the scaled `erfcx(x) = exp(x²)·erfc(x)`.
//!
//! Rational Chebyshev approximations of W. J. Cody ("Rational Chebyshev
//! approximations for the error function", Math. Comp. 1969; CALERF from
//! Netlib SPECFUN). Three intervals: `|x| <= 0.46875`, `0.46875 < |x| <= 4`
//! and `|x| > 4`. Relative error is a few ulp for normal results.
//!
//! Limits in binary64:
//! - `erfc(x)` is subnormal for `x > 26.55` and returns 0 for `x >= 26.543`
//!   (Cody's XBIG), so relative accuracy is only meaningful below that.
//! - `erfcx(x)` overflows for `x < -26.628` and returns `f64::INFINITY` there.

const THRESH: f64 = 0.46875;
const SQRPI: f64 = 5.641_895_835_477_562_869_5e-1; // 1/sqrt(pi)
const XNEG: f64 = -26.628;
const XSMALL: f64 = 1.11e-16;
const XBIG: f64 = 26.543;
const XHUGE: f64 = 6.71e7;
const XMAX: f64 = 2.53e307;

const A: [f64; 5] = [
    3.161_123_743_870_565_60e00,
    1.138_641_541_510_501_56e02,
    3.774_852_376_853_020_21e02,
    3.209_377_589_138_469_47e03,
    1.857_777_061_846_031_53e-1,
];
const B: [f64; 4] = [
    2.360_129_095_234_412_09e01,
    2.440_246_379_344_441_73e02,
    1.282_616_526_077_372_28e03,
    2.844_236_833_439_170_62e03,
];
const C: [f64; 9] = [
    5.641_884_969_886_700_89e-1,
    8.883_149_794_388_375_94e00,
    6.611_919_063_714_162_95e01,
    2.986_351_381_974_001_31e02,
    8.819_522_212_417_690_90e02,
    1.712_047_612_634_070_58e03,
    2.051_078_377_826_071_47e03,
    1.230_339_354_797_997_25e03,
    2.153_115_354_744_038_46e-8,
];
const D: [f64; 8] = [
    1.574_492_611_070_983_47e01,
    1.176_939_508_913_124_99e02,
    5.371_811_018_620_098_58e02,
    1.621_389_574_566_690_19e03,
    3.290_799_235_733_459_63e03,
    4.362_619_090_143_247_16e03,
    3.439_367_674_143_721_64e03,
    1.230_339_354_803_749_42e03,
];
const P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const Q: [f64; 5] = [
    2.568_520_192_289_822_42e00,
    1.872_952_849_923_460_47e00,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Erf,
    Erfc,
    Erfcx,
}

/// `exp(-y²)` evaluated as `exp(-ysq²)·exp(-del)` with `ysq` = y truncated to
/// 1/16, which keeps the argument split exact.
fn exp_neg_sq(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

fn calerf(x: f64, kind: Kind) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    let mut result;

    if y <= THRESH {
        let ysq = if y > XSMALL { y * y } else { 0.0 };
        let mut xnum = A[4] * ysq;
        let mut xden = ysq;
        for i in 0..3 {
            xnum = (xnum + A[i]) * ysq;
            xden = (xden + B[i]) * ysq;
        }
        result = x * (xnum + A[3]) / (xden + B[3]);
        if kind != Kind::Erf {
            result = 1.0 - result;
        }
        if kind == Kind::Erfcx {
            result *= ysq.exp();
        }
        return result;
    } else if y <= 4.0 {
        let mut xnum = C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + C[i]) * y;
            xden = (xden + D[i]) * y;
        }
        result = (xnum + C[7]) / (xden + D[7]);
        if kind != Kind::Erfcx {
            result *= exp_neg_sq(y);
        }
    } else {
        result = 0.0;
        let skip = y >= XBIG && (kind != Kind::Erfcx || y >= XMAX || y >= XHUGE);
        if y >= XBIG && kind == Kind::Erfcx && y >= XHUGE && y < XMAX {
            result = SQRPI / y;
        }
        if !skip {
            let ysq = 1.0 / (y * y);
            let mut xnum = P[5] * ysq;
            let mut xden = ysq;
            for i in 0..4 {
                xnum = (xnum + P[i]) * ysq;
                xden = (xden + Q[i]) * ysq;
            }
            result = ysq * (xnum + P[4]) / (xden + Q[4]);
            result = (SQRPI - result) / y;
            if kind != Kind::Erfcx {
                result *= exp_neg_sq(y);
            }
        }
    }

    match kind {
        Kind::Erf => {
            result = (0.5 - result) + 0.5;
            if x < 0.0 {
                -result
            } else {
                result
            }
        }
        Kind::Erfc => {
            if x < 0.0 {
                2.0 - result
            } else {
                result
            }
        }
        Kind::Erfcx => {
            if x < 0.0 {
                if x < XNEG {
                    f64::INFINITY
                } else {
                    let ysq = (x * 16.0).trunc() / 16.0;
                    let del = (x - ysq) * (x + ysq);
                    let e = (ysq * ysq).exp() * del.exp();
                    (e + e) - result
                }
            } else {
                result
            }
        }
    }
}

pub fn erf(x: f64) -> f64 {
    calerf(x, Kind::Erf)
}

pub fn erfc(x: f64) -> f64 {
    calerf(x, Kind::Erfc)
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    calerf(x, Kind::Erfcx)
}

/// `1 / (erfcx(v)·erfcx(-v))`, which equals `exp(-2v²) / (1 - erf²(v))`.
///
/// Evaluated through `a = |v|` as `exp(-a²) / (erfcx(a)·(2 - exp(-a²)·erfcx(a)))`
/// so no intermediate overflows; the result underflows smoothly to 0.
pub fn inverse_erfcx_product(v: f64) -> f64 {
    let a = v.abs();
    let g = exp_neg_sq(a);
    let ex = erfcx(a);
    g / (ex * (2.0 - g * ex))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_points() {
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erfc(0.0), 1.0);
        assert_eq!(erfcx(0.0), 1.0);
        assert_eq!(erfc(30.0), 0.0);
        assert_eq!(erfcx(-30.0), f64::INFINITY);
        assert!(erf(f64::NAN).is_nan());
        assert_eq!(erf(40.0), 1.0);
        assert_eq!(erf(-40.0), -1.0);
    }

    #[test]
    fn reflection_and_complement() {
        for i in -400..=400 {
            let x = i as f64 * 0.0137;
            assert!((erf(x) + erf(-x)).abs() <= 1e-16);
            assert!((erfc(x) + erfc(-x) - 2.0).abs() <= 4.0 * f64::EPSILON);
            assert!((erf(x) + erfc(x) - 1.0).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn inverse_product_at_zero_is_one() {
        assert!((inverse_erfcx_product(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(inverse_erfcx_product(40.0), 0.0);
        assert!(inverse_erfcx_product(-3.0) > 0.0);
    }
}
