//! Standard normal distribution functions.
//!
//! `erfc` uses a positive-term power series below `x = 2.5` and a Lentz
//! continued fraction above it, which keeps absolute error near machine
//! precision and relative error small in the far tail. The inverse CDF
//! starts from Acklam's rational approximation (relative error about
//! 1.15e-9) and applies one Halley correction against `erfc`.

use std::f64::consts::{PI, SQRT_2};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SERIES_CUTOFF: f64 = 2.5;

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_CUTOFF {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        erf_series(x)
    } else {
        1.0 - erfc(x)
    }
}

// erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (2n+1)!!
fn erf_series(x: f64) -> f64 {
    let two_x2 = 2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0;
    loop {
        term *= two_x2 / (2.0 * k + 1.0);
        let next = sum + term;
        if next == sum {
            break;
        }
        sum = next;
        k += 1.0;
    }
    FRAC_2_SQRT_PI * (-x * x).exp() * sum
}

// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500 {
        let a = 0.5 * n as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (f * PI.sqrt())
}

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal upper tail `1 - cdf(x)`, computed without cancellation.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Inverse of the standard normal CDF. Returns `NaN` outside `[0, 1]`.
pub fn inverse_cdf(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    // Refine in whichever tail keeps the residual well conditioned.
    if p > 0.5 {
        return -inverse_cdf_lower(1.0 - p);
    }
    inverse_cdf_lower(p)
}

fn inverse_cdf_lower(p: f64) -> f64 {
    let x = acklam(p);
    let e = cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Upper-tail normal quantile: `z` with `sf(z) == tail`.
pub fn upper_quantile(tail: f64) -> f64 {
    -inverse_cdf(tail)
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn erfc_matches_reference() {
        // 30-digit reference values.
        let table = [
            (-5.0, 1.999_999_999_998_462_5),
            (-2.8125, 1.999_930_349_245_607_4),
            (-1.0, 1.842_700_792_949_714_9),
            (-0.3, 1.328_626_759_459_127_4),
            (0.0, 1.0),
            (0.001, 0.998_871_621_209_030_76),
            (0.5, 0.479_500_122_186_953_46),
            (1.0, 0.157_299_207_050_285_13),
            (1.5, 0.033_894_853_524_689_273),
            (2.0, 0.004_677_734_981_047_265_8),
            (2.49, 0.000_429_287_867_733_912_91),
            (2.5, 0.000_406_952_017_444_958_94),
            (2.51, 0.000_385_705_481_724_279_78),
            (3.0, 2.209_049_699_858_544_1e-5),
            (4.0, 1.541_725_790_028_001_9e-8),
            (6.0, 2.151_973_671_249_891_3e-17),
            (10.0, 2.088_487_583_762_544_8e-45),
            (20.0, 5.395_865_611_607_900_9e-176),
            (26.5, 2.210_907_664_263_734_3e-307),
        ];
        for (x, want) in table {
            let got = erfc(x);
            assert!((got - want).abs() <= 1e-15, "x={x}: {got} vs {want}");
            assert!(((got - want) / want).abs() <= 1e-12, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn erfc_is_continuous_at_branch_switch() {
        let below = erfc(SERIES_CUTOFF - 1e-12);
        let at = erfc(SERIES_CUTOFF);
        assert!(((below - at) / at).abs() < 1e-10);
    }

    #[test]
    fn erf_is_odd() {
        for x in [0.1, 0.7, 2.4, 2.6, 4.0] {
            assert_eq!(erf(-x), -erf(x));
        }
    }

    #[test]
    fn inverse_cdf_matches_reference() {
        let normal = Normal::standard();
        for &p in &[
            1e-300, 1e-100, 1e-12, 1e-6, 0.001, 0.01, 0.024, 0.025, 0.1, 0.3, 0.5, 0.7, 0.975,
            0.99, 0.999_999,
        ] {
            let got = inverse_cdf(p);
            let reference = normal.inverse_cdf(p);
            assert!(
                (got - reference).abs() <= 1e-9 * reference.abs().max(1.0),
                "p={p}: {got} vs {reference}"
            );
        }
    }

    #[test]
    fn upper_quantile_known_values() {
        assert!((upper_quantile(0.025) - 1.959_963_984_540_054_5).abs() < 1e-12);
        assert!((upper_quantile(0.005) - 2.575_829_303_548_901).abs() < 1e-12);
        assert_eq!(inverse_cdf(0.5), 0.0);
        assert!(inverse_cdf(-0.1).is_nan());
    }

    #[test]
    fn cdf_round_trip() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            assert!((cdf(inverse_cdf(p)) - p).abs() < 1e-14, "p={p}");
        }
    }
}
