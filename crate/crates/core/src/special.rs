//! Standard normal distribution functions, generic over [`Scalar`].
//!
//! Everything is built on the scaled complementary error function
//! `erfcx(x) = exp(x²)·erfc(x)`, which keeps `log Φ(z)` and the inverse Mills
//! ratio finite far into the lower tail where `Φ(z)` itself underflows.

use crate::scalar::{lit, Scalar};

const SERIES_CUTOFF: f64 = 2.5;
const MAX_TERMS: usize = 500;

/// `exp(x²)·erfc(x)`.
pub fn erfcx<T: Scalar>(x: T) -> T {
    if x < T::zero() {
        // erfc(-x) = 2 - erfc(x)
        let two = lit::<T>(2.0);
        return two * (x * x).exp() - erfcx(-x);
    }
    if x < lit(SERIES_CUTOFF) {
        (x * x).exp() - scaled_erf_series(x)
    } else {
        erfcx_continued_fraction(x)
    }
}

/// `exp(x²)·erf(x)` via the positive-term series
/// `2/√π Σ 2ⁿ x^{2n+1} / (2n+1)!!`.
fn scaled_erf_series<T: Scalar>(x: T) -> T {
    let two_x2 = lit::<T>(2.0) * x * x;
    let mut term = x;
    let mut sum = x;
    for n in 1..MAX_TERMS {
        term *= two_x2 / T::from_usize_lossy(2 * n + 1);
        sum += term;
        if term <= sum * T::epsilon() {
            break;
        }
    }
    sum * T::FRAC_2_SQRT_PI()
}

/// Modified Lentz evaluation of
/// `erfcx(x) = 1/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`.
fn erfcx_continued_fraction<T: Scalar>(x: T) -> T {
    let tiny = T::min_positive_value().sqrt();
    let half = lit::<T>(0.5);
    let mut f = x;
    let mut c = x;
    let mut d = T::zero();
    for n in 1..MAX_TERMS {
        let a = T::from_usize_lossy(n) * half;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f *= delta;
        if (delta - T::one()).abs() <= T::epsilon() {
            break;
        }
    }
    T::FRAC_2_SQRT_PI() * half / f
}

pub fn erfc<T: Scalar>(x: T) -> T {
    erfcx(x) * (-(x * x)).exp()
}

/// Standard normal density.
pub fn norm_pdf<T: Scalar>(z: T) -> T {
    let inv_sqrt_2pi = lit::<T>(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(z * z) * lit(0.5)).exp()
}

/// Standard normal CDF.
pub fn norm_cdf<T: Scalar>(z: T) -> T {
    if z < T::zero() {
        lower_tail(z)
    } else {
        T::one() - lower_tail(-z)
    }
}

/// `1 − Φ(z)` without cancellation.
pub fn norm_sf<T: Scalar>(z: T) -> T {
    norm_cdf(-z)
}

// Φ(z) for z ≤ 0.
fn lower_tail<T: Scalar>(z: T) -> T {
    let x = -z * T::FRAC_1_SQRT_2();
    lit::<T>(0.5) * erfcx(x) * (-(x * x)).exp()
}

/// `ln Φ(z)`, finite for all finite `z`.
pub fn log_norm_cdf<T: Scalar>(z: T) -> T {
    if z < T::zero() {
        let x = -z * T::FRAC_1_SQRT_2();
        (lit::<T>(0.5) * erfcx(x)).ln() - x * x
    } else {
        (-lower_tail(-z)).ln_1p()
    }
}

/// Inverse Mills ratio `φ(z)/Φ(z)`.
pub fn mills<T: Scalar>(z: T) -> T {
    if z < T::zero() {
        let x = -z * T::FRAC_1_SQRT_2();
        lit::<T>(0.797_884_560_802_865_4) / erfcx(x)
    } else {
        norm_pdf(z) / norm_cdf(z)
    }
}

/// Mass of the standard normal on `(lo, hi)`, computed on whichever tail
/// avoids cancellation.
pub fn norm_interval<T: Scalar>(lo: T, hi: T) -> T {
    if hi <= lo {
        return T::zero();
    }
    if lo >= T::zero() {
        norm_sf(lo) - norm_sf(hi)
    } else {
        norm_cdf(hi) - norm_cdf(lo)
    }
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p<T: Scalar>(z: T) -> T {
    erfc(z.abs() * T::FRAC_1_SQRT_2())
}

/// Upper tail of χ²(1) at `stat`.
pub fn chi2_1_sf<T: Scalar>(stat: T) -> T {
    if stat <= T::zero() {
        return T::one();
    }
    erfc((stat * lit(0.5)).sqrt())
}

/// Standard normal quantile (Acklam's rational approximation refined by one
/// Halley step).
pub fn norm_quantile<T: Scalar>(p: T) -> T {
    let pf = p.as_f64();
    if !(pf > 0.0 && pf < 1.0) {
        return if pf == 0.0 {
            T::neg_infinity()
        } else if pf == 1.0 {
            T::infinity()
        } else {
            T::nan()
        };
    }
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
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    let p_low = 0.02425;
    let x = if pf < p_low {
        let q = (-2.0 * pf.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if pf <= 1.0 - p_low {
        let q = pf - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - pf).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = T::lit(x);
    let e = norm_cdf(x) - p;
    let u = e * (lit::<T>(2.0) * T::PI()).sqrt() * (x * x * lit(0.5)).exp();
    x - u / (T::one() + x * u * lit(0.5))
}
