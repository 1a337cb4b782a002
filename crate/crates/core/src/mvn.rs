//! Normal distribution numerics: univariate and bivariate CDFs, and a
//! deterministic quadrature for standardized multivariate CDFs up to
//! dimension [`MAX_DIM`].
//!
//! Dimension 1 uses the complementary error function, dimension 2 the
//! Drezner-Wesolowsky/Genz Gauss-Legendre scheme, and dimensions 3 to 5
//! integrate Plackett's identity along a straight correlation path from a
//! block-diagonal matrix, recursing into lower dimensions at every node.
//! All rules use fixed nodes, so results are smooth functions of the limits.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

/// Largest dimension accepted by [`mvn_cdf_std`].
pub const MAX_DIM: usize = 5;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934;
const FRAC_1_2PI: f64 = 0.159_154_943_091_895_335_768_883_763_372_5;
const SQRT_2PI: f64 = 2.506_628_274_631_000_502_415_765_284_811;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate to a few ulps in both tails.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let legendre = |x: f64| -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let k = k as f64;
            let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        (p1, dp)
    };
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(x);
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite rule on `[0, 1]` for the correlation-path integral, graded
/// toward `t = 1` where the bivariate densities sharpen.
fn path_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let breaks = [0.0, 0.5, 0.8, 0.95, 1.0];
        let base = gauss_legendre(16);
        let mut rule = Vec::with_capacity(base.len() * (breaks.len() - 1));
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            for &(x, wt) in &base {
                rule.push((a + half * (x + 1.0), half * wt));
            }
        }
        rule
    })
}

// Gauss-Legendre half rules used by the bivariate scheme.
const QUAD_6: [(f64, f64); 3] = [
    (0.171_324_492_379_170_5, -0.932_469_514_203_152_2),
    (0.360_761_573_048_138_4, -0.661_209_386_466_264_7),
    (0.467_913_934_572_690_4, -0.238_619_186_083_197_0),
];
const QUAD_12: [(f64, f64); 6] = [
    (0.047_175_336_386_511_77, -0.981_560_634_246_719_1),
    (0.106_939_325_995_318_3, -0.904_117_256_370_475_0),
    (0.160_078_328_543_346_4, -0.769_902_674_194_305_0),
    (0.203_167_426_723_065_9, -0.587_317_954_286_617_1),
    (0.233_492_536_538_354_7, -0.367_831_498_998_180_2),
    (0.249_147_045_813_402_9, -0.125_233_408_511_469_2),
];
const QUAD_20: [(f64, f64); 10] = [
    (0.017_614_007_139_152_12, -0.993_128_599_185_094_9),
    (0.040_601_429_800_386_94, -0.963_971_927_277_913_8),
    (0.062_672_048_334_109_06, -0.912_234_428_251_325_9),
    (0.083_276_741_576_704_75, -0.839_116_971_822_218_8),
    (0.101_930_119_817_240_4, -0.746_331_906_460_150_8),
    (0.118_194_531_961_518_4, -0.636_053_680_726_515_0),
    (0.131_688_638_449_176_6, -0.510_867_001_950_827_1),
    (0.142_096_109_318_382_1, -0.373_706_088_715_419_6),
    (0.149_172_986_472_603_7, -0.227_785_851_141_645_1),
    (0.152_753_387_130_725_9, -0.076_526_521_133_497_33),
];

/// `P(X > dh, Y > dk)` for standard normals with correlation `r`.
fn bvnd(dh: f64, dk: f64, r: f64) -> f64 {
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let quad: &[(f64, f64)] = if r.abs() < 0.3 {
        &QUAD_6
    } else if r.abs() < 0.75 {
        &QUAD_12
    } else {
        &QUAD_20
    };

    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        if r != 0.0 {
            let hs = (h * h + k * k) / 2.0;
            let asr = 0.5 * r.asin();
            for &(w, x) in quad {
                for is in [-1.0, 1.0] {
                    let sn = (asr * (is * x + 1.0)).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr * FRAC_1_2PI;
        }
        return bvn + normal_cdf(-h) * normal_cdf(-k);
    }

    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -0.5 * (b_s / a_s + hk);
        if asr > -100.0 {
            bvn = a
                * asr.exp()
                * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if -hk < 100.0 {
            let b = b_s.sqrt();
            bvn -= (-0.5 * hk).exp()
                * SQRT_2PI
                * normal_cdf(-b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a /= 2.0;
        for &(w, x) in quad {
            for is in [-1.0, 1.0] {
                let xs = (a * (is * x + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let asr = -0.5 * (b_s / xs + hk);
                if asr > -100.0 {
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                            - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn *= -FRAC_1_2PI;
    }
    if r > 0.0 {
        bvn += normal_cdf(-h.max(k));
    } else {
        bvn = -bvn;
        if k > h {
            bvn += if h < 0.0 {
                normal_cdf(k) - normal_cdf(h)
            } else {
                normal_cdf(-h) - normal_cdf(-k)
            };
        }
    }
    bvn
}

/// `P(X <= x, Y <= y)` for standard normals with correlation `r`.
pub fn bvn_cdf(x: f64, y: f64, r: f64) -> f64 {
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return normal_cdf(y);
    }
    if y == f64::INFINITY {
        return normal_cdf(x);
    }
    if r >= 1.0 {
        return normal_cdf(x.min(y));
    }
    if r <= -1.0 {
        return (normal_cdf(x) + normal_cdf(y) - 1.0).max(0.0);
    }
    bvnd(-x, -y, r).clamp(0.0, 1.0)
}

/// Standard bivariate normal density.
#[inline]
pub fn bvn_pdf(x: f64, y: f64, r: f64) -> f64 {
    let om = (1.0 - r) * (1.0 + r);
    FRAC_1_2PI / om.sqrt() * (-(x * x - 2.0 * r * x * y + y * y) / (2.0 * om)).exp()
}

/// CDF of a standardized multivariate normal at upper limits `b`, with
/// correlation matrix `corr` stored row-major. Infinite limits are handled
/// exactly: `+inf` drops the coordinate and `-inf` gives zero.
///
/// Panics if the dimension after dropping `+inf` limits exceeds [`MAX_DIM`].
pub fn mvn_cdf_std(b: &[f64], corr: &[f64]) -> f64 {
    let d = b.len();
    debug_assert_eq!(corr.len(), d * d);
    if b.iter().any(|&v| v == f64::NEG_INFINITY) {
        return 0.0;
    }
    let keep: Vec<usize> = (0..d).filter(|&i| b[i] != f64::INFINITY).collect();
    match keep.len() {
        0 => 1.0,
        1 => normal_cdf(b[keep[0]]),
        2 => bvn_cdf(b[keep[0]], b[keep[1]], corr[keep[0] * d + keep[1]]),
        m => {
            assert!(m <= MAX_DIM, "multivariate normal CDF of dimension {m} is not supported");
            if m == d {
                plackett(b, corr)
            } else {
                let bb: Vec<f64> = keep.iter().map(|&i| b[i]).collect();
                let rr: Vec<f64> = keep
                    .iter()
                    .flat_map(|&i| keep.iter().map(move |&j| corr[i * d + j]))
                    .collect();
                plackett(&bb, &rr)
            }
        }
    }
}

fn plackett(b: &[f64], r: &[f64]) -> f64 {
    let d = b.len();
    let at = |i: usize, j: usize| r[i * d + j];

    // Pivot on the coordinate whose strongest correlation is weakest, so the
    // path integrand stays as flat as possible.
    let pivot = (0..d)
        .min_by(|&p, &q| {
            let mp = (0..d).filter(|&j| j != p).fold(0.0f64, |m, j| m.max(at(p, j).abs()));
            let mq = (0..d).filter(|&j| j != q).fold(0.0f64, |m, j| m.max(at(q, j).abs()));
            mp.total_cmp(&mq)
        })
        .expect("dimension is at least three");

    let rest: Vec<usize> = (0..d).filter(|&j| j != pivot).collect();
    let b_rest: Vec<f64> = rest.iter().map(|&j| b[j]).collect();
    let r_rest: Vec<f64> = rest
        .iter()
        .flat_map(|&i| rest.iter().map(move |&j| r[i * d + j]))
        .collect();
    let base = normal_cdf(b[pivot]) * mvn_cdf_std(&b_rest, &r_rest);

    let coupled: Vec<usize> = rest.iter().copied().filter(|&j| at(pivot, j) != 0.0).collect();
    if coupled.is_empty() {
        return base.clamp(0.0, 1.0);
    }

    let mut integral = 0.0;
    let mut others = Vec::with_capacity(d - 2);
    let mut lim = Vec::with_capacity(d - 2);
    let mut cov = Vec::with_capacity((d - 2) * (d - 2));
    for &(t, w) in path_rule() {
        let mut acc = 0.0;
        for &j in &coupled {
            let rij = t * at(pivot, j);
            let dens = bvn_pdf(b[pivot], b[j], rij);
            if dens == 0.0 {
                continue;
            }
            // condition the remaining coordinates on x_pivot = b_pivot, x_j = b_j
            others.clear();
            others.extend((0..d).filter(|&k| k != pivot && k != j));
            let om = (1.0 - rij) * (1.0 + rij);
            let coef = |k: usize| -> (f64, f64) {
                let (a1, a2) = (t * at(k, pivot), at(k, j));
                // rows of Sigma_kS * Sigma_SS^{-1}
                ((a1 - rij * a2) / om, (a2 - rij * a1) / om)
            };
            lim.clear();
            cov.clear();
            let m = others.len();
            let coefs: Vec<(f64, f64)> = others.iter().map(|&k| coef(k)).collect();
            for (ki, &k) in others.iter().enumerate() {
                let (c1, c2) = coefs[ki];
                for &l in &others {
                    cov.push(at(k, l) - (c1 * t * at(l, pivot) + c2 * at(l, j)));
                }
                lim.push((k, c1 * b[pivot] + c2 * b[j]));
            }
            let sds: Vec<f64> = (0..m).map(|ki| cov[ki * m + ki].max(0.0).sqrt()).collect();
            let mut bc = Vec::with_capacity(m);
            for (ki, &(k, mean)) in lim.iter().enumerate() {
                let sd = sds[ki];
                bc.push(if sd > 1e-150 {
                    (b[k] - mean) / sd
                } else if b[k] >= mean {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                });
            }
            let mut rc = vec![0.0; m * m];
            for ki in 0..m {
                for li in 0..m {
                    rc[ki * m + li] = if ki == li {
                        1.0
                    } else if sds[ki] > 1e-150 && sds[li] > 1e-150 {
                        (cov[ki * m + li] / (sds[ki] * sds[li])).clamp(-1.0, 1.0)
                    } else {
                        0.0
                    };
                }
            }
            acc += at(pivot, j) * dens * mvn_cdf_std(&bc, &rc);
        }
        integral += w * acc;
    }
    (base + integral).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(10);
        let total: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-14);
        // x^18 integrates to 2/19 and is exact for n = 10
        let m18: f64 = rule.iter().map(|&(x, w)| w * x.powi(18)).sum();
        assert!((m18 - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn univariate_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        assert!((normal_cdf(-8.0) - 6.220_960_574_271_785e-16).abs() < 1e-28);
        assert_eq!(normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(normal_cdf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn bivariate_orthant_closed_form() {
        for &r in &[-0.99f64, -0.95, -0.7, -0.3, 0.0, 0.2, 0.5, 0.8, 0.93, 0.999] {
            let expected = 0.25 + r.asin() / (2.0 * PI);
            assert!((bvn_cdf(0.0, 0.0, r) - expected).abs() < 1e-15, "r = {r}");
        }
    }

    #[test]
    fn bivariate_reflection_identity() {
        // Phi2(h, k; r) + Phi2(h, -k; -r) = Phi(h)
        for &(h, k) in &[(0.3, -1.2), (-2.0, 0.7), (1.5, 1.5), (-0.4, -3.1)] {
            for &r in &[-0.97, -0.6, -0.1, 0.4, 0.9, 0.96] {
                let lhs = bvn_cdf(h, k, r) + bvn_cdf(h, -k, -r);
                assert!((lhs - normal_cdf(h)).abs() < 1e-14, "h={h} k={k} r={r}");
            }
        }
    }

    #[test]
    fn trivariate_orthant_closed_form() {
        let cases: [[f64; 3]; 4] = [[0.3, -0.2, 0.5], [0.8, 0.6, 0.7], [-0.4, -0.3, 0.1], [0.0, 0.0, 0.0]];
        for c in cases {
            let r = [1.0, c[0], c[1], c[0], 1.0, c[2], c[1], c[2], 1.0];
            let expected = 0.125 + (c[0].asin() + c[1].asin() + c[2].asin()) / (4.0 * PI);
            let got = mvn_cdf_std(&[0.0; 3], &r);
            assert!((got - expected).abs() < 1e-13, "{c:?}: {got} vs {expected}");
        }
    }

    // One-factor representation for equicorrelated rho >= 0.
    fn equicorrelated(b: &[f64], rho: f64) -> f64 {
        let n = 20_000;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / n as f64;
        let f = |z: f64| {
            normal_pdf(z)
                * b.iter()
                    .map(|&bi| normal_cdf((bi - rho.sqrt() * z) / (1.0 - rho).sqrt()))
                    .product::<f64>()
        };
        let mut sum = f(lo) + f(hi);
        for i in 1..n {
            sum += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0
    }

    #[test]
    fn equicorrelated_matches_one_factor_integral() {
        let limits: [&[f64]; 3] = [&[0.4, -0.9, 1.3], &[0.1, 0.5, -0.3, 1.1], &[1.0, -0.2, 0.7, 0.0, 2.1]];
        for b in limits {
            let d = b.len();
            for &rho in &[0.1, 0.5, 0.85] {
                let r: Vec<f64> = (0..d * d)
                    .map(|ij| if ij / d == ij % d { 1.0 } else { rho })
                    .collect();
                let got = mvn_cdf_std(b, &r);
                let want = equicorrelated(b, rho);
                assert!((got - want).abs() < 1e-9, "d={d} rho={rho}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn infinite_limits_reduce_dimension() {
        let r = [1.0, 0.3, 0.2, 0.3, 1.0, -0.4, 0.2, -0.4, 1.0];
        let full = mvn_cdf_std(&[0.5, f64::INFINITY, -0.2], &r);
        assert!((full - bvn_cdf(0.5, -0.2, 0.2)).abs() < 1e-15);
        assert_eq!(mvn_cdf_std(&[0.5, f64::NEG_INFINITY, -0.2], &r), 0.0);
    }

    #[test]
    fn trivariate_is_smooth_in_limits() {
        let r = [1.0, 0.6, -0.3, 0.6, 1.0, 0.45, -0.3, 0.45, 1.0];
        let h = 1e-3;
        let f = |x: f64| mvn_cdf_std(&[x, 0.2, -0.1], &r);
        // second difference of a smooth function is O(h^2)
        for &x in &[-1.0, 0.0, 0.7] {
            let dd = f(x + h) - 2.0 * f(x) + f(x - h);
            assert!(dd.abs() < 1e-5, "x={x}: {dd}");
        }
    }
}
