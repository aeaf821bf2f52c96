//! Scalar helpers that work the same with and without `std`, plus a dense
//! matrix exponential.

use nalgebra::SMatrix;
use num_traits::Float;

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    Float::sqrt(x)
}
#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    Float::sin(x)
}
#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    Float::cos(x)
}
#[inline]
pub(crate) fn sinh(x: f64) -> f64 {
    Float::sinh(x)
}
#[inline]
pub(crate) fn cosh(x: f64) -> f64 {
    Float::cosh(x)
}
#[inline]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    Float::powi(x, n)
}
#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    Float::ln(x)
}
#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    Float::ceil(x)
}
#[inline]
pub(crate) fn round(x: f64) -> f64 {
    Float::round(x)
}
#[inline]
pub(crate) fn atan2(y: f64, x: f64) -> f64 {
    Float::atan2(y, x)
}
#[inline]
pub(crate) fn asin(x: f64) -> f64 {
    Float::asin(x)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn norm1<const N: usize>(a: &SMatrix<f64, N, N>) -> f64 {
    (0..N)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Diagonal similarity `d` (powers of two) so that `diag(d) a diag(d)^-1`
/// has comparable row and column norms.
fn balance<const N: usize>(a: &SMatrix<f64, N, N>) -> [f64; N] {
    let mut d = [1.0; N];
    let mut b = *a;
    for _ in 0..32 {
        let mut converged = true;
        for i in 0..N {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..N {
                if j != i {
                    c += b[(j, i)].abs();
                    r += b[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let s = c + r;
            let mut cc = c;
            let mut rr = r;
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..N {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
    d
}

/// Matrix exponential by balancing followed by scaling-and-squaring with a
/// degree-13 Padé approximant.
pub(crate) fn expm<const N: usize>(a: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let d = balance(a);
    let mut ab = *a;
    for i in 0..N {
        for j in 0..N {
            ab[(i, j)] *= d[j] / d[i];
        }
    }
    let norm = norm1(&ab);
    let s = if norm > THETA13 {
        ceil(ln(norm / THETA13) / core::f64::consts::LN_2).max(0.0) as i32
    } else {
        0
    };
    let scaled = ab / powi(2.0, s);
    let id = SMatrix::<f64, N, N>::identity();
    let a2 = scaled * scaled;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let b = &PADE13;
    let u_inner = a6 * (a6 * b[13] + a4 * b[11] + a2 * b[9]) + a6 * b[7] + a4 * b[5] + a2 * b[3] + id * b[1];
    let u = scaled * u_inner;
    let v = a6 * (a6 * b[12] + a4 * b[10] + a2 * b[8]) + a6 * b[6] + a4 * b[4] + a2 * b[2] + id * b[0];
    let den = nalgebra::DMatrix::from_column_slice(N, N, (v - u).as_slice());
    let num = nalgebra::DMatrix::from_column_slice(N, N, (v + u).as_slice());
    let sol = den.lu().solve(&num).expect("Padé denominator is nonsingular for scaled arguments");
    let mut r = SMatrix::<f64, N, N>::from_column_slice(sol.as_slice());
    for _ in 0..s {
        r = r * r;
    }
    for i in 0..N {
        for j in 0..N {
            r[(i, j)] *= d[i] / d[j];
        }
    }
    r
}
