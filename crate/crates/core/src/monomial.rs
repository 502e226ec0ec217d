//! Monomials on the reference simplex and their exact integrals.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};

/// All exponent tuples of total degree `<= degree` in `dim` variables
/// (unused trailing entries are zero).
pub fn exponents(dim: usize, degree: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for total in 0..=degree {
        match dim {
            2 => {
                for i in (0..=total).rev() {
                    out.push([i, total - i, 0]);
                }
            }
            3 => {
                for i in (0..=total).rev() {
                    for j in (0..=total - i).rev() {
                        out.push([i, j, total - i - j]);
                    }
                }
            }
            _ => panic!("unsupported dimension {dim}"),
        }
    }
    out
}

pub fn eval(e: [usize; 3], x: [f64; 3]) -> f64 {
    x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32)
}

/// Derivative of `x^e` with respect to coordinate `m`.
pub fn eval_derivative(e: [usize; 3], m: usize, x: [f64; 3]) -> f64 {
    if e[m] == 0 {
        return 0.0;
    }
    let mut d = e;
    d[m] -= 1;
    e[m] as f64 * eval(d, x)
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn binomial(n: usize, k: usize) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// `∫ x^e` over the unit simplex `{x >= 0, Σx <= 1}` (Dirichlet integral).
fn unit_simplex_integral(dim: usize, e: [usize; 3]) -> BigRational {
    let num: BigInt = e[..dim].iter().map(|&k| factorial(k)).product();
    let sum: usize = e[..dim].iter().sum();
    BigRational::new(num, factorial(sum + dim))
}

/// Exact integral of `ξ^e` over the reference simplex whose vertices are the
/// corners `-1`/`+1` of `[-1,1]^d` with `Σξ <= 2 - d`.
pub fn reference_integral_exact(dim: usize, e: [usize; 3]) -> BigRational {
    // ξ = 2x - 1 maps the unit simplex onto the reference simplex, dξ = 2^d dx.
    let expand = |k: usize| -> Vec<BigRational> {
        (0..=k)
            .map(|j| {
                let sign = if (k - j) % 2 == 0 { 1 } else { -1 };
                let c = binomial(k, j) * BigInt::from(2).pow(j as u32) * BigInt::from(sign);
                BigRational::from_integer(c)
            })
            .collect()
    };
    let c0 = expand(e[0]);
    let c1 = expand(e[1]);
    let c2 = if dim == 3 { expand(e[2]) } else { vec![BigRational::one()] };
    let mut total = BigRational::zero();
    for (i, a) in c0.iter().enumerate() {
        for (j, b) in c1.iter().enumerate() {
            for (k, c) in c2.iter().enumerate() {
                total += a * b * c * unit_simplex_integral(dim, [i, j, k]);
            }
        }
    }
    total * BigRational::from_integer(BigInt::from(2).pow(dim as u32))
}

pub fn reference_integral(dim: usize, e: [usize; 3]) -> f64 {
    reference_integral_exact(dim, e).to_f64().unwrap_or(f64::NAN)
}
