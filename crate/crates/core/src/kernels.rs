//! Radial kernels and the monomial basis used for polynomial augmentation.

use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Ga,
    Mq,
    Imq,
    Iq,
    /// r^(2k+1)
    PhsOdd(u32),
    /// r^(2k) log r
    Tps(u32),
}

impl Family {
    pub fn is_smooth(self) -> bool {
        matches!(self, Family::Ga | Family::Mq | Family::Imq | Family::Iq)
    }

    /// Order of conditional positive definiteness (0 = strictly positive definite).
    pub fn conditional_order(self) -> u32 {
        match self {
            Family::Ga | Family::Imq | Family::Iq => 0,
            Family::Mq => 1,
            Family::PhsOdd(k) | Family::Tps(k) => k + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: Family,
    eps: f64,
}

impl KernelSpec {
    /// `eps` is ignored for the polyharmonic families.
    pub fn new(family: Family, eps: f64) -> Result<Self> {
        match family {
            Family::PhsOdd(0) => {
                return Err(Error::NotAdmissible("phs1 (Phi = r) has a nonzero derivative at the origin".into()))
            }
            Family::Tps(0) => return Err(Error::NotAdmissible("tps requires k >= 1".into())),
            _ => {}
        }
        if family.is_smooth() && !(eps.is_finite() && eps > 0.0) {
            return Err(Error::NotAdmissible(format!("shape parameter must be positive, got {eps}")));
        }
        let eps = if family.is_smooth() { eps } else { 1.0 };
        Ok(Self { family, eps })
    }

    pub fn ga(eps: f64) -> Result<Self> {
        Self::new(Family::Ga, eps)
    }
    pub fn mq(eps: f64) -> Result<Self> {
        Self::new(Family::Mq, eps)
    }
    pub fn imq(eps: f64) -> Result<Self> {
        Self::new(Family::Imq, eps)
    }
    pub fn iq(eps: f64) -> Result<Self> {
        Self::new(Family::Iq, eps)
    }

    /// Builds a kernel from a CLI name and the dimensionless product `eps_s`.
    pub fn from_name(name: &str, eps_s: f64, spacing: f64) -> Result<Self> {
        let family: Family = name.parse()?;
        Self::new(family, eps_s / spacing)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Same family with a different shape parameter.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.family, eps)
    }

    pub fn phi(&self, r: f64) -> Result<f64> {
        check_r(r)?;
        Ok(self.phi_unchecked(r))
    }

    pub fn phi_prime(&self, r: f64) -> Result<f64> {
        check_r(r)?;
        Ok(self.phi_prime_unchecked(r))
    }

    pub fn phi_second(&self, r: f64) -> Result<f64> {
        check_r(r)?;
        Ok(self.phi_second_unchecked(r))
    }

    pub(crate) fn phi_unchecked(&self, r: f64) -> f64 {
        let e2 = self.eps * self.eps;
        match self.family {
            Family::Ga => (-e2 * r * r).exp(),
            Family::Mq => (1.0 + e2 * r * r).sqrt(),
            Family::Imq => 1.0 / (1.0 + e2 * r * r).sqrt(),
            Family::Iq => 1.0 / (1.0 + e2 * r * r),
            Family::PhsOdd(k) => r.powi(2 * k as i32 + 1),
            Family::Tps(k) => {
                if r == 0.0 {
                    0.0
                } else {
                    r.powi(2 * k as i32) * r.ln()
                }
            }
        }
    }

    pub(crate) fn phi_prime_unchecked(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let e2 = self.eps * self.eps;
        let u = e2 * r * r;
        match self.family {
            Family::Ga => -2.0 * e2 * r * (-u).exp(),
            Family::Mq => e2 * r / (1.0 + u).sqrt(),
            Family::Imq => -e2 * r * (1.0 + u).powf(-1.5),
            Family::Iq => -2.0 * e2 * r / ((1.0 + u) * (1.0 + u)),
            Family::PhsOdd(k) => {
                let n = 2 * k as i32 + 1;
                n as f64 * r.powi(n - 1)
            }
            Family::Tps(k) => {
                let k = k as i32;
                r.powi(2 * k - 1) * (2.0 * k as f64 * r.ln() + 1.0)
            }
        }
    }

    pub(crate) fn phi_second_unchecked(&self, r: f64) -> f64 {
        let e2 = self.eps * self.eps;
        let u = e2 * r * r;
        match self.family {
            Family::Ga => (-2.0 * e2 + 4.0 * e2 * e2 * r * r) * (-u).exp(),
            Family::Mq => e2 / (1.0 + u).powf(1.5),
            Family::Imq => e2 * (2.0 * u - 1.0) * (1.0 + u).powf(-2.5),
            Family::Iq => 2.0 * e2 * (3.0 * u - 1.0) / (1.0 + u).powi(3),
            Family::PhsOdd(k) => {
                let n = 2 * k as i32 + 1;
                if n == 1 {
                    0.0
                } else {
                    (n * (n - 1)) as f64 * r.powi(n - 2)
                }
            }
            Family::Tps(k) => {
                let k = k as i32;
                if r == 0.0 {
                    if k == 1 {
                        f64::NEG_INFINITY
                    } else {
                        0.0
                    }
                } else {
                    let kf = k as f64;
                    r.powi(2 * k - 2) * (2.0 * kf * (2.0 * kf - 1.0) * r.ln() + 4.0 * kf - 1.0)
                }
            }
        }
    }

    /// Phi'(r)/r, continuous at r = 0 for the admitted families.
    fn phi_prime_over_r(&self, r: f64) -> f64 {
        if r == 0.0 {
            self.phi_second_unchecked(0.0)
        } else {
            self.phi_prime_unchecked(r) / r
        }
    }
}

fn check_r(r: f64) -> Result<()> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius must be finite and nonnegative, got {r}")))
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch(format!("points of dimension {} and {}", a.len(), b.len())));
    }
    Ok(())
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "ga" => return Ok(Family::Ga),
            "mq" => return Ok(Family::Mq),
            "imq" => return Ok(Family::Imq),
            "iq" => return Ok(Family::Iq),
            _ => {}
        }
        let bad = || Error::Parse(format!("unknown kernel '{s}'"));
        if let Some(n) = s.strip_prefix("phs") {
            let n: u32 = n.parse().map_err(|_| bad())?;
            if n % 2 == 0 {
                return Err(Error::Parse(format!("phs exponent must be odd, got {n}")));
            }
            return Ok(Family::PhsOdd((n - 1) / 2));
        }
        if let Some(k) = s.strip_prefix("tps") {
            let k: u32 = k.parse().map_err(|_| bad())?;
            return Ok(Family::Tps(k));
        }
        Err(bad())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Ga => write!(f, "ga"),
            Family::Mq => write!(f, "mq"),
            Family::Imq => write!(f, "imq"),
            Family::Iq => write!(f, "iq"),
            Family::PhsOdd(k) => write!(f, "phs{}", 2 * k + 1),
            Family::Tps(k) => write!(f, "tps{k}"),
        }
    }
}

/// Gradient of x -> Phi(|x - center|), evaluated at `x`.
pub fn rbf_gradient(kernel: &KernelSpec, center: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_dims(center, x)?;
    Ok(grad_unchecked(kernel, center, x))
}

pub(crate) fn grad_unchecked(kernel: &KernelSpec, center: &[f64], x: &[f64]) -> Vec<f64> {
    let r = dist(center, x);
    if r == 0.0 {
        return vec![0.0; x.len()];
    }
    let s = kernel.phi_prime_unchecked(r) / r;
    x.iter().zip(center).map(|(a, c)| s * (a - c)).collect()
}

pub fn rbf_laplacian(kernel: &KernelSpec, center: &[f64], x: &[f64]) -> Result<f64> {
    check_dims(center, x)?;
    let d = x.len() as f64;
    let r = dist(center, x);
    let v = if r == 0.0 {
        d * kernel.phi_second_unchecked(0.0)
    } else {
        kernel.phi_second_unchecked(r) + (d - 1.0) * kernel.phi_prime_unchecked(r) / r
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("Laplacian of {} at r = {r}", kernel.family)))
    }
}

/// Hessian of x -> Phi(|x - center|) as a row-major d*d array.
pub fn rbf_hessian(kernel: &KernelSpec, center: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_dims(center, x)?;
    let d = x.len();
    let r = dist(center, x);
    let mut h = vec![0.0; d * d];
    if r == 0.0 {
        let p2 = kernel.phi_second_unchecked(0.0);
        for i in 0..d {
            h[i * d + i] = p2;
        }
    } else {
        let p2 = kernel.phi_second_unchecked(r);
        let q = kernel.phi_prime_over_r(r);
        let e: Vec<f64> = x.iter().zip(center).map(|(a, c)| (a - c) / r).collect();
        for i in 0..d {
            for j in 0..d {
                let eij = e[i] * e[j];
                h[i * d + j] = p2 * eij + q * (if i == j { 1.0 } else { 0.0 } - eij);
            }
        }
    }
    if h.iter().all(|v| v.is_finite()) {
        Ok(h)
    } else {
        Err(Error::NonFinite(format!("Hessian of {} at r = {r}", kernel.family)))
    }
}

/// Monomials of total degree <= `degree` in `dim` variables, graded by degree and
/// lexicographically descending within a degree (1, x, y, x^2, xy, y^2, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyBasis {
    degree: Option<usize>,
    dim: usize,
    exps: Vec<Vec<u32>>,
}

impl PolyBasis {
    pub fn new(degree: usize, dim: usize) -> Self {
        let mut exps = Vec::new();
        for deg in 0..=degree {
            let mut cur = vec![0u32; dim];
            push_exponents(deg as u32, 0, &mut cur, &mut exps);
        }
        Self { degree: Some(degree), dim, exps }
    }

    /// No augmentation (q = 0).
    pub fn none(dim: usize) -> Self {
        Self { degree: None, dim, exps: Vec::new() }
    }

    pub fn degree(&self) -> Option<usize> {
        self.degree
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn size(&self) -> usize {
        self.exps.len()
    }
    pub fn exponents(&self, j: usize) -> Result<&[u32]> {
        self.exps.get(j).map(|v| v.as_slice()).ok_or(Error::IndexOutOfRange { index: j, size: self.exps.len() })
    }

    /// Value of the `j`-th monomial (0-based).
    pub fn eval(&self, j: usize, x: &[f64]) -> Result<f64> {
        let e = self.exponents(j)?;
        self.check_point(x)?;
        Ok(monomial(e, x))
    }

    pub fn gradient(&self, j: usize, x: &[f64]) -> Result<Vec<f64>> {
        let e = self.exponents(j)?;
        self.check_point(x)?;
        Ok(mono_grad(e, x))
    }

    pub fn laplacian(&self, j: usize, x: &[f64]) -> Result<f64> {
        let e = self.exponents(j)?;
        self.check_point(x)?;
        let mut s = 0.0;
        for k in 0..e.len() {
            if e[k] >= 2 {
                let mut ek = e.to_vec();
                ek[k] -= 2;
                s += (e[k] * (e[k] - 1)) as f64 * monomial(&ek, x);
            }
        }
        Ok(s)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::ShapeMismatch(format!("point of dimension {} for a {}-d basis", x.len(), self.dim)));
        }
        Ok(())
    }
}

fn push_exponents(left: u32, k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if k + 1 == cur.len() {
        cur[k] = left;
        out.push(cur.clone());
        return;
    }
    for e in (0..=left).rev() {
        cur[k] = e;
        push_exponents(left - e, k + 1, cur, out);
    }
    cur[k] = 0;
}

fn monomial(e: &[u32], x: &[f64]) -> f64 {
    e.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product()
}

fn mono_grad(e: &[u32], x: &[f64]) -> Vec<f64> {
    (0..e.len())
        .map(|k| {
            if e[k] == 0 {
                0.0
            } else {
                let mut ek = e.to_vec();
                ek[k] -= 1;
                e[k] as f64 * monomial(&ek, x)
            }
        })
        .collect()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}
