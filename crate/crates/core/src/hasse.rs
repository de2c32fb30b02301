//! The Hasse polynomial H(Lambda): the explicit polynomial whose mod-p
//! nonvanishing at a fiber decides whether the distinguished root exists.
//! Coefficients are kept both as exact factorial reciprocals and reduced
//! mod p, so the theta-congruence can be certified without re-derivation.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::One;

use crate::error::{Error, Result};
use crate::family::FamilyData;
use crate::ff::{FieldContext, FqElem};
use crate::margins::MarginReport;
use crate::splitting::{self, theta_coefficients};

#[derive(Debug, Clone)]
pub struct HasseTerm {
    /// Product of the factorials u_1! ... u_N! (the exact coefficient is its
    /// reciprocal; every u_j <= p-1 so this is prime to p).
    pub den: BigUint,
    /// The reciprocal reduced mod p.
    pub mod_p: u64,
}

#[derive(Debug, Clone)]
pub struct HassePolynomial {
    pub p: u64,
    /// Exponent vector u (entries in [0, p-1]) -> coefficient.
    pub terms: BTreeMap<Vec<u32>, HasseTerm>,
}

impl HassePolynomial {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The target degree vector -(p-1) b = (p-1)(1,...,1,mu+1).
    pub fn target(fam: &FamilyData, p: u64) -> Vec<i64> {
        fam.b.iter().map(|&x| -(p as i64 - 1) * x).collect()
    }
}

fn term_for(p: u64, nu: &[u32]) -> HasseTerm {
    let mut den = BigUint::one();
    let mut den_mod = 1u64;
    for &e in nu {
        for f in 2..=e as u64 {
            den *= f;
            den_mod = den_mod * (f % p) % p;
        }
    }
    // reciprocal mod p by Fermat
    let mut inv = 1u64;
    let mut b = den_mod % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            inv = inv * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    HasseTerm { den, mod_p: inv }
}

/// Build H(Lambda) by direct pruned search over the exponent box.
pub fn hasse_polynomial(fam: &FamilyData, p: u64) -> HassePolynomial {
    if fam.num_monomials() as u64 * (p - 1) >= 36 {
        return hasse_polynomial_mitm(fam, p);
    }
    let target = HassePolynomial::target(fam, p);
    let mut terms = BTreeMap::new();
    splitting::visit_weight_exponents(fam, &target, |nu| {
        debug_assert!(nu.iter().all(|&e| e <= (p - 1) as u32));
        terms.insert(nu.to_vec(), term_for(p, nu));
    });
    HassePolynomial { p, terms }
}

/// Meet-in-the-middle enumeration: solutions over the first half of the
/// columns are bucketed by their partial degree vector and joined against
/// the complement of the second half. Used when the box [0,p-1]^N is big.
pub fn hasse_polynomial_mitm(fam: &FamilyData, p: u64) -> HassePolynomial {
    let target = HassePolynomial::target(fam, p);
    let n_mon = fam.num_monomials();
    let half = n_mon / 2;
    let n2 = fam.n + 2;

    // enumerate one side of the box, recording partial sums
    let enumerate_side = |cols: &[Vec<i64>]| -> Vec<(Vec<i64>, Vec<u32>)> {
        let mut out = Vec::new();
        let mut nu = vec![0u32; cols.len()];
        fn rec(
            j: usize,
            cols: &[Vec<i64>],
            p: u64,
            target: &[i64],
            sum: &mut Vec<i64>,
            nu: &mut Vec<u32>,
            out: &mut Vec<(Vec<i64>, Vec<u32>)>,
        ) {
            if j == cols.len() {
                out.push((sum.clone(), nu.clone()));
                return;
            }
            for e in 0..p as u32 {
                if e > 0 {
                    for (i, &c) in cols[j].iter().enumerate() {
                        sum[i] += c;
                    }
                }
                if sum.iter().zip(target).any(|(&s, &t)| s > t) {
                    // overshoot is monotone in e
                    for (i, &c) in cols[j].iter().enumerate() {
                        sum[i] -= c * e as i64;
                    }
                    nu[j] = 0;
                    return;
                }
                nu[j] = e;
                rec(j + 1, cols, p, target, sum, nu, out);
            }
            for (i, &c) in cols[j].iter().enumerate() {
                sum[i] -= c * (p as i64 - 1);
            }
            nu[j] = 0;
        }
        let mut sum = vec![0i64; n2];
        rec(0, cols, p, &target, &mut sum, &mut nu, &mut out);
        out
    };

    let left_cols: Vec<Vec<i64>> = fam.cols_plus[..half].to_vec();
    let right_cols: Vec<Vec<i64>> = fam.cols_plus[half..].to_vec();
    let mut left_index: BTreeMap<Vec<i64>, Vec<Vec<u32>>> = BTreeMap::new();
    for (sum, nu) in enumerate_side(&left_cols) {
        left_index.entry(sum).or_default().push(nu);
    }
    let mut terms = BTreeMap::new();
    for (sum, nu_right) in enumerate_side(&right_cols) {
        let complement: Vec<i64> = target.iter().zip(&sum).map(|(&t, &s)| t - s).collect();
        if let Some(lefts) = left_index.get(&complement) {
            for nu_left in lefts {
                let mut nu = nu_left.clone();
                nu.extend_from_slice(&nu_right);
                terms.insert(nu.clone(), term_for(p, &nu));
            }
        }
    }
    HassePolynomial { p, terms }
}

/// Evaluate the mod-p reduction at a fiber in (F_q^x)^N (fiber coordinates
/// in the family's canonical monomial order).
pub fn hasse_residue(
    fam: &FamilyData,
    field: &FieldContext,
    hp: &HassePolynomial,
    lam: &[FqElem],
) -> Result<(FqElem, bool)> {
    if lam.len() != fam.num_monomials() {
        return Err(Error::FiberLength { given: lam.len(), expected: fam.num_monomials() });
    }
    for (i, &l) in lam.iter().enumerate() {
        if l == 0 {
            return Err(Error::ZeroFiberCoordinate { index: i });
        }
    }
    let mut acc: FqElem = 0;
    for (nu, term) in &hp.terms {
        let mut prod = field.scalar(term.mod_p);
        for (j, &e) in nu.iter().enumerate() {
            if e > 0 {
                prod = field.mul(prod, field.pow(lam[j], e as u64));
            }
        }
        acc = field.add(acc, prod);
    }
    Ok((acc, acc != 0))
}

/// Count in-domain fibers over the full torus; refuses when the torus is
/// larger than `limit` points.
pub fn hasse_census(
    fam: &FamilyData,
    field: &FieldContext,
    hp: &HassePolynomial,
    limit: u64,
) -> Result<(u64, u64)> {
    let n_mon = fam.num_monomials() as u32;
    let torus = (field.q - 1).checked_pow(n_mon).filter(|&t| t <= limit);
    let Some(total) = torus else {
        return Err(Error::WorkBudget {
            needed: (field.q - 1).saturating_pow(n_mon),
            budget: limit,
        });
    };
    let mut in_domain = 0u64;
    let mut lam: Vec<FqElem> = vec![1; n_mon as usize];
    loop {
        let (_, ok) = hasse_residue(fam, field, hp, &lam)?;
        if ok {
            in_domain += 1;
        }
        // odometer over nonzero elements
        let mut pos = 0;
        loop {
            if pos == lam.len() {
                return Ok((total, in_domain));
            }
            if u64::from(lam[pos]) + 1 < field.q {
                lam[pos] += 1;
                break;
            }
            lam[pos] = 1;
            pos += 1;
        }
    }
}

/// Lemma 5.7: (-p)^{mu+1} H(Lambda) = theta_{-(p-1)b}(Lambda) mod p^{mu+2},
/// certified per monomial.
pub fn check_theta_congruence(fam: &FamilyData, p: u64) -> Result<MarginReport> {
    let mu = fam.mu as u64;
    let required = (p - 1) * (mu + 2);
    let kmax = ((p - 1) * (mu + 1)) as usize; // largest theta index a weight term uses
    let tower = splitting::splitting_tower(p, 1, kmax, required + 2 * (p - 1))?;
    let theta = theta_coefficients(&tower, kmax);
    let target = HassePolynomial::target(fam, p);
    let weights = splitting::theta_u_weights(fam, &tower, &theta, &target)?;
    let hp = hasse_polynomial(fam, p);

    let mut report = MarginReport::default();
    if weights.terms.len() != hp.terms.len() {
        report.push_uncertified(format!(
            "support mismatch: {} weight terms vs {} Hasse terms",
            weights.terms.len(),
            hp.terms.len()
        ));
        return Ok(report);
    }
    let m = theta.entries[0].coeffs[0].m;
    let sign = if (mu + 1) % 2 == 1 { -1i64 } else { 1 };
    let scaled_p = BigInt::from(sign) * BigInt::from(p).pow(mu as u32 + 1);
    for (nu, term) in &hp.terms {
        let Some(w) = weights.terms.get(nu) else {
            report.push_uncertified(format!("exponent {nu:?} missing on the theta side"));
            continue;
        };
        // (-p)^{mu+1} / den  vs  prod theta_{nu_j}
        let lhs = tower.r_from_unramified(&tower.u_from_ratio(&scaled_p, &term.den, m));
        let diff = tower.r_sub(&lhs, w);
        report.push(format!("monomial {nu:?}"), required, tower.pi_valuation(&diff));
    }
    Ok(report)
}
