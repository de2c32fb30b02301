//! Dwork's splitting-function coefficient series: the Artin-Hasse
//! exponential, theta(t) = AH(gamma0 t), the overconvergent products
//! theta-hat and theta-hat-1 (with reciprocal), and the finite weight
//! polynomials theta_u evaluated on Teichmuller fibers.
//!
//! All tables store exact ramified elements with per-entry precision tags;
//! valuation claims are asserted only below the certified precision.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::arith::{factorial, factorial_ord_p};
use crate::error::{Error, Result};
use crate::family::FamilyData;
use crate::tower::{RamifiedElement, RingTower, UnramifiedElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    ArtinHasse,
    Theta,
    ThetaHat,
    ThetaHat1,
    ThetaHat1Inv,
    QCapital,
}

/// A coefficient table for one of the splitting series. For `Theta` and
/// `ThetaHat*` kinds the entries follow the normalization the series is
/// defined with: theta stores plain t-power coefficients theta_i, while
/// theta-hat kinds store the normalized values (coefficient of
/// (gamma0 t)^i / i!). Artin-Hasse entries are p-integral rationals reduced
/// into the tower.
#[derive(Debug, Clone)]
pub struct CoeffTable {
    pub kind: TableKind,
    pub entries: Vec<RamifiedElement>,
    pub kmax: usize,
}

impl CoeffTable {
    pub fn entry(&self, i: usize) -> &RamifiedElement {
        &self.entries[i]
    }
}

/// Exact Artin-Hasse coefficients AH_k for exp(sum t^{p^i}/p^i), via the
/// logarithmic-derivative recursion k AH_k = sum_{p^i <= k} AH_{k - p^i}.
pub fn artin_hasse_rationals(p: u64, kmax: usize) -> Vec<BigRational> {
    let mut ah: Vec<BigRational> = Vec::with_capacity(kmax + 1);
    ah.push(BigRational::one());
    for k in 1..=kmax {
        let mut sum = BigRational::zero();
        let mut q = 1usize;
        loop {
            if q > k {
                break;
            }
            sum += &ah[k - q];
            match q.checked_mul(p as usize) {
                Some(next) => q = next,
                None => break,
            }
        }
        ah.push(sum / BigInt::from(k));
    }
    ah
}

fn ratio_to_unramified(t: &RingTower, r: &BigRational, m: u32) -> UnramifiedElement {
    let den = r
        .denom()
        .to_biguint()
        .expect("canonical rationals have positive denominators");
    t.u_from_ratio(r.numer(), &den, m)
}

/// Artin-Hasse table in the tower (entries are rational scalars embedded in
/// the ramified layer).
pub fn artin_hasse(t: &RingTower, kmax: usize, m: u32) -> CoeffTable {
    let rats = artin_hasse_rationals(t.p, kmax);
    let entries = rats
        .iter()
        .map(|r| t.r_from_unramified(&ratio_to_unramified(t, r, m)))
        .collect();
    CoeffTable { kind: TableKind::ArtinHasse, entries, kmax }
}

/// theta_i = AH_i gamma0^i.
pub fn theta_coefficients(t: &RingTower, kmax: usize) -> CoeffTable {
    let g = t.gamma0_full().clone();
    let m = g.coeffs[0].m;
    let ah = artin_hasse(t, kmax, m);
    let mut entries = Vec::with_capacity(kmax + 1);
    let mut gpow = t.r_from_u64(1, m);
    for i in 0..=kmax {
        entries.push(t.r_mul(&ah.entries[i], &gpow));
        if i < kmax {
            gpow = t.r_mul(&gpow, &g);
        }
    }
    CoeffTable { kind: TableKind::Theta, entries, kmax }
}

/// gamma_j = sum_{i<=j} gamma0^{p^i} / p^i for j = 0..=jmax.
pub fn gamma_js(t: &RingTower, jmax: u32) -> Result<Vec<RamifiedElement>> {
    let g = t.gamma0_full().clone();
    let mut out = Vec::with_capacity(jmax as usize + 1);
    let mut acc = g.clone();
    let mut gp = g.clone();
    out.push(acc.clone());
    for i in 1..=jmax {
        gp = t.r_pow(&gp, t.p);
        acc = t.r_add(&acc, &t.r_div_exact_p(&gp, i)?);
        out.push(acc.clone());
    }
    Ok(out)
}

/// Divide by k! (unit part by inversion, p-part by exact division).
fn div_factorial(t: &RingTower, x: &RamifiedElement, k: u64) -> Result<RamifiedElement> {
    if k <= 1 {
        return Ok(x.clone());
    }
    let e = factorial_ord_p(k, t.p) as u32;
    let fact = factorial(k);
    let unit = &fact / BigUint::from(t.p).pow(e);
    let m = x.coeffs[0].m;
    let unit_inv = t.u_from_ratio(&BigInt::one(), &unit, m);
    let scaled = t.r_scale_unram(x, &unit_inv);
    t.r_div_exact_p(&scaled, e)
}

/// Plain t-power coefficients of prod_{j>=1} exp(sign gamma_j t^{p^j}),
/// truncated at kmax.
fn theta_hat1_plain(t: &RingTower, kmax: usize, inverse: bool) -> Result<Vec<RamifiedElement>> {
    let m = t.gamma0_full().coeffs[0].m;
    let mut jmax = 0u32;
    while (t.p as u128).pow(jmax + 1) <= kmax as u128 {
        jmax += 1;
    }
    let gammas = gamma_js(t, jmax)?;
    let mut series = vec![t.r_zero_at(m); kmax + 1];
    series[0] = t.r_from_u64(1, m);
    for j in 1..=jmax {
        let step = (t.p as usize).pow(j);
        let base = if inverse { t.r_neg(&gammas[j as usize]) } else { gammas[j as usize].clone() };
        // exp(base * t^step) truncated
        let mut factor = vec![t.r_zero_at(m); kmax + 1];
        factor[0] = t.r_from_u64(1, m);
        let mut pow = t.r_from_u64(1, m);
        for k in 1..=(kmax / step) {
            pow = t.r_mul(&pow, &base);
            factor[k * step] = div_factorial(t, &pow, k as u64)?;
        }
        series = series_mul_trunc(t, &series, &factor, kmax);
    }
    Ok(series)
}

fn series_mul_trunc(
    t: &RingTower,
    a: &[RamifiedElement],
    b: &[RamifiedElement],
    kmax: usize,
) -> Vec<RamifiedElement> {
    let m = a[0].coeffs[0].m.min(b[0].coeffs[0].m);
    let mut out = vec![t.r_zero_at(m); kmax + 1];
    for (i, ai) in a.iter().enumerate().take(kmax + 1) {
        if t.r_is_zero(ai) {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(kmax + 1 - i) {
            if t.r_is_zero(bj) {
                continue;
            }
            let term = t.r_mul(ai, bj);
            out[i + j] = t.r_add(&out[i + j], &term);
        }
    }
    out
}

/// Normalized coefficients: entry i is the value X_i with series coefficient
/// of t^i equal to X_i gamma0^i / i!.
fn normalize_entries(
    t: &RingTower,
    plain: &[RamifiedElement],
) -> Result<Vec<RamifiedElement>> {
    let mut out = Vec::with_capacity(plain.len());
    for (i, c) in plain.iter().enumerate() {
        let fact = factorial(i as u64);
        let m = c.coeffs[0].m;
        let scaled = t.r_scale_unram(c, &t.u_from_ratio(&BigInt::from(fact), &BigUint::one(), m));
        out.push(t.r_div_gamma0_pow(&scaled, i as u64)?);
    }
    Ok(out)
}

/// Normalized theta-hat-1 table (or its reciprocal).
pub fn theta_hat1_coefficients(t: &RingTower, kmax: usize, inverse: bool) -> Result<CoeffTable> {
    let plain = theta_hat1_plain(t, kmax, inverse)?;
    let entries = normalize_entries(t, &plain)?;
    Ok(CoeffTable {
        kind: if inverse { TableKind::ThetaHat1Inv } else { TableKind::ThetaHat1 },
        entries,
        kmax,
    })
}

/// Plain t-power coefficients of theta-hat = prod_{j>=0} exp(gamma_j t^{p^j}).
pub fn theta_hat_plain(t: &RingTower, kmax: usize) -> Result<Vec<RamifiedElement>> {
    let m = t.gamma0_full().coeffs[0].m;
    // j = 0 factor: exp(gamma_0 t)
    let mut exp0 = vec![t.r_zero_at(m); kmax + 1];
    exp0[0] = t.r_from_u64(1, m);
    let mut pow = t.r_from_u64(1, m);
    for k in 1..=kmax {
        pow = t.r_mul(&pow, t.gamma0_full());
        exp0[k] = div_factorial(t, &pow, k as u64)?;
    }
    let tail = theta_hat1_plain(t, kmax, false)?;
    Ok(series_mul_trunc(t, &exp0, &tail, kmax))
}

/// Normalized theta-hat table.
pub fn theta_hat_coefficients(t: &RingTower, kmax: usize) -> Result<CoeffTable> {
    let plain = theta_hat_plain(t, kmax)?;
    let entries = normalize_entries(t, &plain)?;
    Ok(CoeffTable { kind: TableKind::ThetaHat, entries, kmax })
}

/// A tower sized so the table builders above can deliver `target_k` pi-digits
/// at index kmax despite their internal exact divisions.
pub fn splitting_tower(p: u64, a: usize, kmax: usize, target_k: u64) -> Result<RingTower> {
    let ram = p - 1;
    let budget = target_k + 2 * kmax as u64 + 4 * ram + 16;
    let m = budget.div_ceil(ram) as u32 + 2;
    RingTower::new(p, a, m, ram * m as u64)
}

// ---------- weight polynomials theta_u ----------

/// theta_u(Lambda) as a finite term list: exponent nu (with
/// sum nu_j a_j^+ = u) mapped to prod_j theta_{nu_j}.
#[derive(Debug, Clone)]
pub struct WeightPolynomial {
    pub u: Vec<i64>,
    pub terms: BTreeMap<Vec<u32>, RamifiedElement>,
}

/// Visit every nu in N^N with sum nu_j a_j^+ = u. The last coordinate of
/// each augmented column is 1, so sum nu_j = u_{n+1}, and the body
/// coordinates prune the search hard.
pub fn visit_weight_exponents(
    fam: &FamilyData,
    u: &[i64],
    mut visit: impl FnMut(&[u32]),
) {
    let n_mon = fam.num_monomials();
    let n2 = fam.n + 2;
    if u.iter().any(|&x| x < 0) {
        return;
    }
    let mut nu = vec![0u32; n_mon];
    let mut residual = u.to_vec();

    fn rec(
        fam: &FamilyData,
        j: usize,
        nu: &mut Vec<u32>,
        residual: &mut Vec<i64>,
        n2: usize,
        visit: &mut impl FnMut(&[u32]),
    ) {
        let n_mon = fam.num_monomials();
        if j == n_mon - 1 {
            // the final count is forced by the budget coordinate
            let c = residual[n2 - 1];
            if c < 0 {
                return;
            }
            let col = &fam.cols_plus[j];
            for (i, &e) in col.iter().enumerate() {
                if residual[i] != c * e {
                    return;
                }
            }
            nu[j] = c as u32;
            visit(nu);
            nu[j] = 0;
            return;
        }
        let col = &fam.cols_plus[j];
        // max multiplicity from coordinate-wise budgets
        let mut cap = residual[n2 - 1];
        for (i, &e) in col.iter().enumerate() {
            if e > 0 {
                cap = cap.min(residual[i] / e);
            }
        }
        for c in 0..=cap.max(-1) {
            if c > 0 {
                for (i, &e) in col.iter().enumerate() {
                    residual[i] -= e;
                }
            }
            nu[j] = c as u32;
            rec(fam, j + 1, nu, residual, n2, visit);
        }
        nu[j] = 0;
        for (i, &e) in col.iter().enumerate() {
            residual[i] += e * cap.max(0);
        }
    }

    rec(fam, 0, &mut nu, &mut residual, n2, &mut visit);
}

/// Full symbolic weight polynomial.
pub fn theta_u_weights(
    fam: &FamilyData,
    t: &RingTower,
    theta: &CoeffTable,
    u: &[i64],
) -> Result<WeightPolynomial> {
    assert_eq!(theta.kind, TableKind::Theta);
    if u.len() != fam.n + 2 {
        return Err(Error::Config("weight target has wrong length".into()));
    }
    let mut terms = BTreeMap::new();
    let mut max_needed = 0usize;
    visit_weight_exponents(fam, u, |nu| {
        max_needed = max_needed.max(nu.iter().map(|&x| x as usize).max().unwrap_or(0));
    });
    if max_needed > theta.kmax {
        return Err(Error::PrecisionUnderflow {
            needed: max_needed as i64,
            have: theta.kmax as i64,
        });
    }
    let m = theta.entries[0].coeffs[0].m;
    visit_weight_exponents(fam, u, |nu| {
        let mut coeff = t.r_from_u64(1, m);
        for &e in nu {
            coeff = t.r_mul(&coeff, &theta.entries[e as usize]);
        }
        terms.insert(nu.to_vec(), coeff);
    });
    Ok(WeightPolynomial { u: u.to_vec(), terms })
}

/// Per-fiber cache of Teichmuller coordinate powers.
pub struct LambdaPowers {
    /// powers[j][e] = lambda_j^e (Teichmuller lift coordinates)
    pub powers: Vec<Vec<UnramifiedElement>>,
}

impl LambdaPowers {
    pub fn new(t: &RingTower, lam_hat: &[UnramifiedElement], cap: usize) -> Self {
        let powers = lam_hat
            .iter()
            .map(|l| {
                let mut row = Vec::with_capacity(cap + 1);
                row.push(t.u_one(l.m));
                for e in 1..=cap {
                    let next = t.u_mul(&row[e - 1], l);
                    row.push(next);
                }
                row
            })
            .collect();
        LambdaPowers { powers }
    }

    pub fn cap(&self) -> usize {
        self.powers.first().map_or(0, |r| r.len() - 1)
    }
}

/// theta_u evaluated at a Teichmuller fiber, accumulated during the
/// exponent walk (no intermediate polynomial is materialized).
pub fn eval_theta_u(
    fam: &FamilyData,
    t: &RingTower,
    theta: &CoeffTable,
    u: &[i64],
    lam: &LambdaPowers,
) -> RamifiedElement {
    let m = theta.entries[0].coeffs[0].m;
    let mut acc = t.r_zero_at(m);
    let mut any = false;
    visit_weight_exponents(fam, u, |nu| {
        let mut scalar = t.u_one(m);
        for (j, &e) in nu.iter().enumerate() {
            if e > 0 {
                scalar = t.u_mul(&scalar, &lam.powers[j][e as usize]);
            }
        }
        let mut coeff = t.r_from_unramified(&scalar);
        for &e in nu {
            if e > 0 {
                coeff = t.r_mul(&coeff, &theta.entries[e as usize]);
            }
        }
        acc = t.r_add(&acc, &coeff);
        any = true;
    });
    if !any {
        // empty constraint set: theta_u = 0
        acc = t.r_zero_at(m);
    }
    acc
}

/// ord_pi lower bound asserted by Eq. (3.23): every coefficient of theta_u
/// has ord_pi >= u_{n+1}.
pub fn weight_valuation_floor(u: &[i64]) -> u64 {
    *u.last().expect("nonempty target") as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{dwork_family, split_cubic_family};
    use crate::tower::PiVal;

    #[test]
    fn artin_hasse_leading_terms() {
        for p in [2u64, 3, 5, 7] {
            let ah = artin_hasse_rationals(p, 6);
            assert_eq!(ah[0], BigRational::one());
            assert_eq!(ah[1], BigRational::one());
        }
        // independent oracle at p=2: multiply out exp(t) exp(t^2/2) exp(t^4/4)
        let kmax = 8;
        let mut series = vec![BigRational::zero(); kmax + 1];
        series[0] = BigRational::one();
        for step in [1usize, 2, 4, 8] {
            let coef = BigRational::new(BigInt::one(), BigInt::from(step));
            let mut factor = vec![BigRational::zero(); kmax + 1];
            factor[0] = BigRational::one();
            let mut power = BigRational::one();
            let mut fact = BigInt::one();
            for k in 1..=(kmax / step) {
                power *= &coef;
                fact *= BigInt::from(k);
                factor[k * step] = &power / BigRational::from(fact.clone());
            }
            let mut next = vec![BigRational::zero(); kmax + 1];
            for i in 0..=kmax {
                for j in 0..=(kmax - i) {
                    let prod = &series[i] * &factor[j];
                    next[i + j] += prod;
                }
            }
            series = next;
        }
        let ah2 = artin_hasse_rationals(2, kmax);
        assert_eq!(series, ah2);
        assert_eq!(ah2[2], BigRational::one(), "AH_2 = 1 at p = 2");
    }

    #[test]
    fn artin_hasse_p_integrality() {
        for p in [2u64, 3, 5, 7] {
            for (k, r) in artin_hasse_rationals(p, 60).iter().enumerate() {
                let den = num_traits::Signed::abs(r.denom()).to_biguint().unwrap();
                assert_eq!(
                    crate::arith::ord_p_biguint(&den, p),
                    Some(0),
                    "AH_{k} denominator divisible by {p}"
                );
            }
        }
    }

    #[test]
    fn theta_leading_terms_and_valuations() {
        for p in [2u64, 3, 5] {
            let t = splitting_tower(p, 1, 24, 30).unwrap();
            let theta = theta_coefficients(&t, 24);
            assert!(t.r_eq_mod(&theta.entries[0], &t.r_from_u64(1, 4), 4));
            assert!(t.r_eq_mod(&theta.entries[1], t.gamma0_full(), (p - 1) * 3));
            for (i, c) in theta.entries.iter().enumerate() {
                assert!(
                    t.pi_valuation(c).at_least(i as u64),
                    "ord theta_{i} >= {i} at p={p}, got {:?}",
                    t.pi_valuation(c)
                );
            }
            // theta_i = gamma0^i / i! for i <= p-1
            for i in 0..=(p - 1) as usize {
                let g = t.r_pow(t.gamma0_full(), i as u64);
                let expect = div_factorial(&t, &g, i as u64).unwrap();
                let diff = t.r_sub(&theta.entries[i], &expect);
                assert!(t.pi_valuation(&diff).at_least(expect.kprec.min(20)));
            }
        }
    }

    #[test]
    fn gamma_j_valuations() {
        // Eq (3.4): ord_pi gamma_j = p^{j+1} - (j+1)(p-1)
        for p in [2u64, 3, 5] {
            let t = splitting_tower(p, 1, 30, 60).unwrap();
            let jmax = if p == 2 { 4 } else { 2 };
            let gs = gamma_js(&t, jmax).unwrap();
            for (j, g) in gs.iter().enumerate() {
                let expect = (p as u64).pow(j as u32 + 1) - (j as u64 + 1) * (p - 1);
                if expect < g.kprec {
                    assert_eq!(
                        t.pi_valuation(g),
                        PiVal::Exact(expect),
                        "ord gamma_{j} at p={p}"
                    );
                }
            }
        }
    }

    #[test]
    fn theta_hat1_normalized_valuations() {
        // Eq (3.10)/(3.15): ord_p of the normalized entries >= i(p-1)/p
        for p in [2u64, 3, 5] {
            let t = splitting_tower(p, 1, 20, 40).unwrap();
            for inverse in [false, true] {
                let tab = theta_hat1_coefficients(&t, 20, inverse).unwrap();
                assert!(t.r_eq_mod(&tab.entries[0], &t.r_from_u64(1, 4), 4));
                for (i, c) in tab.entries.iter().enumerate() {
                    let floor = (i as u64 * (p - 1) * (p - 1)).div_ceil(p);
                    assert!(
                        t.pi_valuation(c).at_least(floor.min(c.kprec)),
                        "normalized entry {i} at p={p} inverse={inverse}: {:?} < {floor}",
                        t.pi_valuation(c)
                    );
                }
            }
        }
    }

    #[test]
    fn theta_hat_identities() {
        // theta-hat = exp(gamma0 t) * theta-hat-1 is the definition split;
        // check theta(t) * theta-hat(t^p) = theta-hat(t) on the truncation.
        for p in [2u64, 3] {
            let kmax = 12usize;
            let t = splitting_tower(p, 1, kmax, 24).unwrap();
            let hat = theta_hat_plain(&t, kmax).unwrap();
            let theta = theta_coefficients(&t, kmax);
            let mut lhs = vec![t.r_zero_at(hat[0].coeffs[0].m); kmax + 1];
            for i in 0..=kmax {
                for j in 0..=(kmax - i) {
                    if j % p as usize != 0 {
                        continue;
                    }
                    let term = t.r_mul(&theta.entries[i], &hat[j / p as usize]);
                    lhs[i + j] = t.r_add(&lhs[i + j], &term);
                }
            }
            for k in 0..=kmax {
                // theta-hat(t^p) truncated at kmax only feeds indices j*p <= kmax,
                // so products are complete for all k <= kmax
                let diff = t.r_sub(&lhs[k], &hat[k]);
                let cert = diff.kprec.min(18);
                assert!(
                    t.pi_valuation(&diff).at_least(cert),
                    "theta * theta-hat(t^p) = theta-hat at index {k}, p={p}"
                );
            }
        }
    }

    #[test]
    fn theta_hat1_times_inverse_is_one() {
        for p in [2u64, 3, 5] {
            let kmax = 12usize;
            let t = splitting_tower(p, 1, kmax, 24).unwrap();
            let plain = theta_hat1_plain(&t, kmax, false).unwrap();
            let plain_inv = theta_hat1_plain(&t, kmax, true).unwrap();
            let prod = series_mul_trunc(&t, &plain, &plain_inv, kmax);
            assert!(t.r_eq_mod(&prod[0], &t.r_from_u64(1, 4), 4));
            for k in 1..=kmax {
                let cert = prod[k].kprec.min(18);
                assert!(
                    t.pi_valuation(&prod[k]).at_least(cert),
                    "reciprocal convolution vanishes at k={k}, p={p}"
                );
            }
        }
    }

    #[test]
    fn weight_enumeration_hesse() {
        let fam = dwork_family(2);
        // u = -(p-1) b for p = 3: (2,2,2,2)
        let mut count = 0;
        let mut seen = Vec::new();
        visit_weight_exponents(&fam, &[2, 2, 2, 2], |nu| {
            count += 1;
            seen.push(nu.to_vec());
        });
        assert_eq!(count, 1);
        assert_eq!(seen[0], vec![2, 0, 0, 0]);
        // p=7 target (6,6,6,6): solutions u1 in {0,3,6}
        let mut seen7 = Vec::new();
        visit_weight_exponents(&fam, &[6, 6, 6, 6], |nu| seen7.push(nu.to_vec()));
        seen7.sort();
        assert_eq!(
            seen7,
            vec![vec![0, 2, 2, 2], vec![3, 1, 1, 1], vec![6, 0, 0, 0]]
        );
        // u = 0 gives the constant 1
        let mut zero_count = 0;
        visit_weight_exponents(&fam, &[0, 0, 0, 0], |nu| {
            assert!(nu.iter().all(|&x| x == 0));
            zero_count += 1;
        });
        assert_eq!(zero_count, 1);
    }

    #[test]
    fn weight_polynomial_valuation_floor() {
        let fam = split_cubic_family();
        let p = 3u64;
        let t = splitting_tower(p, 1, 16, 24).unwrap();
        let theta = theta_coefficients(&t, 16);
        // u = -(p-1)b = (2,...,2,4)
        let u: Vec<i64> = fam.b.iter().map(|&x| -(p as i64 - 1) * x).collect();
        let w = theta_u_weights(&fam, &t, &theta, &u).unwrap();
        assert!(!w.terms.is_empty());
        let floor = weight_valuation_floor(&u);
        for (nu, c) in &w.terms {
            assert!(
                t.pi_valuation(c).at_least(floor),
                "coefficient at {nu:?} below the (3.23) floor"
            );
        }
    }

    #[test]
    fn eval_matches_symbolic() {
        let fam = dwork_family(2);
        let p = 5u64;
        let t = splitting_tower(p, 1, 20, 24).unwrap();
        let theta = theta_coefficients(&t, 20);
        let u: Vec<i64> = vec![4, 4, 4, 4];
        let w = theta_u_weights(&fam, &t, &theta, &u).unwrap();
        let lam_res: Vec<_> = [2u64, 1, 3, 4]
            .iter()
            .map(|&c| t.teichmuller_at(t.fq.from_coords(&[c]), t.gamma0_full().coeffs[0].m))
            .collect();
        let lam = LambdaPowers::new(&t, &lam_res, 8);
        let fast = eval_theta_u(&fam, &t, &theta, &u, &lam);
        // symbolic evaluation
        let m = theta.entries[0].coeffs[0].m;
        let mut slow = t.r_zero_at(m);
        for (nu, c) in &w.terms {
            let mut scalar = t.u_one(m);
            for (j, &e) in nu.iter().enumerate() {
                for _ in 0..e {
                    scalar = t.u_mul(&scalar, &lam_res[j]);
                }
            }
            slow = t.r_add(&slow, &t.r_mul(c, &t.r_from_unramified(&scalar)));
        }
        let diff = t.r_sub(&fast, &slow);
        assert!(t.pi_valuation(&diff).at_least(diff.kprec));
    }
}
