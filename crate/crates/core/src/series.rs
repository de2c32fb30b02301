//! Truncated series solutions of the hypergeometric system attached to the
//! family: F(Lambda) supported on the cone relations L', the contiguous
//! family F_u for interior degrees u, and the differential-operator checks
//! (box operators, Euler operators, contiguity) that pin the combinatorics.
//!
//! Coefficients are exact rationals; integrality is a theorem about these
//! series, so it is asserted by tests rather than assumed by the types.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::arith::factorial;
use crate::error::{Error, Result};
use crate::family::{enumerate_cone_relations, FamilyData};

/// A truncated Laurent series with exponents in the cone E, every monomial
/// sharing one degree vector sum nu_j a_j^+.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSeries {
    pub support: BTreeMap<Vec<i64>, BigRational>,
    pub degree: Vec<i64>,
    /// Positive-part bound up to which the support is complete.
    pub trunc_bound: i64,
}

impl ConeSeries {
    pub fn coefficient(&self, exponent: &[i64]) -> BigRational {
        self.support.get(exponent).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn all_integral(&self) -> bool {
        self.support.values().all(|c| c.is_integer())
    }

    /// Positive part of an exponent vector (the truncation grade).
    pub fn positive_part(fam: &FamilyData, exponent: &[i64]) -> i64 {
        positive_part(fam, exponent)
    }
}

fn positive_part(fam: &FamilyData, exponent: &[i64]) -> i64 {
    exponent[fam.mu + 1..].iter().sum()
}

/// Series coefficient for a cone relation l:
/// (-1)^{sum_{j<=mu} l_j} prod_{j<=mu} (-l_j)! / prod_{j>mu} l_j!.
fn relation_coefficient(fam: &FamilyData, l: &[i64]) -> BigRational {
    let nneg = fam.mu + 1;
    let mut num = BigInt::one();
    let mut parity = 0i64;
    for &lj in &l[..nneg] {
        parity += -lj;
        num *= BigInt::from(factorial((-lj) as u64));
    }
    if parity % 2 == 1 {
        num = -num;
    }
    let mut den = BigInt::one();
    for &lj in &l[nneg..] {
        den *= BigInt::from(factorial(lj as u64));
    }
    BigRational::new(num, den)
}

/// F(Lambda) truncated at the given positive-part bound: support L',
/// homogeneous of degree 0, constant term 1.
pub fn f_series(fam: &FamilyData, bound: i64) -> ConeSeries {
    let mut support = BTreeMap::new();
    for l in enumerate_cone_relations(fam, bound) {
        support.insert(l.clone(), relation_coefficient(fam, &l));
    }
    ConeSeries { support, degree: vec![0; fam.n + 2], trunc_bound: bound }
}

/// F_u(Lambda) for u in M_-: the contiguous series of degree u, including
/// the (Lambda_1...Lambda_{mu+1})^{-1} prefactor in its stored exponents.
pub fn f_u_series(fam: &FamilyData, u: &[i64], bound: i64) -> Result<ConeSeries> {
    if !fam.in_interior(u) {
        return Err(Error::NotInteriorPoint(u.to_vec()));
    }
    let nneg = fam.mu + 1;
    let npos = fam.num_monomials() - nneg;
    let n2 = fam.n + 2;

    // owner[r] = which of the first mu+1 columns covers row r
    let owner: Vec<usize> = (0..=fam.n)
        .map(|r| {
            (0..nneg)
                .position(|j| fam.cols[j][r] == 1)
                .expect("ones-subset columns partition the rows")
        })
        .collect();

    let mut support = BTreeMap::new();
    let mut pos = vec![0i64; npos];
    // positive parts with sum <= bound; negative parts forced row-by-row from
    // b + sum l_j a_j^+ = u
    fn rec(
        fam: &FamilyData,
        u: &[i64],
        owner: &[usize],
        bound_left: i64,
        t: usize,
        pos: &mut Vec<i64>,
        support: &mut BTreeMap<Vec<i64>, BigRational>,
    ) {
        let nneg = fam.mu + 1;
        let npos = pos.len();
        if t == npos {
            let n2 = fam.n + 2;
            // R = u - b - sum_{j>mu} l_j a_j^+
            let mut r_vec = vec![0i64; n2];
            for i in 0..n2 {
                r_vec[i] = u[i] - fam.b[i];
            }
            for (tt, &lj) in pos.iter().enumerate() {
                if lj != 0 {
                    for (i, &e) in fam.cols_plus[nneg + tt].iter().enumerate() {
                        r_vec[i] -= lj * e;
                    }
                }
            }
            let mut neg = vec![i64::MAX; nneg];
            for (row, &rv) in r_vec[..=fam.n].iter().enumerate() {
                let j = owner[row];
                if neg[j] == i64::MAX {
                    neg[j] = rv;
                } else if neg[j] != rv {
                    return;
                }
            }
            // sign pattern and the budget row
            if neg.iter().any(|&v| v == i64::MAX || v > 0) {
                return;
            }
            let budget: i64 = neg.iter().sum::<i64>();
            if budget != r_vec[n2 - 1] {
                return;
            }
            let mut l = neg.clone();
            l.extend_from_slice(pos);
            let coeff = relation_coefficient(fam, &l);
            // stored exponent includes the monomial-prefactor shift
            let mut nu = l;
            for item in nu.iter_mut().take(nneg) {
                *item -= 1;
            }
            support.insert(nu, coeff);
            return;
        }
        for v in 0..=bound_left {
            pos[t] = v;
            rec(fam, u, owner, bound_left - v, t + 1, pos, support);
        }
        pos[t] = 0;
    }
    rec(fam, u, &owner, bound, 0, &mut pos, &mut support);
    let _ = (n2, npos);
    Ok(ConeSeries { support, degree: u.to_vec(), trunc_bound: bound })
}

/// Partial derivative with respect to Lambda_j (0-based), as a symbolic
/// operation on the truncation.
pub fn differentiate(series: &ConeSeries, fam: &FamilyData, j: usize) -> ConeSeries {
    let mut support = BTreeMap::new();
    for (nu, c) in &series.support {
        if nu[j] == 0 {
            continue;
        }
        let mut shifted = nu.clone();
        shifted[j] -= 1;
        let coeff = c * BigRational::from(BigInt::from(nu[j]));
        if !coeff.is_zero() {
            support.insert(shifted, coeff);
        }
    }
    let mut degree = series.degree.clone();
    for (i, &e) in fam.cols_plus[j].iter().enumerate() {
        degree[i] -= e;
    }
    ConeSeries { support, degree, trunc_bound: series.trunc_bound }
}

/// Outcome of a truncated identity check on series.
#[derive(Debug, Clone)]
pub struct SeriesCheck {
    pub compared: usize,
    pub mismatches: Vec<(Vec<i64>, BigRational, BigRational)>,
}

impl SeriesCheck {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Contiguity: d/dLambda_j F_u = F_{u - a_j^+}, compared on every monomial
/// complete at the truncation of both sides.
pub fn check_contiguity(
    fam: &FamilyData,
    u: &[i64],
    j: usize,
    bound: i64,
) -> Result<SeriesCheck> {
    let mut u_next = u.to_vec();
    for (i, &e) in fam.cols_plus[j].iter().enumerate() {
        u_next[i] -= e;
    }
    let fu = f_u_series(fam, u, bound)?;
    let fnext = f_u_series(fam, &u_next, bound)?;
    let dfu = differentiate(&fu, fam, j);

    // derivative terms at positive-part <= bound - 1 are complete: their
    // source exponents had positive part <= bound
    let safe = if j > fam.mu { bound - 1 } else { bound };
    if safe < 0 {
        return Err(Error::NothingCertifiable(
            "truncation too small to compare any monomial".into(),
        ));
    }
    let mut compared = 0;
    let mut mismatches = Vec::new();
    let mut keys: Vec<Vec<i64>> = dfu.support.keys().cloned().collect();
    keys.extend(fnext.support.keys().cloned());
    keys.sort();
    keys.dedup();
    for nu in keys {
        if positive_part(fam, &nu) > safe {
            continue;
        }
        let lhs = dfu.coefficient(&nu);
        let rhs = fnext.coefficient(&nu);
        compared += 1;
        if lhs != rhs {
            mismatches.push((nu, lhs, rhs));
        }
    }
    if compared == 0 {
        return Err(Error::NothingCertifiable(
            "truncation too small to compare any monomial".into(),
        ));
    }
    Ok(SeriesCheck { compared, mismatches })
}

/// A differential operator to test against a truncated series.
#[derive(Debug, Clone)]
pub enum Annihilator {
    /// Box operator of a lattice relation l.
    BoxOp(Vec<i64>),
    /// Euler operator index i with parameter beta = the series degree.
    Euler(usize),
}

/// Apply a box or Euler operator to F_u and verify vanishing on certified
/// monomials. Euler operators must vanish identically at any truncation.
pub fn check_annihilation(
    fam: &FamilyData,
    u: &[i64],
    op: &Annihilator,
    bound: i64,
) -> Result<SeriesCheck> {
    let fu = f_u_series(fam, u, bound)?;
    match op {
        Annihilator::Euler(i) => {
            let mut compared = 0;
            let mut mismatches = Vec::new();
            for (nu, c) in &fu.support {
                let weight: i64 = nu
                    .iter()
                    .zip(&fam.cols_plus)
                    .map(|(&e, col)| e * col[*i])
                    .sum();
                compared += 1;
                let lhs = c * BigRational::from(BigInt::from(weight - u[*i]));
                if !lhs.is_zero() {
                    mismatches.push((nu.clone(), lhs, BigRational::zero()));
                }
            }
            Ok(SeriesCheck { compared, mismatches })
        }
        Annihilator::BoxOp(l) => {
            assert_eq!(l.len(), fam.num_monomials(), "relation length");
            // apply prod_{l_j > 0} d^{l_j} and prod_{l_j < 0} d^{-l_j}
            let mut plus = fu.clone();
            let mut minus = fu.clone();
            for (j, &lj) in l.iter().enumerate() {
                for _ in 0..lj.max(0) {
                    plus = differentiate(&plus, fam, j);
                }
                for _ in 0..(-lj).max(0) {
                    minus = differentiate(&minus, fam, j);
                }
            }
            // a result monomial is certified when both source monomials were
            // complete in the truncation
            let pos_shift_plus: i64 = l
                .iter()
                .enumerate()
                .map(|(j, &lj)| if j > fam.mu { lj.max(0) } else { 0 })
                .sum();
            let pos_shift_minus: i64 = l
                .iter()
                .enumerate()
                .map(|(j, &lj)| if j > fam.mu { (-lj).max(0) } else { 0 })
                .sum();
            let mut keys: Vec<Vec<i64>> = plus.support.keys().cloned().collect();
            keys.extend(minus.support.keys().cloned());
            keys.sort();
            keys.dedup();
            let mut compared = 0;
            let mut mismatches = Vec::new();
            for nu in keys {
                let pp = positive_part(fam, &nu);
                if pp + pos_shift_plus > bound || pp + pos_shift_minus > bound {
                    continue;
                }
                compared += 1;
                let lhs = plus.coefficient(&nu);
                let rhs = minus.coefficient(&nu);
                if lhs != rhs {
                    mismatches.push((nu, lhs.clone(), rhs.clone()));
                }
            }
            Ok(SeriesCheck { compared, mismatches })
        }
    }
}

/// K_u of Lemma 4.13: the lcm of prod k_j! over all k in N^N with
/// u + sum k_j a_j^+ still interior.
pub fn k_u_divisor(fam: &FamilyData, u: &[i64]) -> Result<num_bigint::BigUint> {
    if !fam.in_interior(u) {
        return Err(Error::NotInteriorPoint(u.to_vec()));
    }
    let depth = -u[fam.n + 1];
    let budget = depth - (fam.mu as i64 + 1);
    let n_mon = fam.num_monomials();
    let mut lcm = num_bigint::BigUint::one();
    let mut k = vec![0i64; n_mon];
    fn rec(
        fam: &FamilyData,
        u: &[i64],
        budget_left: i64,
        j: usize,
        k: &mut Vec<i64>,
        lcm: &mut num_bigint::BigUint,
    ) {
        if j == k.len() {
            let mut w = u.to_vec();
            for (jj, &kj) in k.iter().enumerate() {
                for (i, &e) in fam.cols_plus[jj].iter().enumerate() {
                    w[i] += kj * e;
                }
            }
            if w.iter().all(|&x| x < 0) {
                let mut prod = num_bigint::BigUint::one();
                for &kj in k.iter() {
                    prod *= factorial(kj as u64);
                }
                *lcm = num_integer::Integer::lcm(&*lcm, &prod);
            }
            return;
        }
        for v in 0..=budget_left {
            k[j] = v;
            rec(fam, u, budget_left - v, j + 1, k, lcm);
        }
        k[j] = 0;
    }
    rec(fam, u, budget, 0, &mut k, &mut lcm);
    Ok(lcm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{dwork_family, split_cubic_family};

    fn dwork_exponent(n: usize, l: i64) -> Vec<i64> {
        let mut v = vec![-(n as i64 + 1) * l];
        v.extend(std::iter::repeat(l).take(n + 1));
        v
    }

    #[test]
    fn f_series_closed_forms_dwork() {
        for n in [2usize, 4] {
            let fam = dwork_family(n);
            let f = f_series(&fam, 4 * (n as i64 + 1));
            for l in 0..=4i64 {
                let num = factorial(((n as i64 + 1) * l) as u64);
                let mut den = BigInt::one();
                for _ in 0..=n {
                    den *= BigInt::from(factorial(l as u64));
                }
                let mut expect = BigRational::new(BigInt::from(num), den);
                if ((n as i64 + 1) * l) % 2 == 1 {
                    expect = -expect;
                }
                assert_eq!(
                    f.coefficient(&dwork_exponent(n, l)),
                    expect,
                    "term l={l} of the n={n} family"
                );
            }
        }
        // the printed l=1 coefficient for n=2 is -6
        let fam = dwork_family(2);
        let f = f_series(&fam, 3);
        assert_eq!(
            f.coefficient(&[-3, 1, 1, 1]),
            BigRational::from(BigInt::from(-6))
        );
    }

    #[test]
    fn f_series_closed_form_split_cubic() {
        let fam = split_cubic_family();
        // the (l1, l2) term has positive part 3(l1 + l2)
        let f = f_series(&fam, 18);
        for l1 in 0..=3i64 {
            for l2 in 0..=3i64 {
                let nu = vec![-3 * l1, -3 * l2, l1, l1, l1, l2, l2, l2];
                let mut num = BigInt::from(factorial((3 * l1) as u64) * factorial((3 * l2) as u64));
                if (l1 + l2) % 2 == 1 {
                    num = -num;
                }
                let den = BigInt::from(
                    factorial(l1 as u64).pow(3) * factorial(l2 as u64).pow(3),
                );
                assert_eq!(f.coefficient(&nu), BigRational::new(num, den));
            }
        }
    }

    #[test]
    fn bound_zero_is_constant_one() {
        for fam in [dwork_family(2), split_cubic_family()] {
            let f = f_series(&fam, 0);
            assert_eq!(f.support.len(), 1);
            let zero = vec![0i64; fam.num_monomials()];
            assert_eq!(f.coefficient(&zero), BigRational::one());
        }
    }

    #[test]
    fn f_b_is_shifted_f() {
        for fam in [dwork_family(2), split_cubic_family()] {
            let bound = 5;
            let f = f_series(&fam, bound);
            let fb = f_u_series(&fam, &fam.b.clone(), bound).unwrap();
            assert_eq!(f.support.len(), fb.support.len());
            for (l, c) in &f.support {
                let mut nu = l.clone();
                for j in 0..=fam.mu {
                    nu[j] -= 1;
                }
                assert_eq!(&fb.coefficient(&nu), c);
            }
        }
    }

    #[test]
    fn integrality_of_truncations() {
        for fam in [dwork_family(2), dwork_family(4), split_cubic_family()] {
            let f = f_series(&fam, 6);
            assert!(f.all_integral(), "F coefficients integral for {}", fam.name);
            let fb = f_u_series(&fam, &fam.b.clone(), 6).unwrap();
            assert!(fb.all_integral());
        }
        // a deeper interior point
        let fam = dwork_family(2);
        let u = vec![-7, -1, -1, -3]; // b - 2 a_2^+
        assert!(fam.in_interior(&u));
        let fu = f_u_series(&fam, &u, 6).unwrap();
        assert!(!fu.support.is_empty());
        assert!(fu.all_integral());
    }

    #[test]
    fn k_u_divides_coefficients() {
        let fam = dwork_family(2);
        let u = vec![-7, -1, -1, -3];
        let ku = k_u_divisor(&fam, &u).unwrap();
        assert_eq!(ku, num_bigint::BigUint::from(2u32));
        let fu = f_u_series(&fam, &u, 6).unwrap();
        for (nu, c) in &fu.support {
            assert!(c.is_integer());
            let int = c.to_integer();
            assert!(
                (&int % BigInt::from(ku.clone())).is_zero(),
                "coefficient at {nu:?} not divisible by K_u"
            );
        }
    }

    #[test]
    fn contiguity_both_regimes() {
        let fam = dwork_family(2);
        // j in the positive block (0-based index 1 = first power monomial)
        let check = check_contiguity(&fam, &fam.b.clone(), 1, 4).unwrap();
        assert!(check.passed(), "{:?}", check.mismatches);
        assert!(check.compared > 0);
        // j in the negative block (derivative against Lambda_1)
        let check = check_contiguity(&fam, &fam.b.clone(), 0, 4).unwrap();
        assert!(check.passed(), "{:?}", check.mismatches);

        let fam2 = split_cubic_family();
        for j in [0usize, 2, 5] {
            let check = check_contiguity(&fam2, &fam2.b.clone(), j, 4).unwrap();
            assert!(check.passed(), "split cubic j={j}: {:?}", check.mismatches);
        }
    }

    #[test]
    fn contiguity_empty_truncation_flagged() {
        let fam = dwork_family(2);
        assert!(matches!(
            check_contiguity(&fam, &fam.b.clone(), 1, 0),
            Err(Error::NothingCertifiable(_))
        ));
    }

    #[test]
    fn contiguity_composes_along_paths() {
        // Eq-style path independence: two derivative orders against the
        // directly constructed contiguous series
        let fam = split_cubic_family();
        let bound = 5;
        let fb = f_u_series(&fam, &fam.b.clone(), bound).unwrap();
        let d25 = differentiate(&differentiate(&fb, &fam, 2), &fam, 5);
        let d52 = differentiate(&differentiate(&fb, &fam, 5), &fam, 2);
        let mut target = fam.b.clone();
        for j in [2usize, 5] {
            for (i, &e) in fam.cols_plus[j].iter().enumerate() {
                target[i] -= e;
            }
        }
        let direct = f_u_series(&fam, &target, bound).unwrap();
        for (nu, c) in &direct.support {
            if positive_part(&fam, nu) <= bound - 2 {
                assert_eq!(&d25.coefficient(nu), c);
                assert_eq!(&d52.coefficient(nu), c);
            }
        }
    }

    #[test]
    fn box_and_euler_annihilation() {
        let fam = dwork_family(2);
        let b = fam.b.clone();
        // box operator of the relation lattice generator
        let check =
            check_annihilation(&fam, &b, &Annihilator::BoxOp(vec![-3, 1, 1, 1]), 4).unwrap();
        assert!(check.passed(), "{:?}", check.mismatches);
        assert!(check.compared > 0);
        // the zero relation is the zero operator
        let check =
            check_annihilation(&fam, &b, &Annihilator::BoxOp(vec![0, 0, 0, 0]), 2).unwrap();
        assert!(check.passed());
        // Euler operators vanish identically at any truncation
        for i in 0..=fam.n + 1 {
            let check = check_annihilation(&fam, &b, &Annihilator::Euler(i), 3).unwrap();
            assert!(check.passed(), "Euler operator {i}");
            assert!(check.compared > 0);
        }

        let fam2 = split_cubic_family();
        for l in [
            vec![-3, 0, 1, 1, 1, 0, 0, 0],
            vec![0, -3, 0, 0, 0, 1, 1, 1],
        ] {
            let check =
                check_annihilation(&fam2, &fam2.b.clone(), &Annihilator::BoxOp(l), 4).unwrap();
            assert!(check.passed(), "{:?}", check.mismatches);
        }
        for i in 0..=fam2.n + 1 {
            let check =
                check_annihilation(&fam2, &fam2.b.clone(), &Annihilator::Euler(i), 3).unwrap();
            assert!(check.passed());
        }
    }

    #[test]
    fn f_u_rejects_exterior_points() {
        let fam = dwork_family(2);
        assert!(matches!(
            f_u_series(&fam, &[-1, -1, -1, -2], 3),
            Err(Error::NotInteriorPoint(_))
        ));
        // not in the group M
        assert!(matches!(
            f_u_series(&fam, &[-2, -1, -3, -2], 3),
            Err(Error::NotInteriorPoint(_))
        ));
    }
}
