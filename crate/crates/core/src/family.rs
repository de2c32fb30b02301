//! Family validation and the combinatorial data attached to it: the exponent
//! matrix, the relation lattice L, the sign-constrained cone E, and the
//! interior support M_- that indexes the dual Dwork space.

use crate::error::{Error, Result};
use crate::intlin::{kernel_basis, mat_vec, LatticeMembership, Mat};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct FamilyData {
    pub name: String,
    /// Ambient projective dimension parameter (hypersurface in P^n).
    pub n: usize,
    pub d: i64,
    pub mu: usize,
    /// Exponent columns a_j, each of length n+1, reordered so that the
    /// canonical ones-subset occupies positions 0..mu.
    pub cols: Vec<Vec<i64>>,
    /// Augmented columns a_j^+ = (a_j, 1), length n+2.
    pub cols_plus: Vec<Vec<i64>>,
    /// b = -(sum of the first mu+1 augmented columns) = (-1,...,-1,-mu-1).
    pub b: Vec<i64>,
    /// perm[new_index] = original index of that monomial.
    pub perm: Vec<usize>,
    /// Original indices (0-based) of the subset realizing the ones condition.
    pub ones_subset: Vec<usize>,
    /// Membership in the group M generated by the augmented columns.
    membership: LatticeMembership,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeBasis {
    pub rank: usize,
    pub basis: Vec<Vec<i64>>,
}

impl FamilyData {
    pub fn num_monomials(&self) -> usize {
        self.cols.len()
    }

    /// Rows of the augmented matrix A+ ((n+2) x N).
    pub fn a_plus_matrix(&self) -> Mat {
        let n2 = self.n + 2;
        (0..n2)
            .map(|i| self.cols_plus.iter().map(|c| c[i]).collect())
            .collect()
    }

    /// Is u in the group M generated by the augmented columns?
    pub fn in_group(&self, u: &[i64]) -> bool {
        self.membership.contains(u)
    }

    /// Is u in M_- (all coordinates negative, on the degree hyperplane,
    /// inside the group M)?
    pub fn in_interior(&self, u: &[i64]) -> bool {
        u.len() == self.n + 2
            && u.iter().all(|&x| x < 0)
            && on_hyperplane(u, self.n, self.d)
            && self.in_group(u)
    }

    /// Apply the stored permutation to a fiber given in the user's original
    /// monomial order.
    pub fn permute_fiber<T: Copy>(&self, original: &[T]) -> Vec<T> {
        self.perm.iter().map(|&old| original[old]).collect()
    }

    /// Canonical text form, used for cache keys.
    pub fn canonical_string(&self) -> String {
        let mut s = format!("n={};d={};", self.n, self.d);
        for (k, &old) in self.perm.iter().enumerate() {
            let _ = old;
            s.push_str(&format!(
                "{};",
                self.cols[k]
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ));
        }
        s
    }

    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_string().as_bytes());
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn on_hyperplane(u: &[i64], n: usize, d: i64) -> bool {
    let body: i64 = u[..=n].iter().sum();
    body == d * u[n + 1]
}

/// Validate the family and canonicalize the monomial order.
///
/// The subset of mu+1 columns summing to (1,...,1) is chosen lexicographically
/// least by original index tuple; the permutation is recorded so fibers given
/// in the caller's order can be mapped consistently.
pub fn validate_family(
    name: &str,
    n: usize,
    d: i64,
    exponents: &[Vec<i64>],
) -> Result<FamilyData> {
    validate_family_impl(name, n, d, exponents, None)
}

/// Same as `validate_family` but with a caller-forced ones-subset (original
/// indices). Used to confirm that downstream results do not depend on which
/// valid subset is canonicalized.
pub fn validate_family_with_subset(
    name: &str,
    n: usize,
    d: i64,
    exponents: &[Vec<i64>],
    subset: &[usize],
) -> Result<FamilyData> {
    validate_family_impl(name, n, d, exponents, Some(subset.to_vec()))
}

fn validate_family_impl(
    name: &str,
    n: usize,
    d: i64,
    exponents: &[Vec<i64>],
    forced_subset: Option<Vec<usize>>,
) -> Result<FamilyData> {
    if exponents.is_empty() {
        return Err(Error::Config("exponent list is empty".into()));
    }
    if d < 2 {
        return Err(Error::Config(format!("degree must be at least 2, got {d}")));
    }
    for (j, col) in exponents.iter().enumerate() {
        if col.len() != n + 1 {
            return Err(Error::Config(format!(
                "exponent vector {j} has {} entries, expected n+1 = {}",
                col.len(),
                n + 1
            )));
        }
        if col.iter().any(|&x| x < 0) {
            return Err(Error::Config(format!("exponent vector {j} has negative entries")));
        }
        let sum: i64 = col.iter().sum();
        if sum != d {
            return Err(Error::NotHomogeneous { col: j, sum, d });
        }
    }
    let n_plus_1 = (n + 1) as i64;
    if n_plus_1 % d != 0 {
        return Err(Error::DegreeNotDividing { d, n_plus_1 });
    }
    let mu = (n_plus_1 / d - 1) as usize;

    let subset = match forced_subset {
        Some(s) => {
            if s.len() != mu + 1 || !sums_to_ones(exponents, &s, n) {
                return Err(Error::NoOnesSubset { subset_size: mu + 1 });
            }
            s
        }
        None => least_ones_subset(exponents, mu + 1, n)
            .ok_or(Error::NoOnesSubset { subset_size: mu + 1 })?,
    };

    let mut perm: Vec<usize> = subset.clone();
    for j in 0..exponents.len() {
        if !subset.contains(&j) {
            perm.push(j);
        }
    }
    let cols: Vec<Vec<i64>> = perm.iter().map(|&j| exponents[j].clone()).collect();
    let cols_plus: Vec<Vec<i64>> = cols
        .iter()
        .map(|c| {
            let mut v = c.clone();
            v.push(1);
            v
        })
        .collect();
    let mut b = vec![-1i64; n + 2];
    b[n + 1] = -(mu as i64) - 1;

    let a_plus: Mat = (0..n + 2)
        .map(|i| cols_plus.iter().map(|c| c[i]).collect())
        .collect();
    let membership = LatticeMembership::new(&a_plus);

    Ok(FamilyData {
        name: name.to_string(),
        n,
        d,
        mu,
        cols,
        cols_plus,
        b,
        perm,
        ones_subset: subset,
        membership,
    })
}

fn sums_to_ones(exponents: &[Vec<i64>], subset: &[usize], n: usize) -> bool {
    let mut sum = vec![0i64; n + 1];
    for &j in subset {
        if j >= exponents.len() {
            return false;
        }
        for (i, &x) in exponents[j].iter().enumerate() {
            sum[i] += x;
        }
    }
    sum.iter().all(|&x| x == 1)
}

fn least_ones_subset(exponents: &[Vec<i64>], size: usize, n: usize) -> Option<Vec<usize>> {
    let total = exponents.len();
    if size > total {
        return None;
    }
    // combinations in lexicographic order over index tuples
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        if sums_to_ones(exponents, &idx, n) {
            return Some(idx);
        }
        // advance
        let mut i = size;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if idx[i] != i + total - size {
                break;
            }
            if i == 0 {
                return None;
            }
        }
        idx[i] += 1;
        for k in i + 1..size {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

/// Hermite-reduced basis of the relation lattice L = ker(A+).
pub fn relation_lattice_basis(fam: &FamilyData) -> LatticeBasis {
    let basis = kernel_basis(&fam.a_plus_matrix());
    LatticeBasis { rank: basis.len(), basis }
}

/// All l in L' = L and E with positive part sum_{j>mu} l_j <= bound,
/// graded-lexicographically ordered.
///
/// The first mu+1 columns are 0/1 vectors with disjoint supports partitioning
/// the rows (that is what the ones condition says), so the negative part of a
/// candidate relation is determined row-by-row from the positive part; a
/// candidate survives iff that forced choice is consistent.
pub fn enumerate_cone_relations(fam: &FamilyData, bound: i64) -> Vec<Vec<i64>> {
    assert!(bound >= 0, "bound must be nonnegative");
    let nneg = fam.mu + 1;
    let npos = fam.num_monomials() - nneg;
    let a_plus = fam.a_plus_matrix();

    // witness row for each negative-block column
    let witness: Vec<usize> = (0..nneg)
        .map(|j| {
            fam.cols[j]
                .iter()
                .position(|&x| x == 1)
                .expect("ones-subset columns are 0/1 with nonempty support")
        })
        .collect();
    // which negative-block column covers each row
    let owner: Vec<usize> = (0..=fam.n)
        .map(|r| {
            (0..nneg)
                .position(|j| fam.cols[j][r] == 1)
                .expect("ones-subset columns partition the rows")
        })
        .collect();
    let _ = &witness;

    let mut out: Vec<Vec<i64>> = Vec::new();
    let mut pos = vec![0i64; npos];
    enumerate_compositions_upto(bound, npos, &mut pos, &mut |pos| {
        // S[r] = sum over positive block of l_j a_j at row r
        let mut s = vec![0i64; fam.n + 1];
        for (t, &lj) in pos.iter().enumerate() {
            if lj == 0 {
                continue;
            }
            for (r, &e) in fam.cols[nneg + t].iter().enumerate() {
                s[r] += lj * e;
            }
        }
        // forced negative part: l_{owner(r)} = -S[r], must be consistent
        let mut neg = vec![i64::MAX; nneg];
        for (r, &sr) in s.iter().enumerate() {
            let j = owner[r];
            if neg[j] == i64::MAX {
                neg[j] = -sr;
            } else if neg[j] != -sr {
                return;
            }
        }
        let mut l = Vec::with_capacity(fam.num_monomials());
        for &v in &neg {
            l.push(if v == i64::MAX { 0 } else { v });
        }
        l.extend_from_slice(pos);
        if mat_vec(&a_plus, &l).iter().all(|&x| x == 0) {
            out.push(l);
        }
    });
    out.sort_by_key(|l| {
        let possum: i64 = l[nneg..].iter().sum();
        (possum, l.clone())
    });
    out
}

/// Visit every nonnegative vector of the given length with coordinate sum
/// at most `bound`.
fn enumerate_compositions_upto(
    bound: i64,
    len: usize,
    buf: &mut Vec<i64>,
    visit: &mut impl FnMut(&Vec<i64>),
) {
    fn rec(
        bound_left: i64,
        pos: usize,
        len: usize,
        buf: &mut Vec<i64>,
        visit: &mut impl FnMut(&Vec<i64>),
    ) {
        if pos == len {
            visit(buf);
            return;
        }
        for v in 0..=bound_left {
            buf[pos] = v;
            rec(bound_left - v, pos + 1, len, buf, visit);
        }
        buf[pos] = 0;
    }
    rec(bound, 0, len, buf, visit);
}

/// All u in M_- with depth -u_{n+1} <= t_max, sorted by (depth, lex). The
/// first element (depth mu+1) is always b.
pub fn enumerate_interior_support(fam: &FamilyData, t_max: i64) -> Result<Vec<Vec<i64>>> {
    let min_depth = (fam.mu + 1) as i64;
    if t_max < min_depth {
        return Err(Error::DepthTooSmall { given: t_max, min: min_depth });
    }
    let n1 = fam.n + 1;
    let mut out = Vec::new();
    for k in min_depth..=t_max {
        let body_sum = fam.d * k; // sum of -u_i over the body coordinates
        let mut parts = vec![1i64; n1];
        collect_compositions_exact(body_sum, n1, &mut parts, 0, &mut |parts| {
            let mut u: Vec<i64> = parts.iter().map(|&c| -c).collect();
            u.push(-k);
            if fam.in_group(&u) {
                out.push(u);
            }
        });
    }
    out.sort_by_key(|u| (-u[fam.n + 1], u.clone()));
    debug_assert_eq!(out.first(), Some(&fam.b));
    Ok(out)
}

/// Visit every vector of `len` positive entries with exact sum `total`.
fn collect_compositions_exact(
    total: i64,
    len: usize,
    buf: &mut Vec<i64>,
    pos: usize,
    visit: &mut impl FnMut(&Vec<i64>),
) {
    let remaining_slots = (len - pos) as i64;
    if remaining_slots == 0 {
        if total == 0 {
            visit(buf);
        }
        return;
    }
    if total < remaining_slots {
        return; // every slot needs at least 1
    }
    if pos == len - 1 {
        buf[pos] = total;
        visit(buf);
        buf[pos] = 1;
        return;
    }
    for v in 1..=(total - (remaining_slots - 1)) {
        buf[pos] = v;
        collect_compositions_exact(total - v, len, buf, pos + 1, visit);
    }
    buf[pos] = 1;
}

// ---- shipped fixtures, used across the test suites ----

/// The Dwork family in P^n: x_0...x_n plus the n+1 power monomials.
pub fn dwork_family(n: usize) -> FamilyData {
    let d = (n + 1) as i64;
    let mut exps = vec![vec![1i64; n + 1]];
    for i in 0..=n {
        let mut col = vec![0i64; n + 1];
        col[i] = d;
        exps.push(col);
    }
    validate_family(&format!("dwork-n{n}"), n, d, &exps).expect("fixture is valid")
}

/// The split cubic family in P^5: x0x1x2 + x3x4x5 + the six cubes (mu = 1).
pub fn split_cubic_family() -> FamilyData {
    let mut exps = vec![
        vec![1, 1, 1, 0, 0, 0],
        vec![0, 0, 0, 1, 1, 1],
    ];
    for i in 0..6 {
        let mut col = vec![0i64; 6];
        col[i] = 3;
        exps.push(col);
    }
    validate_family("cubic-fourfold-split", 5, 3, &exps).expect("fixture is valid")
}

/// A quadric-surface family in P^3 with two distinct ones-subsets
/// ({x0x1, x2x3} and {x0x2, x1x3}), used to confirm canonicalization does
/// not leak into results.
pub fn quadric_family() -> FamilyData {
    let exps = quadric_exponents();
    validate_family("quadric-surface", 3, 2, &exps).expect("fixture is valid")
}

pub fn quadric_exponents() -> Vec<Vec<i64>> {
    vec![
        vec![1, 1, 0, 0],
        vec![0, 0, 1, 1],
        vec![1, 0, 1, 0],
        vec![0, 1, 0, 1],
        vec![2, 0, 0, 0],
        vec![0, 2, 0, 0],
        vec![0, 0, 2, 0],
        vec![0, 0, 0, 2],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dwork_n2_validates() {
        let fam = dwork_family(2);
        assert_eq!(fam.mu, 0);
        assert_eq!(fam.ones_subset, vec![0]);
        assert_eq!(fam.b, vec![-1, -1, -1, -1]);
        assert_eq!(fam.cols[0], vec![1, 1, 1]);
    }

    #[test]
    fn split_cubic_validates() {
        let fam = split_cubic_family();
        assert_eq!(fam.mu, 1);
        assert_eq!(fam.ones_subset, vec![0, 1]);
        assert_eq!(fam.b, vec![-1, -1, -1, -1, -1, -1, -2]);
    }

    #[test]
    fn conic_rejected() {
        // n=2, d=2: 2 does not divide 3
        let exps = vec![vec![1, 1, 0], vec![0, 0, 2], vec![2, 0, 0]];
        match validate_family("conic", 2, 2, &exps) {
            Err(Error::DegreeNotDividing { d: 2, n_plus_1: 3 }) => {}
            other => panic!("expected degree error, got {other:?}"),
        }
    }

    #[test]
    fn homogeneity_failure_reported() {
        let exps = vec![vec![1, 1, 1], vec![2, 0, 0]];
        match validate_family("bad", 2, 3, &exps) {
            Err(Error::NotHomogeneous { col: 1, sum: 2, d: 3 }) => {}
            other => panic!("expected homogeneity error, got {other:?}"),
        }
    }

    #[test]
    fn no_ones_subset_reported() {
        // diagonal cubic surface without the xyz monomial
        let exps = vec![vec![3, 0, 0], vec![0, 3, 0], vec![0, 0, 3]];
        match validate_family("diag", 2, 3, &exps) {
            Err(Error::NoOnesSubset { subset_size: 1 }) => {}
            other => panic!("expected ones-subset error, got {other:?}"),
        }
    }

    #[test]
    fn lattice_basis_examples() {
        let fam = dwork_family(2);
        let lb = relation_lattice_basis(&fam);
        assert_eq!(lb.rank, 1);
        let v = &lb.basis[0];
        assert!(v == &vec![3, -1, -1, -1] || v == &vec![-3, 1, 1, 1]);

        let fam2 = split_cubic_family();
        let lb2 = relation_lattice_basis(&fam2);
        assert_eq!(lb2.rank, 2);
        let a_plus = fam2.a_plus_matrix();
        for v in &lb2.basis {
            assert!(mat_vec(&a_plus, v).iter().all(|&x| x == 0));
        }
    }

    /// Independent oracle: scan the whole box |l_j| <= bound.
    fn cone_relations_bruteforce(fam: &FamilyData, bound: i64) -> Vec<Vec<i64>> {
        let n_mon = fam.num_monomials();
        let nneg = fam.mu + 1;
        let a_plus = fam.a_plus_matrix();
        let mut out = Vec::new();
        let mut l = vec![0i64; n_mon];
        fn rec(
            j: usize,
            n_mon: usize,
            nneg: usize,
            bound: i64,
            l: &mut Vec<i64>,
            a_plus: &Mat,
            out: &mut Vec<Vec<i64>>,
        ) {
            if j == n_mon {
                let pos: i64 = l[nneg..].iter().sum();
                if pos <= bound && mat_vec(a_plus, l).iter().all(|&x| x == 0) {
                    out.push(l.clone());
                }
                return;
            }
            let range: Vec<i64> = if j < nneg {
                (-bound..=0).collect()
            } else {
                (0..=bound).collect()
            };
            for v in range {
                l[j] = v;
                rec(j + 1, n_mon, nneg, bound, l, a_plus, out);
            }
            l[j] = 0;
        }
        rec(0, n_mon, nneg, bound, &mut l, &a_plus, &mut out);
        out.sort_by_key(|l| {
            let possum: i64 = l[nneg..].iter().sum();
            (possum, l.clone())
        });
        out
    }

    #[test]
    fn cone_enumeration_matches_bruteforce() {
        let fam = dwork_family(2);
        assert_eq!(enumerate_cone_relations(&fam, 0), vec![vec![0, 0, 0, 0]]);
        let got = enumerate_cone_relations(&fam, 3);
        assert_eq!(got, vec![vec![0, 0, 0, 0], vec![-3, 1, 1, 1]]);
        assert_eq!(got, cone_relations_bruteforce(&fam, 3));

        let fam2 = split_cubic_family();
        let got2 = enumerate_cone_relations(&fam2, 3);
        let expect2 = vec![
            vec![0, 0, 0, 0, 0, 0, 0, 0],
            vec![-3, 0, 1, 1, 1, 0, 0, 0],
            vec![0, -3, 0, 0, 0, 1, 1, 1],
        ];
        assert_eq!(got2, expect2);
        assert_eq!(got2, cone_relations_bruteforce(&fam2, 3));

        let fam3 = quadric_family();
        assert_eq!(
            enumerate_cone_relations(&fam3, 2),
            cone_relations_bruteforce(&fam3, 2)
        );
    }

    #[test]
    fn relations_sum_to_zero() {
        for fam in [dwork_family(2), dwork_family(4), split_cubic_family()] {
            for l in enumerate_cone_relations(&fam, 5) {
                assert_eq!(l.iter().sum::<i64>(), 0);
            }
        }
    }

    #[test]
    fn interior_support_examples() {
        let fam = dwork_family(2);
        assert_eq!(
            enumerate_interior_support(&fam, 1).unwrap(),
            vec![vec![-1, -1, -1, -1]]
        );
        // depth layer sizes computed by the congruence description of M
        let m4 = enumerate_interior_support(&fam, 4).unwrap();
        let count_at = |k: i64| m4.iter().filter(|u| u[3] == -k).count();
        assert_eq!(count_at(1), 1);
        assert_eq!(count_at(2), 4);
        assert_eq!(count_at(3), 10);
        assert_eq!(count_at(4), 19);

        let fam2 = split_cubic_family();
        assert_eq!(
            enumerate_interior_support(&fam2, 2).unwrap(),
            vec![vec![-1, -1, -1, -1, -1, -1, -2]]
        );
        assert!(matches!(
            enumerate_interior_support(&fam2, 1),
            Err(Error::DepthTooSmall { given: 1, min: 2 })
        ));
        // every returned u at depth k satisfies the degree equation
        for u in enumerate_interior_support(&fam2, 4).unwrap() {
            let body: i64 = u[..6].iter().sum();
            assert_eq!(body, 3 * u[6]);
        }
    }

    #[test]
    fn b_unique_at_shallowest_depth() {
        for fam in [dwork_family(2), dwork_family(4), split_cubic_family(), quadric_family()] {
            let depth = (fam.mu + 1) as i64;
            let layer: Vec<_> = enumerate_interior_support(&fam, depth)
                .unwrap()
                .into_iter()
                .filter(|u| -u[fam.n + 1] == depth)
                .collect();
            assert_eq!(layer, vec![fam.b.clone()]);
        }
    }

    #[test]
    fn quadric_has_two_ones_subsets_and_canonical_pick() {
        let exps = quadric_exponents();
        let fam = validate_family("q", 3, 2, &exps).unwrap();
        assert_eq!(fam.ones_subset, vec![0, 1]);
        let alt = validate_family_with_subset("q-alt", 3, 2, &exps, &[2, 3]).unwrap();
        assert_eq!(alt.ones_subset, vec![2, 3]);
        assert_eq!(alt.cols[0], vec![1, 0, 1, 0]);
        // a bogus subset is rejected
        assert!(validate_family_with_subset("q-bad", 3, 2, &exps, &[0, 2]).is_err());
    }

    #[test]
    fn permutation_bookkeeping() {
        // put the ones monomial last; validation must move it to the front
        let exps = vec![
            vec![3, 0, 0],
            vec![0, 3, 0],
            vec![0, 0, 3],
            vec![1, 1, 1],
        ];
        let fam = validate_family("hesse-shuffled", 2, 3, &exps).unwrap();
        assert_eq!(fam.perm, vec![3, 0, 1, 2]);
        assert_eq!(fam.cols[0], vec![1, 1, 1]);
        let fiber = [10u64, 20, 30, 40];
        assert_eq!(fam.permute_fiber(&fiber), vec![40, 10, 20, 30]);
    }
}
