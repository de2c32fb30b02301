//! The truncated dual Dwork operator at a Teichmuller fiber and the p-adic
//! power iteration that extracts its minimal-valuation eigenvalue.
//!
//! The matrix acts on the basis {gamma0^{u_{n+1}} x^u : u in M_-, depth <= T}
//! with entry (u, v) = gamma0^{v_{n+1} - u_{n+1}} theta_{u - p v}(fiber).
//! In this normalization every entry in column v has ord_pi at least
//! (p-1) * depth(v), the (b, b) entry is exactly the weight value
//! theta_{-(p-1)b}, and the distinguished eigenvalue is q^{mu+1} times the
//! unit whose q-quotient is the distinguished zeta root.

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::family::{enumerate_interior_support, FamilyData};
use crate::ff::FqElem;
use crate::hasse::{hasse_polynomial, hasse_residue, HassePolynomial};
use crate::margins::MarginReport;
use crate::splitting::{eval_theta_u, theta_coefficients, CoeffTable, LambdaPowers};
use crate::tower::{PiVal, RamifiedElement, RingTower, UnramifiedElement};

#[derive(Debug, Clone)]
pub struct FrobeniusMatrix {
    /// Interior points of depth <= T, sorted (depth, lex); basis[0] = b.
    pub basis: Vec<Vec<i64>>,
    /// Dense row-major entries, dim x dim.
    pub entries: Vec<RamifiedElement>,
    pub dim: usize,
    /// Which Frobenius twist of the fiber this step was built at.
    pub step_index: usize,
    pub t_depth: i64,
}

impl FrobeniusMatrix {
    pub fn entry(&self, row: usize, col: usize) -> &RamifiedElement {
        &self.entries[row * self.dim + col]
    }
}

/// The a-step composite operator (step i holds the twist by p^i).
#[derive(Debug, Clone)]
pub struct FrobeniusOperator {
    pub steps: Vec<FrobeniusMatrix>,
}

impl FrobeniusOperator {
    pub fn dim(&self) -> usize {
        self.steps[0].dim
    }

    pub fn basis(&self) -> &[Vec<i64>] {
        &self.steps[0].basis
    }
}

#[derive(Debug, Clone)]
pub struct EigenDiagnostics {
    /// ord_pi of each successive eigenvalue estimate.
    pub estimate_ords: Vec<u64>,
    /// ord_pi lower bound of successive estimate differences.
    pub delta_ords: Vec<u64>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct UnitRootResult {
    /// The distinguished root as an unramified (in fact rational) element;
    /// its precision tag is the certified digit count.
    pub rho_min: UnramifiedElement,
    /// rho_min is certified modulo p^certified_digits.
    pub certified_digits: u32,
    pub iterations: usize,
    pub t_used: i64,
    pub diagnostics: EigenDiagnostics,
}

impl UnitRootResult {
    pub fn residue(&self) -> BigUint {
        self.rho_min.coords[0].clone()
    }
}

/// Precision plan for a unit-root run: every division loss the pipeline can
/// incur, with slack, in pi-digits.
fn engine_k_budget(p: u64, a: usize, mu: usize, m_target: u32, t_depth: i64) -> u64 {
    let ram = p - 1;
    let omega = a as u64 * (mu as u64 + 1) * ram;
    let iters = m_target as u64 + a as u64 + 6;
    (m_target as u64 + a as u64 + 2) * ram
        + iters * (omega + p)
        + t_depth as u64 * ram
        + 6 * ram
        + 16
}

/// Shared per-(family, p, a, T) state for building operators at many fibers.
pub struct FrobeniusEngine {
    pub fam: FamilyData,
    pub tower: RingTower,
    pub theta: CoeffTable,
    pub hasse: HassePolynomial,
    pub t_depth: i64,
    pub basis: Vec<Vec<i64>>,
    pub m_target: u32,
    gamma0_pows: Vec<RamifiedElement>,
    max_weight_index: usize,
}

impl FrobeniusEngine {
    pub fn new(fam: &FamilyData, p: u64, a: usize, m_target: u32, t_override: Option<i64>) -> Result<Self> {
        let mu = fam.mu;
        let t_depth = t_override.unwrap_or(mu as i64 + 1 + m_target as i64);
        if t_depth < mu as i64 + 1 {
            return Err(Error::DepthTooSmall { given: t_depth, min: mu as i64 + 1 });
        }
        let k_budget = engine_k_budget(p, a, mu, m_target, t_depth);
        let m_work = k_budget.div_ceil(p - 1) as u32 + 2;
        let tower = RingTower::new(p, a, m_work, (p - 1) * m_work as u64)?;
        // deepest weight index: w_{n+1} = p * depth(v) - depth(u) <= p T - (mu+1)
        let max_weight_index = (p as i64 * t_depth - mu as i64 - 1) as usize;
        let theta = theta_coefficients(&tower, max_weight_index);
        let hasse = hasse_polynomial(fam, p);
        let basis = enumerate_interior_support(fam, t_depth)?;
        let mut gamma0_pows = Vec::with_capacity(t_depth as usize + 2);
        let m = tower.gamma0_full().coeffs[0].m;
        gamma0_pows.push(tower.r_from_u64(1, m));
        for e in 1..=(t_depth as usize + 1) {
            let next = tower.r_mul(&gamma0_pows[e - 1], tower.gamma0_full());
            gamma0_pows.push(next);
        }
        Ok(FrobeniusEngine {
            fam: fam.clone(),
            tower,
            theta,
            hasse,
            t_depth,
            basis,
            m_target,
            gamma0_pows,
            max_weight_index,
        })
    }

    pub fn p(&self) -> u64 {
        self.tower.p
    }

    pub fn a(&self) -> usize {
        self.tower.a
    }

    pub fn omega(&self) -> u64 {
        self.a() as u64 * (self.fam.mu as u64 + 1) * (self.p() - 1)
    }

    pub fn in_domain(&self, lam: &[FqElem]) -> Result<bool> {
        Ok(hasse_residue(&self.fam, &self.tower.fq, &self.hasse, lam)?.1)
    }

    /// Teichmuller lift of the fiber at full working precision.
    pub fn lift_fiber(&self, lam: &[FqElem]) -> Vec<UnramifiedElement> {
        let m = self.tower.gamma0_full().coeffs[0].m;
        lam.iter().map(|&c| self.tower.teichmuller_at(c, m)).collect()
    }

    /// One step matrix at the twist lambda-hat^{p^i}.
    pub fn build_step_matrix(
        &self,
        lam_hat: &[UnramifiedElement],
        step_index: usize,
    ) -> Result<FrobeniusMatrix> {
        let t = &self.tower;
        let p = t.p;
        let n1 = self.fam.n + 1;
        let twisted: Vec<UnramifiedElement> = lam_hat
            .iter()
            .map(|x| t.u_frobenius_pow(x, step_index))
            .collect();
        let powers = LambdaPowers::new(t, &twisted, self.max_weight_index);
        let dim = self.basis.len();
        let m = self.theta.entries[0].coeffs[0].m;
        let zero = t.r_zero_at(m);
        let mut entries = vec![zero; dim * dim];
        // weight values are shared between many (u, v) pairs
        let mut cache: std::collections::BTreeMap<Vec<i64>, RamifiedElement> =
            std::collections::BTreeMap::new();
        for (col, v) in self.basis.iter().enumerate() {
            for (row, u) in self.basis.iter().enumerate() {
                let mut w = vec![0i64; self.fam.n + 2];
                let mut nonneg = true;
                for i in 0..=n1 {
                    w[i] = u[i] - p as i64 * v[i];
                    if w[i] < 0 {
                        nonneg = false;
                        break;
                    }
                }
                if !nonneg {
                    continue;
                }
                let weight = cache
                    .entry(w.clone())
                    .or_insert_with(|| eval_theta_u(&self.fam, t, &self.theta, &w, &powers))
                    .clone();
                if t.r_is_zero(&weight) {
                    continue;
                }
                // gamma0^{v_{n+1} - u_{n+1}}; negative exponents divide exactly
                let e = v[n1] - u[n1];
                let value = if e >= 0 {
                    t.r_mul(&weight, &self.gamma0_pows[e as usize])
                } else {
                    t.r_div_gamma0_pow(&weight, (-e) as u64)?
                };
                entries[row * dim + col] = value;
            }
        }
        Ok(FrobeniusMatrix {
            basis: self.basis.clone(),
            entries,
            dim,
            step_index,
            t_depth: self.t_depth,
        })
    }

    /// The a-step operator at a fiber (steps at twists 0, 1, ..., a-1).
    pub fn operator(&self, lam: &[FqElem]) -> Result<FrobeniusOperator> {
        let lam_hat = self.lift_fiber(lam);
        let steps = (0..self.a())
            .map(|i| self.build_step_matrix(&lam_hat, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(FrobeniusOperator { steps })
    }

    /// Apply the composite operator: the step with the deepest twist acts
    /// first, matching the operator composition order.
    pub fn apply(&self, op: &FrobeniusOperator, v: &[RamifiedElement]) -> Vec<RamifiedElement> {
        let mut x = v.to_vec();
        for step in op.steps.iter().rev() {
            x = self.mat_vec(step, &x);
        }
        x
    }

    fn mat_vec(&self, mat: &FrobeniusMatrix, v: &[RamifiedElement]) -> Vec<RamifiedElement> {
        let t = &self.tower;
        let m = self.theta.entries[0].coeffs[0].m;
        (0..mat.dim)
            .map(|row| {
                let mut acc = t.r_zero_at(m);
                for (col, x) in v.iter().enumerate() {
                    let e = mat.entry(row, col);
                    if t.r_is_zero(e) || t.r_is_zero(x) {
                        continue;
                    }
                    acc = t.r_add(&acc, &t.r_mul(e, x));
                }
                acc
            })
            .collect()
    }

    /// Explicit composite matrix product (used by the trace check).
    pub fn composite_matrix(&self, op: &FrobeniusOperator) -> FrobeniusMatrix {
        let t = &self.tower;
        let m = self.theta.entries[0].coeffs[0].m;
        let mut acc = op.steps[0].clone();
        for step in &op.steps[1..] {
            let dim = acc.dim;
            let mut entries = vec![t.r_zero_at(m); dim * dim];
            for row in 0..dim {
                for mid in 0..dim {
                    let left = acc.entry(row, mid);
                    if t.r_is_zero(left) {
                        continue;
                    }
                    for col in 0..dim {
                        let right = step.entry(mid, col);
                        if t.r_is_zero(right) {
                            continue;
                        }
                        let prod = t.r_mul(left, right);
                        entries[row * dim + col] = t.r_add(&entries[row * dim + col], &prod);
                    }
                }
            }
            acc = FrobeniusMatrix {
                basis: acc.basis,
                entries,
                dim,
                step_index: usize::MAX,
                t_depth: acc.t_depth,
            };
        }
        acc
    }

    /// Power iteration with b-component normalization. The spectral gap is a
    /// clean factor p, so after k passes the tail of the estimate sequence
    /// is bounded by p^{mu+1} p^k: the k-th estimate carries omega + k(p-1)
    /// certified pi-digits. Every observed difference is checked against
    /// that floor; failures to contract are reported with the history.
    pub fn minimal_eigenvalue(
        &self,
        op: &FrobeniusOperator,
        max_iters: usize,
    ) -> Result<(RamifiedElement, EigenDiagnostics)> {
        let t = &self.tower;
        let m = self.theta.entries[0].coeffs[0].m;
        let omega = self.omega();
        let ram = self.p() - 1;
        let stop_level = omega + (self.m_target as u64 + self.a() as u64 + 1) * ram;
        // iterations needed so the rate floor omega + k(p-1) clears the stop level
        let needed = (stop_level - omega).div_ceil(ram) as usize + 1;
        if needed > max_iters {
            return Err(Error::EigenDiverged(format!(
                "target precision needs {needed} iterations, budget is {max_iters}"
            )));
        }

        let mut v: Vec<RamifiedElement> = vec![t.r_zero_at(m); op.dim()];
        v[0] = t.r_from_u64(1, m);
        let mut estimate: Option<RamifiedElement> = None;
        let mut diag = EigenDiagnostics {
            estimate_ords: Vec::new(),
            delta_ords: Vec::new(),
            iterations: 0,
        };
        for iter in 1..=needed {
            let w = self.apply(op, &v);
            let eps = w[0].clone();
            diag.iterations = iter;
            match t.pi_valuation(&eps) {
                PiVal::Exact(o) if o == omega => diag.estimate_ords.push(o),
                other => {
                    return Err(Error::EigenDiverged(format!(
                        "estimate {iter} has ord {other:?}, expected exactly {omega} \
                         (fiber outside the Hasse domain, or T/K too small); \
                         history {:?}",
                        diag.estimate_ords
                    )));
                }
            }
            if let Some(prev) = &estimate {
                let delta = t.r_sub(&eps, prev);
                let dord = t.pi_valuation(&delta).lower_bound();
                diag.delta_ords.push(dord);
                // Prop 5.13 rate floor for the (iter-1)-th difference
                let floor = (omega + (iter as u64 - 1) * ram).min(delta.kprec);
                if dord < floor {
                    return Err(Error::EigenDiverged(format!(
                        "difference {} has ord {dord}, below the contraction floor {floor}; \
                         delta history {:?}",
                        iter - 1,
                        diag.delta_ords
                    )));
                }
            }
            if iter == needed {
                return Ok((eps, diag));
            }
            estimate = Some(eps.clone());
            // renormalize: v = w / eps (every coordinate has ord >= omega)
            let unit = t.r_div_pi_pow(&eps, omega)?;
            let unit_inv = t.r_invert(&unit)?;
            v = w
                .iter()
                .map(|x| {
                    let y = t.r_mul(x, &unit_inv);
                    t.r_div_pi_pow(&y, omega)
                })
                .collect::<Result<Vec<_>>>()?;
        }
        unreachable!("loop returns at iter == needed")
    }

    /// The distinguished root at a fiber: eigenvalue / q, certified, with
    /// ramified and Galois coordinates checked to vanish.
    pub fn unit_root(&self, lam: &[FqElem], max_iters: usize) -> Result<UnitRootResult> {
        if !self.in_domain(lam)? {
            return Err(Error::OutOfDomain);
        }
        let op = self.operator(lam)?;
        let (eig, diag) = self.minimal_eigenvalue(&op, max_iters)?;
        self.certify_root(&eig, diag)
    }

    fn certify_root(
        &self,
        eig: &RamifiedElement,
        diag: EigenDiagnostics,
    ) -> Result<UnitRootResult> {
        let t = &self.tower;
        let ram = self.p() - 1;
        let a = self.a() as u64;
        let mu = self.fam.mu as u64;

        // three ceilings on the certificate: stored precision, the
        // contraction-rate tail bound after k iterations, and the
        // truncation-error floor of the depth-T matrix (columns beyond T
        // act above pi^{(p-1)(T+1)})
        let rate_floor = self.omega() + diag.iterations as u64 * ram;
        let trunc_floor = ram * (self.t_depth as u64 + 1);
        let cert_pi = eig.kprec.min(rate_floor).min(trunc_floor);
        let cert_digits_eig = (cert_pi / ram) as u32;
        if cert_digits_eig as u64 <= a * (mu + 1) + 1 {
            return Err(Error::PrecisionUnderflow {
                needed: (a * (mu + 1) + 2) as i64,
                have: cert_digits_eig as i64,
            });
        }

        // no ramified component below the certificate
        let unram_part = t.r_from_unramified(&eig.coeffs[0]);
        let ram_diff = t.r_sub(eig, &unram_part);
        if !t.pi_valuation(&ram_diff).at_least(cert_pi) {
            return Err(Error::RationalityFailure(format!(
                "ramified coordinates of the eigenvalue do not vanish: {:?} < {cert_pi}",
                t.pi_valuation(&ram_diff)
            )));
        }
        // Galois-rational: extension coordinates vanish mod the certificate
        let scalar = eig.coeffs[0].coords[0].clone();
        let pm = BigUint::from(t.p).pow(cert_digits_eig);
        for (i, c) in eig.coeffs[0].coords.iter().enumerate().skip(1) {
            if !(c % &pm).eq(&BigUint::ZERO) {
                return Err(Error::RationalityFailure(format!(
                    "extension coordinate {i} of the eigenvalue is nonzero mod p^{cert_digits_eig}"
                )));
            }
        }

        // divide by q = p^a exactly
        let pa = BigUint::from(t.p).pow(self.a() as u32);
        let (rho, rem) = num_integer::Integer::div_rem(&scalar, &pa);
        if !rem.eq(&BigUint::ZERO) {
            return Err(Error::RationalityFailure(
                "eigenvalue is not divisible by q".into(),
            ));
        }
        let cert_digits = cert_digits_eig - self.a() as u32;
        let rho = rho % BigUint::from(t.p).pow(cert_digits);

        // ord_q(rho) = mu exactly
        let ord = crate::arith::ord_p_biguint(&rho, t.p).unwrap_or(cert_digits as u64 + 1);
        if ord != a * mu {
            return Err(Error::RationalityFailure(format!(
                "distinguished root has ord_p {ord}, expected {}",
                a * mu
            )));
        }

        let mut coords = vec![BigUint::ZERO; self.a()];
        coords[0] = rho;
        Ok(UnitRootResult {
            rho_min: UnramifiedElement { coords, m: cert_digits },
            certified_digits: cert_digits,
            iterations: diag.iterations,
            t_used: self.t_depth,
            diagnostics: diag,
        })
    }

    /// Trace of the truncated composite against the product of the ones
    /// weight values, modulo p q^{mu+1}. Diagonal entries deeper than the
    /// cut sit above the modulus, so any T >= mu+1 certifies the congruence.
    pub fn trace_congruence_check(&self, lam: &[FqElem]) -> Result<MarginReport> {
        let t = &self.tower;
        let ram = self.p() - 1;
        let required = ram * (1 + self.a() as u64 * (self.fam.mu as u64 + 1));
        let op = self.operator(lam)?;
        let composite = self.composite_matrix(&op);
        let m = self.theta.entries[0].coeffs[0].m;
        let mut trace = t.r_zero_at(m);
        for i in 0..composite.dim {
            trace = t.r_add(&trace, composite.entry(i, i));
        }
        // product of theta_{-(p-1)b} at the twists
        let lam_hat = self.lift_fiber(lam);
        let target = HassePolynomial::target(&self.fam, t.p);
        let mut rhs = t.r_from_u64(1, m);
        for i in 0..self.a() {
            let twisted: Vec<UnramifiedElement> = lam_hat
                .iter()
                .map(|x| t.u_frobenius_pow(x, i))
                .collect();
            let powers = LambdaPowers::new(t, &twisted, self.max_weight_index);
            let w = eval_theta_u(&self.fam, t, &self.theta, &target, &powers);
            rhs = t.r_mul(&rhs, &w);
        }
        let diff = t.r_sub(&trace, &rhs);
        let mut report = MarginReport::default();
        if diff.kprec < required {
            report.push_uncertified(format!(
                "trace congruence: precision {} below required {required}",
                diff.kprec
            ));
            return Ok(report);
        }
        report.push("trace vs weight product", required, t.pi_valuation(&diff));
        Ok(report)
    }
}

/// Characteristic polynomial of a small truncated matrix by cofactor
/// expansion (an independent cross-check that the power-iteration value is
/// an eigenvalue of the truncated operator).
pub fn char_poly_check(
    engine: &FrobeniusEngine,
    mat: &FrobeniusMatrix,
    candidate: &RamifiedElement,
    required: u64,
) -> Result<PiVal> {
    let t = &engine.tower;
    let dim = mat.dim;
    if dim > 6 {
        return Err(Error::Config(format!(
            "characteristic-polynomial cross-check limited to dim <= 6 (got {dim})"
        )));
    }
    let m = mat.entries[0].coeffs[0].m;
    // poly coefficients in x, low degree first
    type Poly = Vec<RamifiedElement>;
    let t_ref = t;
    let poly_mul = |a: &Poly, b: &Poly| -> Poly {
        let mut out = vec![t_ref.r_zero_at(m); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let prod = t_ref.r_mul(x, y);
                out[i + j] = t_ref.r_add(&out[i + j], &prod);
            }
        }
        out
    };
    let poly_add = |a: &Poly, b: &Poly| -> Poly {
        let n = a.len().max(b.len());
        (0..n)
            .map(|i| {
                let zero = t_ref.r_zero_at(m);
                let x = a.get(i).unwrap_or(&zero);
                let y = b.get(i).unwrap_or(&zero);
                t_ref.r_add(x, y)
            })
            .collect()
    };
    // det(M - x I) by recursive expansion along the first row
    fn det(
        rows: &[usize],
        cols: &[usize],
        mat: &FrobeniusMatrix,
        t: &RingTower,
        m: u32,
        poly_mul: &dyn Fn(&Vec<RamifiedElement>, &Vec<RamifiedElement>) -> Vec<RamifiedElement>,
        poly_add: &dyn Fn(&Vec<RamifiedElement>, &Vec<RamifiedElement>) -> Vec<RamifiedElement>,
    ) -> Vec<RamifiedElement> {
        if rows.is_empty() {
            return vec![t.r_from_u64(1, m)];
        }
        let r = rows[0];
        let rest: Vec<usize> = rows[1..].to_vec();
        let mut acc = vec![t.r_zero_at(m)];
        for (pos, &c) in cols.iter().enumerate() {
            // entry polynomial: M[r][c] - x [r == c]
            let mut cell = vec![mat.entry(r, c).clone()];
            if r == c {
                cell.push(t.r_from_bigint(&num_bigint::BigInt::from(-1), m));
            }
            let sub_cols: Vec<usize> =
                cols.iter().enumerate().filter(|&(i, _)| i != pos).map(|(_, &x)| x).collect();
            let minor = det(&rest, &sub_cols, mat, t, m, poly_mul, poly_add);
            let mut term = poly_mul(&cell, &minor);
            if pos % 2 == 1 {
                term = term.iter().map(|x| t.r_neg(x)).collect();
            }
            acc = poly_add(&acc, &term);
        }
        acc
    }
    let idx: Vec<usize> = (0..dim).collect();
    let cp = det(&idx, &idx, mat, t, m, &poly_mul, &poly_add);
    // evaluate at the candidate
    let mut value = t.r_zero_at(m);
    let mut pow = t.r_from_u64(1, m);
    for c in &cp {
        value = t.r_add(&value, &t.r_mul(c, &pow));
        pow = t.r_mul(&pow, candidate);
    }
    let v = t.pi_valuation(&value);
    if !v.at_least(required.min(value.kprec)) {
        return Err(Error::EigenDiverged(format!(
            "characteristic polynomial does not vanish at the candidate: {v:?}"
        )));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::dwork_family;

    #[test]
    fn hesse_f7_unit_root_smoke() {
        let fam = dwork_family(2);
        let engine = FrobeniusEngine::new(&fam, 7, 1, 3, None).unwrap();
        // lambda = (1,1,1,1) is in the Hasse domain at p = 7
        let root = engine.unit_root(&[1, 1, 1, 1], 16).unwrap();
        assert!(root.certified_digits >= 3);
        // ordinary cubic: unit root, so ord_p = 0
        assert_eq!(crate::arith::ord_p_biguint(&root.residue(), 7), Some(0));
        // contraction: the j-th difference clears the rate floor omega + j(p-1)
        let omega = engine.omega();
        for (j, &d) in root.diagnostics.delta_ords.iter().enumerate() {
            assert!(
                d >= omega + (j as u64 + 1) * 6,
                "delta {j} below the contraction floor: {:?}",
                root.diagnostics.delta_ords
            );
        }
    }

    #[test]
    fn one_by_one_truncation_is_the_bb_entry() {
        let fam = dwork_family(2);
        let engine = FrobeniusEngine::new(&fam, 5, 1, 1, Some(1)).unwrap();
        assert_eq!(engine.basis.len(), 1);
        // (1,1,1,1) is supersingular at p = 5; (1,1,1,2) has H-bar = 1
        let lam = [1 as FqElem, 1, 1, 2];
        assert!(engine.in_domain(&lam).unwrap());
        let op = engine.operator(&lam).unwrap();
        let (eig, _) = engine.minimal_eigenvalue(&op, 8).unwrap();
        let bb = op.steps[0].entry(0, 0);
        let t = &engine.tower;
        let diff = t.r_sub(&eig, bb);
        assert!(t.pi_valuation(&diff).at_least(eig.kprec.min(bb.kprec)));
    }

    #[test]
    fn bb_entry_matches_hasse_congruence() {
        // the (b,b) entry is theta_{-(p-1)b}, which is (-p)^{mu+1} H(fiber)
        // mod p^{mu+2}
        let fam = dwork_family(2);
        let p = 5u64;
        let engine = FrobeniusEngine::new(&fam, p, 1, 2, None).unwrap();
        let t = &engine.tower;
        let lam = [2 as FqElem, 1, 1, 3];
        let lam_hat = engine.lift_fiber(&lam);
        let mat = engine.build_step_matrix(&lam_hat, 0).unwrap();
        let bb = mat.entry(0, 0);
        // evaluate (-p) H at the Teichmuller lift exactly
        let m = engine.theta.entries[0].coeffs[0].m;
        let mut acc = t.r_zero_at(m);
        for (nu, term) in &engine.hasse.terms {
            let mut scalar = t.u_from_ratio(
                &num_bigint::BigInt::from(-(p as i64)),
                &term.den,
                m,
            );
            for (j, &e) in nu.iter().enumerate() {
                scalar = t.u_mul(&scalar, &t.u_pow(&lam_hat[j], e as u64));
            }
            acc = t.r_add(&acc, &t.r_from_unramified(&scalar));
        }
        let diff = t.r_sub(bb, &acc);
        let required = (p - 1) * 2; // p^{mu+2} with mu = 0
        assert!(
            t.pi_valuation(&diff).at_least(required),
            "Lemma 5.7 at the fiber: {:?}",
            t.pi_valuation(&diff)
        );
    }

    #[test]
    fn column_valuation_bounds() {
        let fam = dwork_family(2);
        let p = 3u64;
        let engine = FrobeniusEngine::new(&fam, p, 1, 2, None).unwrap();
        let lam_hat = engine.lift_fiber(&[1, 1, 2, 2]);
        let mat = engine.build_step_matrix(&lam_hat, 0).unwrap();
        let t = &engine.tower;
        for (col, v) in mat.basis.iter().enumerate() {
            let depth = (-v[fam.n + 1]) as u64;
            for row in 0..mat.dim {
                let e = mat.entry(row, col);
                assert!(
                    t.pi_valuation(e).at_least(((p - 1) * depth).min(e.kprec)),
                    "column bound at ({row},{col})"
                );
            }
        }
    }

    #[test]
    fn zero_pattern_outside_translated_cone() {
        let fam = dwork_family(2);
        let engine = FrobeniusEngine::new(&fam, 3, 1, 2, None).unwrap();
        let lam_hat = engine.lift_fiber(&[1, 1, 1, 1]);
        let mat = engine.build_step_matrix(&lam_hat, 0).unwrap();
        let t = &engine.tower;
        for (row, u) in mat.basis.iter().enumerate() {
            for (col, v) in mat.basis.iter().enumerate() {
                let w: Vec<i64> = u.iter().zip(v).map(|(&a, &b)| a - 3 * b).collect();
                if w.iter().any(|&x| x < 0) {
                    assert!(t.r_is_zero(mat.entry(row, col)));
                }
            }
        }
    }

    #[test]
    fn out_of_domain_detected_by_iteration() {
        // p = 5 Hesse: find a supersingular fiber by scanning H-bar
        let fam = dwork_family(2);
        let engine = FrobeniusEngine::new(&fam, 5, 1, 2, None).unwrap();
        let mut bad = None;
        'outer: for l1 in 1..5u16 {
            for l2 in 1..5u16 {
                if let Ok((_, false)) = hasse_residue(
                    &fam,
                    &engine.tower.fq,
                    &engine.hasse,
                    &[l1, l2, 1, 1],
                ) {
                    bad = Some([l1, l2, 1, 1]);
                    break 'outer;
                }
            }
        }
        let bad = bad.expect("supersingular fibers exist at p = 5");
        assert!(matches!(engine.unit_root(&bad, 12), Err(Error::OutOfDomain)));
        // the iteration itself must also flag it
        let op = engine.operator(&bad).unwrap();
        assert!(matches!(
            engine.minimal_eigenvalue(&op, 12),
            Err(Error::EigenDiverged(_))
        ));
    }

    #[test]
    fn char_poly_cross_check_small_depth() {
        let fam = dwork_family(2);
        let engine = FrobeniusEngine::new(&fam, 7, 1, 1, Some(2)).unwrap();
        assert!(engine.basis.len() <= 6);
        let lam = [1 as FqElem, 1, 1, 1];
        let op = engine.operator(&lam).unwrap();
        let (eig, _) = engine.minimal_eigenvalue(&op, 10).unwrap();
        let v = char_poly_check(&engine, &op.steps[0], &eig, eig.kprec.min(30)).unwrap();
        assert!(v.at_least(eig.kprec.min(30)));
    }

    #[test]
    fn trace_congruence_hesse() {
        let fam = dwork_family(2);
        for p in [5u64, 7] {
            let engine = FrobeniusEngine::new(&fam, p, 1, 2, None).unwrap();
            let report = engine.trace_congruence_check(&[1, 2, 1, 1]).unwrap();
            assert!(report.uncertified.is_empty());
            assert!(report.all_pass(), "trace congruence at p={p}: {:?}", report.failures());
        }
    }

    #[test]
    fn t_stability() {
        let fam = dwork_family(2);
        let e1 = FrobeniusEngine::new(&fam, 7, 1, 2, None).unwrap();
        let e2 = FrobeniusEngine::new(&fam, 7, 1, 2, Some(e1.t_depth + 1)).unwrap();
        let lam = [1 as FqElem, 3, 2, 1];
        if e1.in_domain(&lam).unwrap() {
            let r1 = e1.unit_root(&lam, 12).unwrap();
            let r2 = e2.unit_root(&lam, 12).unwrap();
            let digits = r1.certified_digits.min(r2.certified_digits);
            let pm = BigUint::from(7u64).pow(digits);
            assert_eq!(r1.residue() % &pm, r2.residue() % &pm);
        }
    }
}
