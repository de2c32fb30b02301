//! The coupled ring tower F_q, Z_q mod p^M, and Z_q[pi] mod pi^K, where pi
//! satisfies the Eisenstein relation Phi_p(1 + pi) = 0 (so ord_pi(p) = p-1).
//!
//! Unramified elements are coordinate vectors in the power basis of a lifted
//! irreducible modulus; ramified elements are polynomials in pi of degree
//! < p-1 over the unramified layer. Every element carries its own precision
//! tag and binary operations produce min-precision results, so precision is
//! never silently overstated.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Zero};

use crate::arith::{is_prime, mod_inverse};
use crate::error::{Error, Result};
use crate::ff::{FieldContext, FqElem};

/// A pi-adic valuation claim. `Exact` is only ever reported strictly below
/// the element's stored precision; anything at or beyond precision degrades
/// to `AtLeast`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiVal {
    Exact(u64),
    AtLeast(u64),
}

impl PiVal {
    pub fn lower_bound(self) -> u64 {
        match self {
            PiVal::Exact(v) | PiVal::AtLeast(v) => v,
        }
    }

    pub fn at_least(self, v: u64) -> bool {
        self.lower_bound() >= v
    }

    pub fn exact(self) -> Option<u64> {
        match self {
            PiVal::Exact(v) => Some(v),
            PiVal::AtLeast(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnramifiedElement {
    /// Power-basis coordinates over Z/p^m, length = extension degree a.
    pub coords: Vec<BigUint>,
    /// Known modulo p^m.
    pub m: u32,
}

#[derive(Debug, Clone)]
pub struct RamifiedElement {
    /// Coordinates in the basis 1, pi, ..., pi^{p-2}; all share one m.
    pub coeffs: Vec<UnramifiedElement>,
    /// Known modulo pi^kprec.
    pub kprec: u64,
}

pub struct RingTower {
    pub p: u64,
    pub a: usize,
    /// Default p-adic precision exponent for elements handed out.
    pub m_default: u32,
    /// Default pi-adic precision for ramified elements handed out.
    pub k_default: u64,
    /// Internal working precision (gamma0 refinement headroom).
    m_work: u32,
    /// Residue field F_q.
    pub fq: FieldContext,
    /// Monic degree-a modulus lifted to Z, constant coefficient first.
    pub modulus: Vec<BigUint>,
    /// Binomials C(p, k) for k = 1..p-1; pi^{p-1} = -sum C(p,k) pi^{k-1}.
    phi: Vec<u64>,
    p_pows: Vec<BigUint>,
    /// Unit E with pi^{p-1} = -p E, and its inverse.
    e_unit_inv: Option<RamifiedElement>,
    gamma0_full: RamifiedElement,
    /// Inverse of the unit gamma0 / pi (for exact division by gamma0 powers).
    gamma0_unit_inv: Option<RamifiedElement>,
}

impl std::fmt::Debug for RingTower {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RingTower")
            .field("p", &self.p)
            .field("a", &self.a)
            .field("m_default", &self.m_default)
            .field("k_default", &self.k_default)
            .finish()
    }
}

/// Build the tower. Requires p prime, a >= 1, M >= 1, 1 <= K <= (p-1)M.
pub fn make_ring_tower(p: u64, a: usize, m: u32, k: u64) -> Result<RingTower> {
    RingTower::new(p, a, m, k)
}

impl RingTower {
    pub fn new(p: u64, a: usize, m_prec: u32, k_prec: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if a < 1 || m_prec < 1 || k_prec < 1 {
            return Err(Error::PrecisionBounds(format!(
                "need a >= 1, M >= 1, K >= 1 (got a={a}, M={m_prec}, K={k_prec})"
            )));
        }
        let ram = (p - 1) as u64;
        if k_prec > ram * m_prec as u64 {
            return Err(Error::PrecisionBounds(format!(
                "K = {k_prec} exceeds (p-1)M = {}",
                ram * m_prec as u64
            )));
        }
        let fq = FieldContext::new(p, a)?;

        // headroom for the gamma0 refinement: divisions by p^i for terms of
        // the defining series, over ~log2 K quadratic iterations
        let target_k = ram * m_prec as u64;
        let series_top = gamma0_series_top(p, target_k + 2 * ram);
        let newton_iters = 64 - (target_k + 4).leading_zeros() as u32 + 2;
        let m_work = m_prec + (series_top as u32 + 1) * (newton_iters + 2) + 4;

        let mut p_pows = Vec::with_capacity(m_work as usize + 1);
        let mut acc = BigUint::one();
        for _ in 0..=m_work {
            p_pows.push(acc.clone());
            acc *= p;
        }

        let modulus: Vec<BigUint> = fq.modulus.iter().map(|&c| BigUint::from(c)).collect();
        let phi: Vec<u64> = (1..p).map(|k| binom_u64(p, k)).collect();

        let mut tower = RingTower {
            p,
            a,
            m_default: m_prec,
            k_default: k_prec,
            m_work,
            fq,
            modulus,
            phi,
            p_pows,
            e_unit_inv: None,
            gamma0_full: RamifiedElement { coeffs: vec![], kprec: 0 },
            gamma0_unit_inv: None,
        };

        // E = 1 + sum_{k=2}^{p-1} (C(p,k)/p) pi^{k-1}; pi^{p-1} = -p E
        let mut e_coeffs = vec![tower.u_zero(m_work); (p - 1) as usize];
        e_coeffs[0] = tower.u_from_u64(1, m_work);
        for k in 2..p {
            let c = binom_u64(p, k) / p;
            e_coeffs[(k - 1) as usize] = tower.u_from_u64(c, m_work);
        }
        let e_unit = RamifiedElement { coeffs: e_coeffs, kprec: ram * m_work as u64 };
        tower.e_unit_inv = Some(tower.r_invert(&e_unit)?);

        tower.gamma0_full = tower.refine_gamma0(target_k)?;
        let unit = tower.r_div_pi_pow(&tower.gamma0_full, 1)?;
        tower.gamma0_unit_inv = Some(tower.r_invert(&unit)?);
        Ok(tower)
    }

    // ---------- precision helpers ----------

    fn p_pow(&self, e: u32) -> &BigUint {
        &self.p_pows[e as usize]
    }

    pub fn ram_index(&self) -> u64 {
        (self.p - 1) as u64
    }

    /// Full pi-precision representable at unramified precision m.
    fn k_cap(&self, m: u32) -> u64 {
        self.ram_index() * m as u64
    }

    // ---------- unramified layer ----------

    pub fn u_zero(&self, m: u32) -> UnramifiedElement {
        UnramifiedElement { coords: vec![BigUint::zero(); self.a], m }
    }

    pub fn u_one(&self, m: u32) -> UnramifiedElement {
        self.u_from_u64(1, m)
    }

    pub fn u_from_u64(&self, v: u64, m: u32) -> UnramifiedElement {
        let mut coords = vec![BigUint::zero(); self.a];
        coords[0] = BigUint::from(v) % self.p_pow(m);
        UnramifiedElement { coords, m }
    }

    pub fn u_from_bigint(&self, v: &BigInt, m: u32) -> UnramifiedElement {
        let modulus = BigInt::from(self.p_pow(m).clone());
        let mut r = v % &modulus;
        if r.sign() == Sign::Minus {
            r += &modulus;
        }
        let mut coords = vec![BigUint::zero(); self.a];
        coords[0] = r.to_biguint().expect("normalized");
        UnramifiedElement { coords, m }
    }

    /// num/den with den coprime to p.
    pub fn u_from_ratio(&self, num: &BigInt, den: &BigUint, m: u32) -> UnramifiedElement {
        let inv = mod_inverse(&(den % self.p_pow(m)), self.p_pow(m))
            .expect("denominator must be coprime to p");
        let n = self.u_from_bigint(num, m);
        let mut coords = n.coords;
        for c in coords.iter_mut() {
            *c = (&*c * &inv) % self.p_pow(m);
        }
        UnramifiedElement { coords, m }
    }

    /// Lift of a residue-field element (digits of the table index).
    pub fn u_lift_residue(&self, r: FqElem, m: u32) -> UnramifiedElement {
        let coords = self
            .fq
            .coords(r)
            .into_iter()
            .map(BigUint::from)
            .collect();
        UnramifiedElement { coords, m }
    }

    /// Reduction mod p back into the residue field.
    pub fn u_residue(&self, x: &UnramifiedElement) -> FqElem {
        let digits: Vec<u64> = x
            .coords
            .iter()
            .map(|c| (c % self.p).to_u64_digits().first().copied().unwrap_or(0))
            .collect();
        self.fq.from_coords(&digits)
    }

    fn u_align(&self, x: &UnramifiedElement, y: &UnramifiedElement) -> u32 {
        x.m.min(y.m)
    }

    pub fn u_reduce(&self, x: &UnramifiedElement, m: u32) -> UnramifiedElement {
        assert!(m <= x.m, "cannot raise precision by reduction");
        UnramifiedElement {
            coords: x.coords.iter().map(|c| c % self.p_pow(m)).collect(),
            m,
        }
    }

    pub fn u_add(&self, x: &UnramifiedElement, y: &UnramifiedElement) -> UnramifiedElement {
        let m = self.u_align(x, y);
        let pm = self.p_pow(m);
        let coords = x
            .coords
            .iter()
            .zip(&y.coords)
            .map(|(a, b)| (a + b) % pm)
            .collect();
        UnramifiedElement { coords, m }
    }

    pub fn u_sub(&self, x: &UnramifiedElement, y: &UnramifiedElement) -> UnramifiedElement {
        let m = self.u_align(x, y);
        let pm = self.p_pow(m);
        let coords = x
            .coords
            .iter()
            .zip(&y.coords)
            .map(|(a, b)| (a % pm + pm - b % pm) % pm)
            .collect();
        UnramifiedElement { coords, m }
    }

    pub fn u_neg(&self, x: &UnramifiedElement) -> UnramifiedElement {
        let pm = self.p_pow(x.m);
        UnramifiedElement {
            coords: x.coords.iter().map(|c| (pm - c % pm) % pm).collect(),
            m: x.m,
        }
    }

    pub fn u_mul(&self, x: &UnramifiedElement, y: &UnramifiedElement) -> UnramifiedElement {
        let m = self.u_align(x, y);
        let pm = self.p_pow(m);
        let mut prod = vec![BigUint::zero(); 2 * self.a - 1];
        for (i, xi) in x.coords.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            for (j, yj) in y.coords.iter().enumerate() {
                prod[i + j] = (&prod[i + j] + xi * yj) % pm;
            }
        }
        // reduce by the monic lifted modulus
        for d in (self.a..prod.len()).rev() {
            let lead = std::mem::replace(&mut prod[d], BigUint::zero());
            if lead.is_zero() {
                continue;
            }
            for i in 0..self.a {
                let sub = (&lead * &self.modulus[i]) % pm;
                let idx = d - self.a + i;
                prod[idx] = (&prod[idx] + pm - sub) % pm;
            }
        }
        prod.truncate(self.a);
        UnramifiedElement { coords: prod, m }
    }

    pub fn u_scale_u64(&self, x: &UnramifiedElement, s: u64) -> UnramifiedElement {
        let pm = self.p_pow(x.m);
        let sb = BigUint::from(s) % pm;
        UnramifiedElement {
            coords: x.coords.iter().map(|c| (c * &sb) % pm).collect(),
            m: x.m,
        }
    }

    pub fn u_pow(&self, x: &UnramifiedElement, e: u64) -> UnramifiedElement {
        let mut acc = self.u_one(x.m);
        let mut base = x.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.u_mul(&acc, &base);
            }
            base = self.u_mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn u_is_zero(&self, x: &UnramifiedElement) -> bool {
        x.coords.iter().all(|c| c.is_zero())
    }

    /// min over coordinates of ord_p; None when zero mod p^m.
    pub fn u_ord_p(&self, x: &UnramifiedElement) -> Option<u64> {
        let mut best: Option<u64> = None;
        for c in &x.coords {
            if let Some(v) = crate::arith::ord_p_biguint(c, self.p) {
                best = Some(best.map_or(v, |b| b.min(v)));
            }
        }
        best
    }

    /// Hensel inversion of a unit (nonzero residue).
    pub fn u_invert(&self, x: &UnramifiedElement) -> Result<UnramifiedElement> {
        let r = self.u_residue(x);
        if r == 0 {
            return Err(Error::PrecisionBounds("inverting a non-unit".into()));
        }
        let rinv = self.fq.inv(r);
        let mut y = self.u_lift_residue(rinv, x.m);
        // y <- y (2 - x y), doubling correct digits each round
        let two = self.u_from_u64(2, x.m);
        let mut digits = 1u32;
        while digits < x.m {
            let t = self.u_sub(&two, &self.u_mul(x, &y));
            y = self.u_mul(&y, &t);
            digits *= 2;
        }
        Ok(y)
    }

    /// The Teichmuller representative of r: the unique lift with w^q = w.
    pub fn teichmuller(&self, r: FqElem) -> UnramifiedElement {
        self.teichmuller_at(r, self.m_default)
    }

    pub fn teichmuller_at(&self, r: FqElem, m: u32) -> UnramifiedElement {
        let q = self.fq.q;
        let mut x = self.u_lift_residue(r, m);
        // x <- x^q gains a digits per pass and fixes the residue
        let passes = m.div_ceil(self.a as u32) + 1;
        for _ in 0..passes {
            let next = self.u_pow(&x, q);
            if self.u_eq(&next, &x) {
                return next;
            }
            x = next;
        }
        x
    }

    pub fn u_eq(&self, x: &UnramifiedElement, y: &UnramifiedElement) -> bool {
        let m = self.u_align(x, y);
        let pm = self.p_pow(m);
        x.coords
            .iter()
            .zip(&y.coords)
            .all(|(a, b)| a % pm == b % pm)
    }

    /// Frobenius power x -> x^(p^i) (the Galois action on Teichmuller lifts).
    pub fn u_frobenius_pow(&self, x: &UnramifiedElement, i: usize) -> UnramifiedElement {
        let mut acc = x.clone();
        for _ in 0..(i % self.a) {
            acc = self.u_pow(&acc, self.p);
        }
        acc
    }

    /// Exact division by p^e; errors if any coordinate is not divisible.
    pub fn u_div_exact_p(&self, x: &UnramifiedElement, e: u32) -> Result<UnramifiedElement> {
        if e == 0 {
            return Ok(x.clone());
        }
        if x.m <= e {
            return Err(Error::PrecisionUnderflow { needed: e as i64 + 1, have: x.m as i64 });
        }
        let pe = self.p_pow(e);
        let mut coords = Vec::with_capacity(self.a);
        for c in &x.coords {
            let (q, r) = num_integer::Integer::div_rem(c, pe);
            if !r.is_zero() {
                return Err(Error::PrecisionBounds(format!(
                    "inexact division by p^{e}"
                )));
            }
            coords.push(q);
        }
        Ok(UnramifiedElement { coords, m: x.m - e })
    }

    // ---------- ramified layer ----------

    pub fn r_zero_at(&self, m: u32) -> RamifiedElement {
        RamifiedElement {
            coeffs: vec![self.u_zero(m); (self.p - 1) as usize],
            kprec: self.k_cap(m),
        }
    }

    pub fn r_zero(&self) -> RamifiedElement {
        let mut z = self.r_zero_at(self.m_default);
        z.kprec = self.k_default;
        z
    }

    pub fn r_from_unramified(&self, x: &UnramifiedElement) -> RamifiedElement {
        let mut coeffs = vec![self.u_zero(x.m); (self.p - 1) as usize];
        coeffs[0] = x.clone();
        RamifiedElement { coeffs, kprec: self.k_cap(x.m) }
    }

    pub fn r_from_u64(&self, v: u64, m: u32) -> RamifiedElement {
        self.r_from_unramified(&self.u_from_u64(v, m))
    }

    pub fn r_from_bigint(&self, v: &BigInt, m: u32) -> RamifiedElement {
        self.r_from_unramified(&self.u_from_bigint(v, m))
    }

    /// The uniformizer as an element: pi itself for p > 2, and -2 for p = 2
    /// (where the ramified layer is rank one and pi = -p).
    pub fn pi_elem(&self, m: u32) -> RamifiedElement {
        if self.p == 2 {
            self.r_from_bigint(&BigInt::from(-2), m)
        } else {
            let mut coeffs = vec![self.u_zero(m); (self.p - 1) as usize];
            coeffs[1] = self.u_one(m);
            RamifiedElement { coeffs, kprec: self.k_cap(m) }
        }
    }

    fn r_m(&self, x: &RamifiedElement) -> u32 {
        x.coeffs[0].m
    }

    pub fn r_reduce(&self, x: &RamifiedElement, m: u32, kprec: u64) -> RamifiedElement {
        let coeffs = x.coeffs.iter().map(|c| self.u_reduce(c, m)).collect();
        RamifiedElement { coeffs, kprec: kprec.min(self.k_cap(m)).min(x.kprec) }
    }

    pub fn r_add(&self, x: &RamifiedElement, y: &RamifiedElement) -> RamifiedElement {
        let coeffs = x
            .coeffs
            .iter()
            .zip(&y.coeffs)
            .map(|(a, b)| self.u_add(a, b))
            .collect();
        RamifiedElement { coeffs, kprec: x.kprec.min(y.kprec) }
    }

    pub fn r_sub(&self, x: &RamifiedElement, y: &RamifiedElement) -> RamifiedElement {
        let coeffs = x
            .coeffs
            .iter()
            .zip(&y.coeffs)
            .map(|(a, b)| self.u_sub(a, b))
            .collect();
        RamifiedElement { coeffs, kprec: x.kprec.min(y.kprec) }
    }

    pub fn r_neg(&self, x: &RamifiedElement) -> RamifiedElement {
        RamifiedElement {
            coeffs: x.coeffs.iter().map(|c| self.u_neg(c)).collect(),
            kprec: x.kprec,
        }
    }

    pub fn r_mul(&self, x: &RamifiedElement, y: &RamifiedElement) -> RamifiedElement {
        let deg = (self.p - 1) as usize;
        let m = self.r_m(x).min(self.r_m(y));
        let mut prod = vec![self.u_zero(m); 2 * deg - 1];
        for (i, xi) in x.coeffs.iter().enumerate() {
            if self.u_is_zero(xi) {
                continue;
            }
            for (j, yj) in y.coeffs.iter().enumerate() {
                if self.u_is_zero(yj) {
                    continue;
                }
                let t = self.u_mul(xi, yj);
                prod[i + j] = self.u_add(&prod[i + j], &t);
            }
        }
        // substitute pi^{p-1} = -sum_{k=1}^{p-1} C(p,k) pi^{k-1}, top down
        for d in (deg..prod.len()).rev() {
            let lead = std::mem::replace(&mut prod[d], self.u_zero(m));
            if self.u_is_zero(&lead) {
                continue;
            }
            let base = d - deg; // pi^d = pi^base * pi^{p-1}
            for k in 1..self.p {
                let term = self.u_scale_u64(&lead, self.phi[(k - 1) as usize]);
                let idx = base + (k - 1) as usize;
                prod[idx] = self.u_sub(&prod[idx], &term);
            }
        }
        prod.truncate(deg);
        RamifiedElement {
            coeffs: prod,
            kprec: x.kprec.min(y.kprec).min(self.k_cap(m)),
        }
    }

    pub fn r_scale_unram(&self, x: &RamifiedElement, s: &UnramifiedElement) -> RamifiedElement {
        let coeffs = x.coeffs.iter().map(|c| self.u_mul(c, s)).collect();
        RamifiedElement {
            coeffs,
            kprec: x.kprec.min(self.k_cap(s.m)),
        }
    }

    pub fn r_scale_u64(&self, x: &RamifiedElement, s: u64) -> RamifiedElement {
        RamifiedElement {
            coeffs: x.coeffs.iter().map(|c| self.u_scale_u64(c, s)).collect(),
            kprec: x.kprec,
        }
    }

    pub fn r_pow(&self, x: &RamifiedElement, e: u64) -> RamifiedElement {
        let mut acc = self.r_from_u64(1, self.r_m(x));
        let mut base = x.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.r_mul(&acc, &base);
            }
            base = self.r_mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn r_is_zero(&self, x: &RamifiedElement) -> bool {
        x.coeffs.iter().all(|c| self.u_is_zero(c))
    }

    /// pi-adic valuation. The basis contributions (p-1) ord_p(c_k) + k are
    /// pairwise distinct mod p-1, so no cancellation is possible and the
    /// minimum is exact whenever it is visible below the stored precision.
    pub fn pi_valuation(&self, x: &RamifiedElement) -> PiVal {
        let ram = self.ram_index();
        let mut exact: Option<u64> = None;
        let mut hidden: Option<u64> = None;
        for (k, c) in x.coeffs.iter().enumerate() {
            match self.u_ord_p(c) {
                Some(v) => {
                    let w = ram * v + k as u64;
                    exact = Some(exact.map_or(w, |b| b.min(w)));
                }
                None => {
                    let w = ram * c.m as u64 + k as u64;
                    hidden = Some(hidden.map_or(w, |b| b.min(w)));
                }
            }
        }
        let cap = x.kprec;
        match (exact, hidden) {
            (Some(e), Some(h)) if e <= h => {
                if e < cap {
                    PiVal::Exact(e)
                } else {
                    PiVal::AtLeast(cap)
                }
            }
            (Some(e), None) => {
                if e < cap {
                    PiVal::Exact(e)
                } else {
                    PiVal::AtLeast(cap)
                }
            }
            (Some(e), Some(h)) => PiVal::AtLeast(h.min(e).min(cap)),
            (None, Some(h)) => PiVal::AtLeast(h.min(cap)),
            (None, None) => PiVal::AtLeast(cap),
        }
    }

    /// Do x and y agree modulo pi^v (as far as their precision certifies)?
    pub fn r_eq_mod(&self, x: &RamifiedElement, y: &RamifiedElement, v: u64) -> bool {
        self.pi_valuation(&self.r_sub(x, y)).at_least(v)
    }

    /// Newton inversion of a unit in the ramified layer.
    pub fn r_invert(&self, x: &RamifiedElement) -> Result<RamifiedElement> {
        if self.pi_valuation(x) != PiVal::Exact(0) {
            return Err(Error::PrecisionBounds("inverting a ramified non-unit".into()));
        }
        let m = self.r_m(x);
        let u0 = self.u_invert(&x.coeffs[0])?;
        let mut y = self.r_from_unramified(&u0);
        let two = self.r_from_u64(2, m);
        let goal = x.kprec.min(self.k_cap(m));
        let mut digits = 1u64;
        while digits < goal {
            let t = self.r_sub(&two, &self.r_mul(x, &y));
            y = self.r_mul(&y, &t);
            digits *= 2;
        }
        Ok(y)
    }

    /// Exact division by p^e (coordinate-wise since ord_pi(x) >= e(p-1)
    /// forces p^e | every coordinate).
    pub fn r_div_exact_p(&self, x: &RamifiedElement, e: u32) -> Result<RamifiedElement> {
        let mut coeffs = Vec::with_capacity(x.coeffs.len());
        for c in &x.coeffs {
            coeffs.push(self.u_div_exact_p(c, e)?);
        }
        let drop = self.ram_index() * e as u64;
        Ok(RamifiedElement {
            coeffs,
            kprec: x.kprec.saturating_sub(drop),
        })
    }

    pub fn r_mul_pi_pow(&self, x: &RamifiedElement, t: u64) -> RamifiedElement {
        if t == 0 {
            return x.clone();
        }
        let pi_t = self.r_pow(&self.pi_elem(self.r_m(x)), t);
        let mut y = self.r_mul(x, &pi_t);
        y.kprec = (x.kprec + t).min(self.k_cap(self.r_m(x)));
        y
    }

    /// Exact division by pi^s via pi^{p-1} = -pE: multiply up to a full
    /// power of p-1, then divide coordinates by p^e.
    pub fn r_div_pi_pow(&self, x: &RamifiedElement, s: u64) -> Result<RamifiedElement> {
        if s == 0 {
            return Ok(x.clone());
        }
        let ram = self.ram_index();
        let e = s.div_ceil(ram);
        let t = e * ram - s;
        let mut y = self.r_mul_pi_pow(x, t);
        let inv_e = self.e_unit_inv.as_ref().expect("context initialized");
        let sign_flip = e % 2 == 1;
        let unit = self.r_pow(inv_e, e);
        y = self.r_mul(&y, &unit);
        if sign_flip {
            y = self.r_neg(&y);
        }
        self.r_div_exact_p(&y, e as u32)
    }

    /// Divide by gamma0^s (exact: requires ord_pi(x) >= s), using the
    /// factorization gamma0 = pi * unit.
    pub fn r_div_gamma0_pow(&self, x: &RamifiedElement, s: u64) -> Result<RamifiedElement> {
        if s == 0 {
            return Ok(x.clone());
        }
        let unit_inv = self.gamma0_unit_inv.as_ref().expect("context initialized");
        let scaled = self.r_mul(x, &self.r_pow(unit_inv, s));
        self.r_div_pi_pow(&scaled, s)
    }

    /// Reduction of a ramified element modulo pi (lands in F_q).
    pub fn r_residue(&self, x: &RamifiedElement) -> FqElem {
        self.u_residue(&x.coeffs[0])
    }

    // ---------- gamma0 ----------

    /// gamma0 at the tower's default precision.
    pub fn gamma0(&self) -> RamifiedElement {
        self.r_reduce(&self.gamma0_full, self.m_default, self.k_default)
    }

    /// gamma0 at the tower's full internal precision.
    pub fn gamma0_full(&self) -> &RamifiedElement {
        &self.gamma0_full
    }

    /// Value of sum_{i<=top} t^{p^i} / p^i (terms beyond `top` sit above the
    /// target precision for ord_pi(t) = 1).
    fn gamma_series_value(&self, t: &RamifiedElement, top: u32) -> Result<RamifiedElement> {
        let mut acc = t.clone();
        let mut tp = t.clone();
        for i in 1..=top {
            // t^{p^i}
            tp = self.r_pow(&tp, self.p);
            let term = self.r_div_exact_p(&tp, i)?;
            acc = self.r_add(&acc, &term);
        }
        Ok(acc)
    }

    /// Derivative sum_{i<=top} t^{p^i - 1} (an integral series, unit at
    /// ord_pi(t) = 1).
    fn gamma_series_derivative(&self, t: &RamifiedElement, top: u32) -> RamifiedElement {
        let m = self.r_m(t);
        let mut acc = self.r_from_u64(1, m);
        for i in 1..=top {
            let e = self.p.pow(i) - 1;
            acc = self.r_add(&acc, &self.r_pow(t, e));
        }
        acc
    }

    /// Newton refinement of the distinguished zero of sum t^{p^i}/p^i from
    /// the initial guess pi. Converges quadratically; the derivative is a
    /// unit on the ord_pi = 1 disc.
    fn refine_gamma0(&self, target_k: u64) -> Result<RamifiedElement> {
        let top = gamma0_series_top(self.p, target_k + 2 * self.ram_index());
        let mut t = self.pi_elem(self.m_work);
        for _ in 0..64 {
            let val = self.gamma_series_value(&t, top)?;
            if self.pi_valuation(&val).at_least(target_k) {
                if self.pi_valuation(&t) != PiVal::Exact(1) {
                    return Err(Error::NoConvergence(64));
                }
                return Ok(t);
            }
            let deriv = self.gamma_series_derivative(&t, top);
            let delta = self.r_mul(&val, &self.r_invert(&deriv)?);
            t = self.r_sub(&t, &delta);
        }
        Err(Error::NoConvergence(64))
    }

    /// Defining-series residual of the tower's gamma0, evaluated at full
    /// internal precision so divisions by p^i cannot drain the certificate.
    pub fn gamma0_residual(&self, target_k: u64) -> Result<PiVal> {
        let top = gamma0_series_top(self.p, target_k + 2 * self.ram_index());
        let val = self.gamma_series_value(&self.gamma0_full, top)?;
        Ok(self.pi_valuation(&val))
    }
}

/// Smallest i beyond which terms t^{p^i}/p^i (at ord_pi t = 1) clear the
/// target: p^i - i(p-1) >= target.
fn gamma0_series_top(p: u64, target_k: u64) -> u32 {
    let mut i = 0u32;
    loop {
        let ord = (p as i128).pow(i) - i as i128 * (p as i128 - 1);
        if ord >= target_k as i128 {
            return i;
        }
        i += 1;
    }
}

fn binom_u64(n: u64, k: u64) -> u64 {
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}
