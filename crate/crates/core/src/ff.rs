//! Table-based arithmetic for small finite fields F_{p^k}.
//!
//! Elements are indices in `0..q` encoding coordinate vectors in the power
//! basis of the generator: index = sum of c_i * p^i where c_i is the
//! coefficient of g^i. All products go through a dense q*q table, which keeps
//! the point-counting kernels branch-free.

use crate::arith::is_prime;
use crate::error::{Error, Result};

pub type FqElem = u16;

/// Largest q for which we are willing to build a dense q*q multiplication
/// table (8 MB of u16 at the cap). Counting work beyond this is refused
/// upstream by the work budget anyway.
const MAX_TABLE_Q: u64 = 2048;

#[derive(Clone)]
pub struct FieldContext {
    pub p: u64,
    pub deg: usize,
    /// Monic modulus, constant coefficient first, length deg+1.
    pub modulus: Vec<u64>,
    pub q: u64,
    mul: Vec<FqElem>,
    add: Vec<FqElem>,
    neg: Vec<FqElem>,
    inv: Vec<FqElem>,
    frob: Vec<FqElem>,
    trace: Vec<u8>,
}

impl std::fmt::Debug for FieldContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldContext")
            .field("p", &self.p)
            .field("deg", &self.deg)
            .field("modulus", &self.modulus)
            .finish()
    }
}

// --- dense polynomial helpers over F_p (coefficient vectors, constant first) ---

fn poly_trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

fn poly_mul_mod(a: &[u64], b: &[u64], modulus: &[u64], p: u64) -> Vec<u64> {
    let mut prod = vec![0u64; a.len() + b.len()];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + ai * bj) % p;
        }
    }
    poly_rem(&mut prod, modulus, p);
    prod
}

/// Reduce `a` modulo the monic polynomial `modulus` in place.
fn poly_rem(a: &mut Vec<u64>, modulus: &[u64], p: u64) {
    let d = modulus.len() - 1;
    while a.len() > d {
        let lead = *a.last().unwrap() % p;
        let shift = a.len() - 1 - d;
        if lead != 0 {
            for i in 0..d {
                let sub = (lead * modulus[i]) % p;
                a[shift + i] = (a[shift + i] + p * p - sub) % p;
            }
        }
        a.pop();
    }
    a.truncate(d);
    while a.len() < d {
        a.push(0);
    }
}

fn poly_pow_mod(base: &[u64], mut e: u64, modulus: &[u64], p: u64) -> Vec<u64> {
    let mut result = vec![1u64];
    result.resize(modulus.len() - 1, 0);
    let mut b = base.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            result = poly_mul_mod(&result, &b, modulus, p);
        }
        b = poly_mul_mod(&b, &b, modulus, p);
        e >>= 1;
    }
    result
}

fn poly_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    poly_trim(&mut x);
    poly_trim(&mut y);
    while !y.is_empty() {
        // x mod y
        let inv_lead = mod_inv_u64(*y.last().unwrap(), p);
        while x.len() >= y.len() && !x.is_empty() {
            let lead = (*x.last().unwrap() * inv_lead) % p;
            let shift = x.len() - y.len();
            if lead != 0 {
                for (i, &yi) in y.iter().enumerate() {
                    let sub = (lead * yi) % p;
                    x[shift + i] = (x[shift + i] + p * p - sub) % p;
                }
            }
            poly_trim(&mut x);
            if x.len() < y.len() {
                break;
            }
            // leading coefficient may already be zero after reduction
            if x.last() == Some(&0) {
                poly_trim(&mut x);
            }
        }
        std::mem::swap(&mut x, &mut y);
        poly_trim(&mut y);
    }
    x
}

fn mod_inv_u64(x: u64, p: u64) -> u64 {
    // Fermat
    let mut acc = 1u64;
    let mut b = x % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

/// Irreducibility over F_p: gcd(x^{p^k} - x, f) = 1 for 1 <= k < deg and
/// x^{p^deg} = x mod f.
pub fn is_irreducible(modulus: &[u64], p: u64) -> bool {
    let deg = modulus.len() - 1;
    if deg == 0 {
        return false;
    }
    if deg == 1 {
        return true;
    }
    let mut cur = vec![0u64, 1];
    cur.resize(deg, 0);
    for k in 1..=deg {
        cur = poly_pow_mod(&cur, p, modulus, p);
        // x^{p^k} - x
        let mut diff = cur.clone();
        if diff.len() < 2 {
            diff.resize(2, 0);
        }
        diff[1] = (diff[1] + p - 1) % p;
        poly_trim(&mut diff);
        if k < deg {
            let g = poly_gcd(&diff, modulus, p);
            if g.len() > 1 {
                return false;
            }
            if diff.is_empty() {
                // x^{p^k} = x already at k < deg
                return false;
            }
        } else if !diff.is_empty() {
            return false;
        }
    }
    true
}

/// The lexicographically least monic irreducible polynomial of the given
/// degree, "least" meaning smallest integer encoding sum(c_i p^i) of the
/// non-leading coefficients.
pub fn least_irreducible(p: u64, deg: usize) -> Vec<u64> {
    if deg == 1 {
        return vec![0, 1]; // x itself
    }
    let count = p.pow(deg as u32);
    for code in 0..count {
        let mut coeffs = Vec::with_capacity(deg + 1);
        let mut c = code;
        for _ in 0..deg {
            coeffs.push(c % p);
            c /= p;
        }
        coeffs.push(1);
        if is_irreducible(&coeffs, p) {
            return coeffs;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

impl FieldContext {
    /// Field with the deterministic default modulus.
    pub fn new(p: u64, deg: usize) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Self::with_modulus(p, least_irreducible(p, deg))
    }

    /// Field with a caller-supplied monic modulus (verified irreducible).
    pub fn with_modulus(p: u64, modulus: Vec<u64>) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let deg = modulus.len() - 1;
        assert!(deg >= 1, "modulus must have positive degree");
        assert_eq!(modulus[deg], 1, "modulus must be monic");
        if !is_irreducible(&modulus, p) {
            return Err(Error::NotIrreducible { p, degree: deg });
        }
        let q = p.checked_pow(deg as u32).filter(|&q| q <= MAX_TABLE_Q).ok_or(
            Error::FieldTooLarge(p.saturating_pow(deg as u32)),
        )?;
        let qs = q as usize;

        let decode = |idx: u64| -> Vec<u64> {
            let mut v = Vec::with_capacity(deg);
            let mut c = idx;
            for _ in 0..deg {
                v.push(c % p);
                c /= p;
            }
            v
        };
        let encode = |poly: &[u64]| -> FqElem {
            let mut idx = 0u64;
            for &c in poly.iter().rev() {
                idx = idx * p + (c % p);
            }
            idx as FqElem
        };

        let mut mul = vec![0 as FqElem; qs * qs];
        let mut add = vec![0 as FqElem; qs * qs];
        let mut neg = vec![0 as FqElem; qs];
        for i in 0..qs {
            let a = decode(i as u64);
            let negv: Vec<u64> = a.iter().map(|&c| (p - c) % p).collect();
            neg[i] = encode(&negv);
            for j in i..qs {
                let b = decode(j as u64);
                let sum: Vec<u64> = a.iter().zip(&b).map(|(&x, &y)| (x + y) % p).collect();
                let s = encode(&sum);
                add[i * qs + j] = s;
                add[j * qs + i] = s;
                let pr = poly_mul_mod(&a, &b, &modulus, p);
                let m = encode(&pr);
                mul[i * qs + j] = m;
                mul[j * qs + i] = m;
            }
        }
        let mut inv = vec![0 as FqElem; qs];
        for i in 1..qs {
            if inv[i] != 0 {
                continue;
            }
            for j in 1..qs {
                if mul[i * qs + j] == 1 {
                    inv[i] = j as FqElem;
                    inv[j] = i as FqElem;
                    break;
                }
            }
        }
        let mut frob = vec![0 as FqElem; qs];
        for i in 0..qs {
            // i^p by square-and-multiply over the table
            let mut acc: FqElem = 1;
            let mut b = i as FqElem;
            let mut e = p;
            while e > 0 {
                if e & 1 == 1 {
                    acc = mul[acc as usize * qs + b as usize];
                }
                b = mul[b as usize * qs + b as usize];
                e >>= 1;
            }
            frob[i] = acc;
        }
        let mut trace = vec![0u8; qs];
        for i in 0..qs {
            let mut term = i as FqElem;
            let mut sum = 0 as FqElem;
            for _ in 0..deg {
                sum = add[sum as usize * qs + term as usize];
                term = frob[term as usize];
            }
            debug_assert!(u64::from(sum) < p, "trace lands in the prime field");
            trace[i] = sum as u8;
        }

        Ok(FieldContext { p, deg, modulus, q, mul, add, neg, inv, frob, trace })
    }

    #[inline(always)]
    pub fn mul(&self, a: FqElem, b: FqElem) -> FqElem {
        self.mul[a as usize * self.q as usize + b as usize]
    }

    #[inline(always)]
    pub fn add(&self, a: FqElem, b: FqElem) -> FqElem {
        self.add[a as usize * self.q as usize + b as usize]
    }

    #[inline(always)]
    pub fn neg(&self, a: FqElem) -> FqElem {
        self.neg[a as usize]
    }

    pub fn sub(&self, a: FqElem, b: FqElem) -> FqElem {
        self.add(a, self.neg(b))
    }

    /// Multiplicative inverse; 0 maps to 0 by convention.
    pub fn inv(&self, a: FqElem) -> FqElem {
        self.inv[a as usize]
    }

    #[inline(always)]
    pub fn frobenius(&self, a: FqElem) -> FqElem {
        self.frob[a as usize]
    }

    /// Absolute trace down to F_p, returned as a residue in [0, p).
    #[inline(always)]
    pub fn trace(&self, a: FqElem) -> u64 {
        u64::from(self.trace[a as usize])
    }

    pub fn pow(&self, a: FqElem, e: u64) -> FqElem {
        let mut acc: FqElem = 1;
        let mut b = a;
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }

    /// Coordinates of an element in the power basis, constant first.
    pub fn coords(&self, a: FqElem) -> Vec<u64> {
        let mut v = Vec::with_capacity(self.deg);
        let mut c = u64::from(a);
        for _ in 0..self.deg {
            v.push(c % self.p);
            c /= self.p;
        }
        v
    }

    pub fn from_coords(&self, coords: &[u64]) -> FqElem {
        assert!(coords.len() <= self.deg);
        let mut idx = 0u64;
        for &c in coords.iter().rev() {
            idx = idx * self.p + (c % self.p);
        }
        idx as FqElem
    }

    pub fn scalar(&self, c: u64) -> FqElem {
        (c % self.p) as FqElem
    }

    pub fn elements(&self) -> impl Iterator<Item = FqElem> {
        0..self.q as FqElem
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = FqElem> {
        1..self.q as FqElem
    }

    /// Roots of a polynomial with F_p coefficients in this field, ascending.
    pub fn roots_of_prime_poly(&self, poly: &[u64]) -> Vec<FqElem> {
        let mut out = Vec::new();
        for x in self.elements() {
            let mut acc: FqElem = 0;
            // Horner, constant coefficient first means iterate from the top
            for &c in poly.iter().rev() {
                acc = self.add(self.mul(acc, x), self.scalar(c));
            }
            if acc == 0 {
                out.push(x);
            }
        }
        out
    }
}

/// Embedding of a small field into an extension, as a precomputed lookup
/// table. The generator of the small field maps to the least root of the
/// small modulus in the big field, so the embedding is deterministic.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: Vec<FqElem>,
}

impl Embedding {
    pub fn new(small: &FieldContext, big: &FieldContext) -> Result<Self> {
        assert_eq!(small.p, big.p, "embeddings stay in one characteristic");
        assert_eq!(
            big.deg % small.deg,
            0,
            "no embedding F_{{p^{}}} -> F_{{p^{}}}",
            small.deg,
            big.deg
        );
        let roots = big.roots_of_prime_poly(&small.modulus);
        let root = *roots.first().ok_or_else(|| {
            Error::Config("modulus of the base field has no root in the extension".into())
        })?;
        let mut table = Vec::with_capacity(small.q as usize);
        for x in small.elements() {
            let coords = small.coords(x);
            let mut acc: FqElem = 0;
            for &c in coords.iter().rev() {
                acc = big.add(big.mul(acc, root), big.scalar(c));
            }
            table.push(acc);
        }
        Ok(Embedding { table })
    }

    #[inline(always)]
    pub fn map(&self, x: FqElem) -> FqElem {
        self.table[x as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_irreducible_f9_is_x2_plus_1() {
        assert_eq!(least_irreducible(3, 2), vec![1, 0, 1]);
    }

    #[test]
    fn field_axioms_f9() {
        let f = FieldContext::new(3, 2).unwrap();
        for a in f.elements() {
            for b in f.elements() {
                assert_eq!(f.mul(a, b), f.mul(b, a));
                assert_eq!(f.add(a, b), f.add(b, a));
                if a != 0 {
                    assert_eq!(f.mul(a, f.inv(a)), 1);
                }
            }
        }
        // multiplicative order of the group
        for a in f.nonzero_elements() {
            assert_eq!(f.pow(a, f.q - 1), 1);
        }
    }

    #[test]
    fn frobenius_is_field_automorphism() {
        for (p, d) in [(2u64, 3usize), (3, 2), (5, 2), (7, 1)] {
            let f = FieldContext::new(p, d).unwrap();
            for a in f.elements() {
                assert_eq!(f.frobenius(a), f.pow(a, p));
                for b in f.elements() {
                    assert_eq!(
                        f.frobenius(f.add(a, b)),
                        f.add(f.frobenius(a), f.frobenius(b))
                    );
                }
            }
        }
    }

    #[test]
    fn trace_is_additive_and_surjective() {
        let f = FieldContext::new(3, 2).unwrap();
        let mut seen = [false; 3];
        for a in f.elements() {
            seen[f.trace(a) as usize] = true;
            for b in f.elements() {
                let t = (f.trace(a) + f.trace(b)) % 3;
                assert_eq!(f.trace(f.add(a, b)), t);
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn embedding_respects_arithmetic() {
        let small = FieldContext::new(3, 1).unwrap();
        let big = FieldContext::new(3, 2).unwrap();
        let emb = Embedding::new(&small, &big).unwrap();
        for a in small.elements() {
            for b in small.elements() {
                assert_eq!(emb.map(small.mul(a, b)), big.mul(emb.map(a), emb.map(b)));
                assert_eq!(emb.map(small.add(a, b)), big.add(emb.map(a), emb.map(b)));
            }
        }
        let small2 = FieldContext::new(2, 2).unwrap();
        let big2 = FieldContext::new(2, 4).unwrap();
        let emb2 = Embedding::new(&small2, &big2).unwrap();
        for a in small2.elements() {
            for b in small2.elements() {
                assert_eq!(emb2.map(small2.mul(a, b)), big2.mul(emb2.map(a), emb2.map(b)));
            }
        }
    }

    #[test]
    fn non_prime_rejected() {
        assert!(matches!(FieldContext::new(4, 1), Err(Error::NotPrime(4))));
    }
}
