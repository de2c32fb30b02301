//! Small integer helpers shared across the crate: primality, factorials,
//! p-adic valuations of exact integers.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

/// Deterministic trial-division primality test. The primes in this crate are
/// never larger than a few dozen, so nothing fancier is warranted.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub fn factorial(n: u64) -> BigUint {
    let mut acc = BigUint::one();
    for k in 2..=n {
        acc *= k;
    }
    acc
}

/// ord_p(n!) via Legendre's formula.
pub fn factorial_ord_p(n: u64, p: u64) -> u64 {
    let mut total = 0;
    let mut q = p;
    while q <= n {
        total += n / q;
        match q.checked_mul(p) {
            Some(next) => q = next,
            None => break,
        }
    }
    total
}

/// Sum of base-p digits of n.
pub fn digit_sum(n: u64, p: u64) -> u64 {
    let mut s = 0;
    let mut m = n;
    while m > 0 {
        s += m % p;
        m /= p;
    }
    s
}

/// Binomial coefficient as an exact integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// p-adic valuation of a nonzero integer; `None` for zero.
pub fn ord_p_bigint(x: &BigInt, p: u64) -> Option<u64> {
    if x.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut v = 0u64;
    let mut cur = x.clone();
    loop {
        let (q, r) = num_integer::Integer::div_rem(&cur, &p);
        if r.is_zero() {
            v += 1;
            cur = q;
        } else {
            return Some(v);
        }
    }
}

pub fn ord_p_biguint(x: &BigUint, p: u64) -> Option<u64> {
    if x.is_zero() {
        return None;
    }
    let p = BigUint::from(p);
    let mut v = 0u64;
    let mut cur = x.clone();
    loop {
        let (q, r) = num_integer::Integer::div_rem(&cur, &p);
        if r.is_zero() {
            v += 1;
            cur = q;
        } else {
            return Some(v);
        }
    }
}

/// p^k as a BigUint.
pub fn pow_biguint(p: u64, k: u32) -> BigUint {
    BigUint::from(p).pow(k)
}

/// Modular inverse of `x` modulo `m` for `x` coprime to `m` (extended gcd).
pub fn mod_inverse(x: &BigUint, m: &BigUint) -> Option<BigUint> {
    let x = BigInt::from(x.clone());
    let m_int = BigInt::from(m.clone());
    let (mut r0, mut r1) = (m_int.clone(), x);
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r);
        let t = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t);
    }
    if !r0.is_one() {
        return None;
    }
    let mut inv = t0 % &m_int;
    if inv.sign() == num_bigint::Sign::Minus {
        inv += &m_int;
    }
    Some(inv.to_biguint().expect("normalized to nonnegative"))
}
