//! Integer factorization for 128-bit values: trial division for small
//! primes, then Miller-Rabin primality plus Brent's cycle variant of
//! Pollard's rho. Used to compute multiplicative orders of polynomials and
//! to verify minimality of periods.

use std::collections::BTreeMap;

fn addmod(a: u128, b: u128, m: u128) -> u128 {
    debug_assert!(a < m && b < m);
    let (s, overflow) = a.overflowing_add(b);
    if overflow || s >= m {
        s.wrapping_sub(m)
    } else {
        s
    }
}

fn mulmod(a: u128, b: u128, m: u128) -> u128 {
    debug_assert!(m > 0);
    if m <= 1 << 64 {
        return ((a % m) * (b % m)) % m;
    }
    let mut acc: u128 = 0;
    let mut a = a % m;
    let mut b = b % m;
    while b > 0 {
        if b & 1 == 1 {
            acc = addmod(acc, a, m);
        }
        a = addmod(a, a, m);
        b >>= 1;
    }
    acc
}

fn powmod(mut base: u128, mut e: u128, m: u128) -> u128 {
    let mut acc: u128 = 1 % m;
    base %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, base, m);
        }
        base = mulmod(base, base, m);
        e >>= 1;
    }
    acc
}

/// Miller-Rabin over the fixed witness set that is deterministic for all
/// 64-bit inputs; for wider inputs the same witnesses make a probabilistic
/// test with error probability far below any practical concern.
pub(crate) fn is_prime_u128(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    for &q in &[2u128, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d & 1 == 0 {
        d >>= 1;
        s += 1;
    }
    'witness: for &a in &[2u128, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_rho(n: u128) -> u128 {
    debug_assert!(n > 1 && !is_prime_u128(n) && n % 2 == 1);
    for c in 1u128.. {
        if let Some(d) = rho_attempt(n, c) {
            return d;
        }
    }
    unreachable!("every composite has a nontrivial factor")
}

/// One Floyd cycle walk with batched gcds; `None` means this polynomial
/// shift only found the trivial factor and the next one should be tried.
fn rho_attempt(n: u128, c: u128) -> Option<u128> {
    let f = |v: u128| addmod(mulmod(v, v, n), c % n, n);
    let mut x: u128 = 2;
    let mut y: u128 = 2;
    loop {
        let (anchor_x, anchor_y) = (x, y);
        let mut q: u128 = 1;
        for _ in 0..128 {
            x = f(x);
            y = f(f(y));
            q = mulmod(q, x.abs_diff(y), n);
        }
        match gcd(q, n) {
            1 => continue,
            g if g < n => return Some(g),
            _ => {
                // The batch jumped past the first collision; replay it one
                // step at a time to isolate the factor.
                let (mut x, mut y) = (anchor_x, anchor_y);
                loop {
                    x = f(x);
                    y = f(f(y));
                    let g = gcd(x.abs_diff(y), n);
                    if g == n {
                        return None;
                    }
                    if g > 1 {
                        return Some(g);
                    }
                }
            }
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Prime factorization `n = prod q^e` as a sorted map. `n` must be >= 1;
/// the empty map is returned for 1.
pub(crate) fn factor_u128(mut n: u128) -> BTreeMap<u128, u32> {
    assert!(n >= 1, "factorization needs n >= 1");
    let mut out = BTreeMap::new();
    for q in [2u128, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47] {
        while n % q == 0 {
            *out.entry(q).or_insert(0) += 1;
            n /= q;
        }
    }
    let mut stack = vec![n];
    while let Some(m) = stack.pop() {
        if m == 1 {
            continue;
        }
        if is_prime_u128(m) {
            *out.entry(m).or_insert(0) += 1;
            continue;
        }
        let d = pollard_rho(m);
        stack.push(d);
        stack.push(m / d);
    }
    out
}

pub(crate) fn factor_u64(n: u64) -> BTreeMap<u64, u32> {
    factor_u128(n as u128)
        .into_iter()
        .map(|(q, e)| (q as u64, e))
        .collect()
}
