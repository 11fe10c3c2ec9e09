//! Small dense linear algebra over Z_q.

use crate::error::{Error, Result};
use crate::ring::{RingParams, Sym};

/// Componentwise `⊕_i α_i·v_i` over Z_q.
pub fn linear_combo(ring: &RingParams, vectors: &[Vec<Sym>], alpha: &[Sym]) -> Result<Vec<Sym>> {
    if vectors.len() != alpha.len() {
        return Err(Error::LengthMismatch {
            expected: vectors.len(),
            actual: alpha.len(),
        });
    }
    ring.check_all(alpha)?;
    let len = vectors.first().map_or(0, Vec::len);
    let mut out = vec![0 as Sym; len];
    for (v, &a) in vectors.iter().zip(alpha) {
        if v.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: v.len(),
            });
        }
        let row = ring.mul_row(a);
        for (o, &x) in out.iter_mut().zip(v) {
            *o = ring.add(*o, row[x as usize]);
        }
    }
    Ok(out)
}

fn check_square(a: &[Vec<Sym>]) -> Result<usize> {
    let k = a.len();
    if k == 0 {
        return Err(Error::InvalidArgument("empty coefficient matrix".into()));
    }
    if let Some(r) = a.iter().find(|r| r.len() != k) {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: r.len(),
        });
    }
    Ok(k)
}

fn minor(a: &[Vec<Sym>], skip_row: usize, skip_col: usize) -> Vec<Vec<Sym>> {
    a.iter()
        .enumerate()
        .filter(|&(r, _)| r != skip_row)
        .map(|(_, row)| {
            row.iter()
                .enumerate()
                .filter(|&(c, _)| c != skip_col)
                .map(|(_, &x)| x)
                .collect()
        })
        .collect()
}

fn det_unchecked(ring: &RingParams, a: &[Vec<Sym>]) -> Sym {
    match a.len() {
        0 => 1,
        1 => a[0][0],
        _ => {
            let mut acc: Sym = 0;
            for (c, &x) in a[0].iter().enumerate() {
                if x == 0 {
                    continue;
                }
                let term = ring.mul(x, det_unchecked(ring, &minor(a, 0, c)));
                acc = if c % 2 == 0 { ring.add(acc, term) } else { ring.sub(acc, term) };
            }
            acc
        }
    }
}

/// Determinant mod q by cofactor expansion (K is a handful of users).
pub fn det_mod(ring: &RingParams, a: &[Vec<Sym>]) -> Result<Sym> {
    check_square(a)?;
    for row in a {
        ring.check_all(row)?;
    }
    Ok(det_unchecked(ring, a))
}

/// `A^{-1}` over Z_q as adjugate times `det^{-1}`; fails unless det is regular.
pub fn inverse_mod(ring: &RingParams, a: &[Vec<Sym>]) -> Result<Vec<Vec<Sym>>> {
    let k = check_square(a)?;
    let det = det_mod(ring, a)?;
    if !ring.is_regular(det) {
        return Err(Error::SingularMatrix {
            det: det as usize,
            q: ring.q(),
        });
    }
    let det_inv = ring.inv_regular(det);
    let mut inv = vec![vec![0 as Sym; k]; k];
    for (r, inv_row) in inv.iter_mut().enumerate() {
        for (c, out) in inv_row.iter_mut().enumerate() {
            // adj[r][c] = (−1)^{r+c}·det(minor(c, r))
            let cof = det_unchecked(ring, &minor(a, c, r));
            let cof = if (r + c) % 2 == 0 { cof } else { ring.neg(cof) };
            *out = ring.mul(det_inv, cof);
        }
    }
    Ok(inv)
}
