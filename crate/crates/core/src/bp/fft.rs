//! Radix-2 DFT on the cyclic group Z_q, q = 2^m.
//!
//! Forward: `X[k] = Σ_j x[j]·exp(−2πi·jk/q)`. The inverse carries the 1/q
//! factor, so `inverse(forward(x)) = x` and pointwise products of forward
//! transforms correspond to cyclic convolution.

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct Fft {
    q: usize,
    twiddle: Vec<Complex64>,
    rev: Vec<usize>,
}

impl Fft {
    /// `q` must be a power of two.
    pub fn new(q: usize) -> Self {
        assert!(q.is_power_of_two(), "DFT length {q} is not a power of two");
        let bits = q.trailing_zeros();
        let twiddle = (0..q / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 / q as f64))
            .collect();
        let rev = (0..q)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Self { q, twiddle, rev }
    }

    pub fn len(&self) -> usize {
        self.q
    }

    pub fn is_empty(&self) -> bool {
        self.q == 0
    }

    /// In-place forward transform.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    /// In-place inverse transform including the 1/q scale.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
        let s = 1.0 / self.q as f64;
        for x in buf.iter_mut() {
            *x *= s;
        }
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let q = self.q;
        debug_assert_eq!(buf.len(), q);
        match q {
            1 => return,
            2 => {
                let (a, b) = (buf[0], buf[1]);
                buf[0] = a + b;
                buf[1] = a - b;
                return;
            }
            4 => {
                let (a, b, c, d) = (buf[0], buf[1], buf[2], buf[3]);
                let (s0, d0, s1, d1) = (a + c, a - c, b + d, b - d);
                // −i·d1 forward, +i·d1 inverse
                let rot = if inverse { Complex64::new(-d1.im, d1.re) } else { Complex64::new(d1.im, -d1.re) };
                buf[0] = s0 + s1;
                buf[1] = d0 + rot;
                buf[2] = s0 - s1;
                buf[3] = d0 - rot;
                return;
            }
            _ => {}
        }
        for i in 0..q {
            let j = self.rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= q {
            let half = len / 2;
            let step = q / len;
            for start in (0..q).step_by(len) {
                for k in 0..half {
                    let w = self.twiddle[k * step];
                    let w = if inverse { w.conj() } else { w };
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}
