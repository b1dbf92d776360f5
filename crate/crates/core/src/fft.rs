//! In-place iterative radix-2 FFT on split real/imaginary arrays.

use alloc::vec::Vec;

/// Precomputed twiddles and bit reversal for one power-of-two length.
#[derive(Debug, Clone)]
pub(crate) struct Fft {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    reversed: Vec<usize>,
}

impl Fft {
    /// `n` must be a power of two.
    pub(crate) fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let half = n / 2;
        let mut cos = Vec::with_capacity(half);
        let mut sin = Vec::with_capacity(half);
        for k in 0..half {
            let (s, c) = libm::sincos(-2.0 * core::f64::consts::PI * k as f64 / n as f64);
            cos.push(c);
            sin.push(s);
        }
        let bits = n.trailing_zeros();
        let reversed = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Self { n, cos, sin, reversed }
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }

    /// `X_k = Σ_j x_j e^{-2πijk/n}`.
    pub(crate) fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        self.transform(re, im, false);
    }

    /// Inverse of [`forward`](Self::forward), including the `1/n` factor.
    pub(crate) fn inverse(&self, re: &mut [f64], im: &mut [f64]) {
        self.transform(re, im, true);
        let scale = 1.0 / self.n as f64;
        re.iter_mut().for_each(|v| *v *= scale);
        im.iter_mut().for_each(|v| *v *= scale);
    }

    fn transform(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.reversed[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let sign = if inverse { -1.0 } else { 1.0 };
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let (wr, wi) = (self.cos[k * stride], sign * self.sin[k * stride]);
                    let (a, b) = (start + k, start + k + half);
                    let tr = wr * re[b] - wi * im[b];
                    let ti = wr * im[b] + wi * re[b];
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len *= 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn naive_dft(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = re.len();
        let mut out_re = vec![0.0; n];
        let mut out_im = vec![0.0; n];
        for k in 0..n {
            for j in 0..n {
                let ang = -2.0 * core::f64::consts::PI * (j * k) as f64 / n as f64;
                let (s, c) = libm::sincos(ang);
                out_re[k] += re[j] * c - im[j] * s;
                out_im[k] += re[j] * s + im[j] * c;
            }
        }
        (out_re, out_im)
    }

    #[test]
    fn matches_naive_dft_and_inverts() {
        for n in [1usize, 2, 4, 8, 64] {
            let re0: Vec<f64> = (0..n).map(|i| libm::sin(1.3 * i as f64) + 0.1 * i as f64).collect();
            let im0: Vec<f64> = (0..n).map(|i| libm::cos(0.7 * i as f64 * i as f64)).collect();
            let fft = Fft::new(n);
            assert_eq!(fft.len(), n);
            let (mut re, mut im) = (re0.clone(), im0.clone());
            fft.forward(&mut re, &mut im);
            let (er, ei) = naive_dft(&re0, &im0);
            for k in 0..n {
                assert!((re[k] - er[k]).abs() < 1e-10 && (im[k] - ei[k]).abs() < 1e-10);
            }
            fft.inverse(&mut re, &mut im);
            for k in 0..n {
                assert!((re[k] - re0[k]).abs() < 1e-12 && (im[k] - im0[k]).abs() < 1e-12);
            }
        }
    }
}
