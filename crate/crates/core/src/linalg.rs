//! Dense complex LU with partial pivoting and a 1-norm condition estimate.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// LU factors of a square row-major matrix, `P A = L U` with unit lower `L`.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    norm1: f64,
}

/// Returned when a pivot is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    pub column: usize,
}

/// 1-norm (max column sum) of a row-major square matrix.
pub fn norm1(a: &[Complex64], n: usize) -> f64 {
    let mut col = vec![0.0; n];
    for r in 0..n {
        for (c, v) in a[r * n..(r + 1) * n].iter().enumerate() {
            col[c] += v.norm();
        }
    }
    col.into_iter().fold(0.0, f64::max)
}

impl Lu {
    pub fn factor(mut a: Vec<Complex64>, n: usize) -> Result<Self, Singular> {
        assert_eq!(a.len(), n * n);
        let norm1 = norm1(&a, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].norm();
            for r in k + 1..n {
                let v = a[r * n + k].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return Err(Singular { column: k });
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let inv = 1.0 / a[k * n + k];
            let (top, bottom) = a.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n + k + 1..k * n + n];
            for r in 0..n - k - 1 {
                let row = &mut bottom[r * n..(r + 1) * n];
                let l = row[k] * inv;
                row[k] = l;
                if l != ZERO {
                    for (x, &u) in row[k + 1..].iter_mut().zip(pivot_row) {
                        *x -= l * u;
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm, norm1 })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let row = &self.lu[r * n..r * n + r];
            let s: Complex64 = row.iter().zip(&x[..r]).map(|(l, v)| l * v).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let row = &self.lu[r * n + r + 1..(r + 1) * n];
            let s: Complex64 = row.iter().zip(&x[r + 1..]).map(|(u, v)| u * v).sum();
            x[r] = (x[r] - s) / self.lu[r * n + r];
        }
        b.copy_from_slice(&x);
    }

    /// Solves `A^H x = b` in place.
    pub fn solve_adjoint_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        let mut x = b.to_vec();
        // U^H w = b
        for r in 0..n {
            let d = x[r] / self.lu[r * n + r].conj();
            x[r] = d;
            for c in r + 1..n {
                x[c] -= self.lu[r * n + c].conj() * d;
            }
        }
        // L^H v = w
        for r in (0..n).rev() {
            let d = x[r];
            for c in 0..r {
                x[c] -= self.lu[r * n + c].conj() * d;
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = x[k];
        }
    }

    /// Estimate of `||A||_1 ||A^-1||_1` (Hager's method with Higham's refinements).
    pub fn condest(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 1.0;
        }
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0f64;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            self.solve_in_place(&mut x);
            let y1: f64 = x.iter().map(|v| v.norm()).sum();
            if y1 <= est && last_j != usize::MAX {
                break;
            }
            est = est.max(y1);
            let mut z: Vec<Complex64> =
                x.iter().map(|v| if v.norm() > 0.0 { v / v.norm() } else { Complex64::new(1.0, 0.0) }).collect();
            self.solve_adjoint_in_place(&mut z);
            let (j, _) = z
                .iter()
                .enumerate()
                .map(|(k, v)| (k, v.norm()))
                .fold((0, -1.0), |acc, e| if e.1 > acc.1 { e } else { acc });
            if j == last_j {
                break;
            }
            last_j = j;
            x = vec![ZERO; n];
            x[j] = Complex64::new(1.0, 0.0);
        }
        // alternating-sign probe guards against underestimates
        let mut b: Vec<Complex64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(s * (1.0 + i as f64 / (n.max(2) - 1) as f64), 0.0)
            })
            .collect();
        self.solve_in_place(&mut b);
        let alt = 2.0 * b.iter().map(|v| v.norm()).sum::<f64>() / (3.0 * n as f64);
        self.norm1 * est.max(alt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n * n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn matvec(a: &[Complex64], x: &[Complex64], n: usize) -> Vec<Complex64> {
        (0..n).map(|r| (0..n).map(|c| a[r * n + c] * x[c]).sum()).collect()
    }

    fn inverse(a: &[Complex64], n: usize) -> Vec<Complex64> {
        let lu = Lu::factor(a.to_vec(), n).unwrap();
        let mut inv = vec![ZERO; n * n];
        for c in 0..n {
            let mut e = vec![ZERO; n];
            e[c] = Complex64::new(1.0, 0.0);
            lu.solve_in_place(&mut e);
            for r in 0..n {
                inv[r * n + c] = e[r];
            }
        }
        inv
    }

    #[test]
    fn solves_random_systems() {
        for (n, seed) in [(1, 1), (5, 2), (40, 3)] {
            let a = random(n, seed);
            let x: Vec<Complex64> = (0..n).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
            let mut b = matvec(&a, &x, n);
            Lu::factor(a.clone(), n).unwrap().solve_in_place(&mut b);
            let err = b.iter().zip(&x).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "n={n}: {err}");
        }
    }

    #[test]
    fn adjoint_solve() {
        let n = 12;
        let a = random(n, 9);
        let mut ah = vec![ZERO; n * n];
        for r in 0..n {
            for c in 0..n {
                ah[c * n + r] = a[r * n + c].conj();
            }
        }
        let x: Vec<Complex64> = (0..n).map(|k| Complex64::new(1.0, k as f64)).collect();
        let mut b = matvec(&ah, &x, n);
        Lu::factor(a, n).unwrap().solve_adjoint_in_place(&mut b);
        let err = b.iter().zip(&x).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn condest_brackets_true_condition() {
        for seed in 0..5 {
            let n = 20;
            let a = random(n, 100 + seed);
            let exact = norm1(&a, n) * norm1(&inverse(&a, n), n);
            let est = Lu::factor(a, n).unwrap().condest();
            assert!(est <= exact * (1.0 + 1e-10) && est >= exact / 10.0, "est {est} exact {exact}");
        }
    }

    #[test]
    fn identity_condition_is_one() {
        let n = 7;
        let mut a = vec![ZERO; n * n];
        for k in 0..n {
            a[k * n + k] = Complex64::new(1.0, 0.0);
        }
        assert!((Lu::factor(a, n).unwrap().condest() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn detects_singular() {
        let a = vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(4.0, 0.0)];
        assert!(Lu::factor(a, 2).is_err());
    }
}
