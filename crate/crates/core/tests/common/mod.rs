#![allow(dead_code)]

use dirac_ist::{Complex64, Field, GaussianBump, Grid2D, Potential};

pub const BUMPS: [(f64, f64, (f64, f64)); 4] = [
    (1.0, 0.0, (0.1, 0.0)),
    (0.6, 0.8, (-0.1, 0.05)),
    (-1.0, 0.0, (0.0, -0.1)),
    (0.0, 1.0, (0.05, 0.1)),
];

pub fn bump(k: usize, eps: f64) -> GaussianBump {
    let (re, im, c) = BUMPS[k];
    GaussianBump { amplitude: Complex64::new(re, im) * eps, center: c, width: 0.3 }
}

/// Gaussian test potential on `[-half, half]^2`; `mask` switches fields on.
pub fn gaussian_pot(half: f64, n: usize, eps: f64, mask: [bool; 4]) -> Potential {
    let g = Grid2D::square(half, n).unwrap();
    let bumps = std::array::from_fn(|k| mask[k].then(|| bump(k, eps)));
    Potential::gaussians(g, &bumps, 0.6).unwrap()
}

pub fn pot(n: usize, eps: f64) -> Potential {
    gaussian_pot(2.0, n, eps, [true; 4])
}

pub fn rel_pot(a: &Potential, b: &Potential) -> f64 {
    let fa: Vec<&Field> = a.fields().iter().collect();
    let fb: Vec<&Field> = b.fields().iter().collect();
    dirac_ist::relative_l2(&fa, &fb)
}

pub fn rel_vec(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn order(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}
