//! Piecewise-constant density reconstructions and one-dimensional transport
//! distances computed through pseudo-inverses.

use crate::dpa::discrete_densities;
use crate::error::{Error, Result};

/// Relative tolerance for two views to count as having the same mass.
pub const MASS_RTOL: f64 = 1e-10;

/// Piecewise-constant density: `values[k]` on `[breakpoints[k], breakpoints[k + 1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityView {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    mass: f64,
}

impl DensityView {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        assert_eq!(breakpoints.len(), values.len() + 1, "need one value per interval");
        if let Some(k) = breakpoints.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NotIncreasing { agent: 0, index: k });
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::DegenerateDensity);
        }
        let mass = breakpoints.windows(2).zip(&values).map(|(w, v)| v * (w[1] - w[0])).sum();
        Ok(DensityView { breakpoints, values, mass })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Density at `x`; zero outside the support.
    pub fn eval(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        if x < b[0] || x >= b[b.len() - 1] {
            return 0.0;
        }
        let k = b.partition_point(|&p| p <= x) - 1;
        self.values[k]
    }

    /// Mass of the reconstruction inside `[lo, hi]`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| v * (w[1].min(hi) - w[0].max(lo)).max(0.0))
            .sum()
    }
}

/// Density reconstruction of one agent's particles.
pub fn reconstruct(x: &[f64], sigma_n: f64) -> Result<DensityView> {
    let values = discrete_densities(x, sigma_n)?;
    DensityView::new(x.to_vec(), values)
}

/// Nondecreasing piecewise-affine map `[0, mass] -> R`. On the piece starting
/// at mass `masses[k]` it runs linearly from `starts[k]` to `ends[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverse {
    masses: Vec<f64>,
    starts: Vec<f64>,
    ends: Vec<f64>,
}

impl PseudoInverse {
    pub fn total_mass(&self) -> f64 {
        self.masses[self.masses.len() - 1]
    }

    /// Mass coordinates of the piece boundaries.
    pub fn mass_breakpoints(&self) -> &[f64] {
        &self.masses
    }

    fn piece_at(&self, m: f64) -> usize {
        let k = self.masses.partition_point(|&b| b <= m);
        k.clamp(1, self.starts.len()) - 1
    }

    fn on_piece(&self, k: usize, m: f64) -> f64 {
        let (m0, m1) = (self.masses[k], self.masses[k + 1]);
        if m <= m0 {
            return self.starts[k];
        }
        if m >= m1 {
            return self.ends[k];
        }
        self.starts[k] + (self.ends[k] - self.starts[k]) * (m - m0) / (m1 - m0)
    }

    pub fn eval(&self, m: f64) -> f64 {
        self.on_piece(self.piece_at(m), m)
    }
}

/// `X(m) = x_k + (m - m_k) / rho_k` with `m_k` the mass left of `x_k`.
pub fn pseudo_inverse(d: &DensityView) -> PseudoInverse {
    let mut masses = Vec::with_capacity(d.values.len() + 1);
    masses.push(0.0);
    let mut acc = 0.0;
    for (w, v) in d.breakpoints.windows(2).zip(&d.values) {
        acc += v * (w[1] - w[0]);
        masses.push(acc);
    }
    let n = d.values.len();
    PseudoInverse {
        masses,
        starts: d.breakpoints[..n].to_vec(),
        ends: d.breakpoints[1..].to_vec(),
    }
}

/// Pseudo-inverse of the empirical measure `sigma_N sum_{k<N} delta_{x_k}`:
/// constant `x_k` on `[k sigma_N, (k + 1) sigma_N)`.
pub fn empirical_pseudo_inverse(x: &[f64], sigma_n: f64) -> PseudoInverse {
    let n = x.len() - 1;
    PseudoInverse {
        masses: (0..=n).map(|k| k as f64 * sigma_n).collect(),
        starts: x[..n].to_vec(),
        ends: x[..n].to_vec(),
    }
}

/// `int_a^b |f|` for `f` affine with `f(a) = fa`, `f(b) = fb`.
fn abs_affine_integral(fa: f64, fb: f64, len: f64) -> f64 {
    if (fa >= 0.0) == (fb >= 0.0) || fa == 0.0 || fb == 0.0 {
        0.5 * len * (fa.abs() + fb.abs())
    } else {
        0.5 * len * (fa * fa + fb * fb) / (fa.abs() + fb.abs())
    }
}

/// `int_0^sigma |X_1 - X_2| dm`, exact on the merged mass grid.
pub fn pseudo_inverse_distance(p: &PseudoInverse, q: &PseudoInverse) -> Result<f64> {
    let (mp, mq) = (p.total_mass(), q.total_mass());
    if (mp - mq).abs() > MASS_RTOL * mp.abs().max(mq.abs()) {
        return Err(Error::MassMismatch { left: mp, right: mq });
    }
    let total = mp.min(mq);
    let mut grid: Vec<f64> = p.masses.iter().chain(&q.masses).copied().filter(|&m| m < total).collect();
    grid.push(total);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut acc = CompensatedSum::default();
    for w in grid.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let (i, j) = (p.piece_at(mid), q.piece_at(mid));
        let fa = p.on_piece(i, lo) - q.on_piece(j, lo);
        let fb = p.on_piece(i, hi) - q.on_piece(j, hi);
        acc.add(abs_affine_integral(fa, fb, hi - lo));
    }
    Ok(acc.value())
}

/// Neumaier summation.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// Scaled 1-Wasserstein distance between two reconstructions of equal mass.
pub fn wasserstein1(d1: &DensityView, d2: &DensityView) -> Result<f64> {
    pseudo_inverse_distance(&pseudo_inverse(d1), &pseudo_inverse(d2))
}

/// Mass-normalized mean opinion of the reconstruction.
pub fn first_moment(d: &DensityView) -> f64 {
    let s: f64 = d
        .breakpoints
        .windows(2)
        .zip(&d.values)
        .map(|(w, v)| v * (w[1] * w[1] - w[0] * w[0]) / 2.0)
        .sum();
    s / d.mass
}

/// Total variation of the reconstruction on the real line, jumps to zero at
/// both ends included.
pub fn total_variation(d: &DensityView) -> f64 {
    let v = &d.values;
    let inner: f64 = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    v[0] + inner + v[v.len() - 1]
}

/// Distance between the empirical measure of the particles and their
/// reconstruction.
pub fn empirical_wasserstein_gap(x: &[f64], sigma_n: f64) -> Result<f64> {
    // the distance is linear in the common mass scale; with unit pieces the
    // mass grid is the integers and carries no rounding
    let view = reconstruct(x, 1.0)?;
    let mut p = pseudo_inverse(&view);
    // the reconstruction has unit pieces only up to rounding; pin it to the
    // empirical grid so both maps share their breakpoints
    let e = empirical_pseudo_inverse(x, 1.0);
    p.masses.clone_from(&e.masses);
    Ok(sigma_n * pseudo_inverse_distance(&p, &e)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::scenario::OMEGA_LEN;

    fn uniform_on(a: f64, b: f64, mass: f64, pieces: usize) -> DensityView {
        let x: Vec<f64> = (0..=pieces).map(|k| a + (b - a) * k as f64 / pieces as f64).collect();
        reconstruct(&x, mass / pieces as f64).unwrap()
    }

    #[test]
    fn reconstruction_hand_instance() {
        let d = reconstruct(&[-1.0, 0.5, 1.0], 0.5).unwrap();
        assert!((d.values()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.values()[1] - 1.0).abs() < 1e-15);
        assert!((d.mass() - 1.0).abs() < 1e-15);
        let c = uniform_on(-1.0, 1.0, 2.0, 7);
        assert!(c.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn pseudo_inverse_of_uniform() {
        let p = pseudo_inverse(&uniform_on(-1.0, 1.0, 2.0, 4));
        for m in [0.0, 0.3, 1.0, 1.7, 2.0] {
            assert!((p.eval(m) - (-1.0 + m)).abs() < 1e-14);
        }
    }

    #[test]
    fn pseudo_inverse_hits_breakpoints() {
        let x = [-1.0, -0.3, 0.1, 0.8, 1.0];
        let p = pseudo_inverse(&reconstruct(&x, 0.25).unwrap());
        for (k, xk) in x.iter().enumerate() {
            assert!((p.eval(0.25 * k as f64) - xk).abs() < 1e-15);
        }
    }

    #[test]
    fn round_trip_through_breakpoints() {
        let x = [-1.0, -0.7, -0.2, 0.05, 0.6, 1.0];
        let d = reconstruct(&x, 0.3).unwrap();
        let p = pseudo_inverse(&d);
        let back: Vec<f64> = p.mass_breakpoints().iter().map(|&m| p.eval(m)).collect();
        let again = reconstruct(&back, 0.3).unwrap();
        for (a, b) in again.values().iter().zip(d.values()) {
            assert!((a - b).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn wasserstein_translation() {
        let a = uniform_on(-1.0, 0.0, 1.0, 5);
        let b = uniform_on(0.0, 1.0, 1.0, 3);
        assert!((wasserstein1(&a, &b).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn wasserstein_rejects_mass_mismatch() {
        let a = uniform_on(-1.0, 1.0, 1.0, 4);
        let b = uniform_on(-1.0, 1.0, 1.1, 4);
        assert!(matches!(wasserstein1(&a, &b), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn moments_and_variation() {
        assert!(first_moment(&uniform_on(-1.0, 1.0, 1.0, 6)).abs() < 1e-15);
        assert!((first_moment(&uniform_on(0.0, 1.0, 1.0, 6)) - 0.5).abs() < 1e-15);
        let c = uniform_on(-1.0, 1.0, 3.0, 5);
        assert!((total_variation(&c) - 3.0).abs() < 1e-14);
        let inc = DensityView::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.5, 1.0, 2.5]).unwrap();
        assert!((total_variation(&inc) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn variation_matches_direct_sum() {
        let v = vec![0.3, 1.2, 0.4, 0.9, 2.0, 0.1];
        let x: Vec<f64> = (0..=6).map(|k| k as f64).collect();
        let d = DensityView::new(x, v.clone()).unwrap();
        let mut direct = v[0] + v[5];
        for k in 1..6 {
            direct += (v[k] - v[k - 1]).abs();
        }
        assert!((total_variation(&d) - direct).abs() < 1e-15);
    }

    #[test]
    fn empirical_gap_two_intervals() {
        // pieces of mass 0.5 and lengths 1.5, 0.5: 0.5 * (1.5 + 0.5) / 2
        let g = empirical_wasserstein_gap(&[-1.0, 0.5, 1.0], 0.5).unwrap();
        assert!((g - 0.5).abs() < 1e-15);
        assert!(g <= 0.5);
    }

    #[test]
    fn empirical_gap_scales_with_sigma_n() {
        for n in [4usize, 16, 64] {
            let x: Vec<f64> = (0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64).collect();
            let sn = 1.0 / n as f64;
            let g = empirical_wasserstein_gap(&x, sn).unwrap();
            assert!((g - sn).abs() < 1e-14);
        }
    }

    fn sorted_points(raw: &[f64]) -> Vec<f64> {
        let mut inner: Vec<f64> = raw.to_vec();
        inner.sort_by(f64::total_cmp);
        inner.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let mut x = vec![-1.0];
        x.extend(inner);
        x.push(1.0);
        x
    }

    proptest! {
        #[test]
        fn reconstruction_mass_is_exact(raw in proptest::collection::vec(-0.99f64..0.99, 1..30), sigma in 0.1f64..3.0) {
            let x = sorted_points(&raw);
            let n = x.len() - 1;
            let d = reconstruct(&x, sigma / n as f64).unwrap();
            prop_assert!((d.mass() - sigma).abs() <= 1e-12 * sigma);
        }

        #[test]
        fn pseudo_inverse_is_nondecreasing(raw in proptest::collection::vec(-0.99f64..0.99, 1..30), m in proptest::collection::vec(0.0f64..1.0, 2..20)) {
            let x = sorted_points(&raw);
            let n = x.len() - 1;
            let p = pseudo_inverse(&reconstruct(&x, 1.0 / n as f64).unwrap());
            let mut m = m;
            m.sort_by(f64::total_cmp);
            for w in m.windows(2) {
                prop_assert!(p.eval(w[0]) <= p.eval(w[1]));
            }
        }

        #[test]
        fn empirical_gap_within_bound(raw in proptest::collection::vec(-0.99f64..0.99, 1..200), mass in 0.1f64..3.0) {
            let x = sorted_points(&raw);
            let sn = mass / (x.len() - 1) as f64;
            let g = empirical_wasserstein_gap(&x, sn).unwrap();
            prop_assert!((g - sn).abs() <= 1e-13);
            prop_assert!(g <= sn * OMEGA_LEN / 2.0, "{} > {}", g, sn);
        }
    }
}
