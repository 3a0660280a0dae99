//! Ensemble parameters and statistics.
//!
//! Members are indexed from 0 in code. The perturbation factor keeps the
//! one-based convention of the manufactured-solution study, so member `k`
//! uses `j = k + 1` there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Kinematic viscosity and magnetic diffusivity of one member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberParams {
    pub nu: f64,
    pub nu_m: f64,
}

impl MemberParams {
    pub fn new(nu: f64, nu_m: f64) -> Result<Self> {
        let p = Self { nu, nu_m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite() && self.nu_m > 0.0 && self.nu_m.is_finite()) {
            return Err(invalid(format!("viscosities must be positive, got nu={} nu_m={}", self.nu, self.nu_m)));
        }
        Ok(())
    }
}

/// Run-level parameters shared by all members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Coupling number.
    pub s: f64,
    /// Eddy-viscosity tuning parameter.
    pub mu: f64,
    pub dt: f64,
    pub end_time: f64,
    /// Initial-condition perturbation size.
    pub eps: f64,
    pub members: Vec<MemberParams>,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(invalid("an ensemble needs at least one member"));
        }
        for m in &self.members {
            m.validate()?;
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(invalid(format!("coupling number must be nonnegative, got {}", self.s)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.end_time > 0.0 && self.end_time.is_finite()) {
            return Err(invalid(format!("end time must be positive, got {}", self.end_time)));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(invalid(format!("perturbation must be nonnegative, got {}", self.eps)));
        }
        Ok(())
    }

    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    /// `round(T / dt)`, at least one step.
    pub fn num_steps(&self) -> usize {
        ((self.end_time / self.dt).round() as usize).max(1)
    }
}

/// Means, fluctuations and stability margins of the viscosity pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityStats {
    pub nu_bar: f64,
    pub nu_m_bar: f64,
    pub nu_prime: Vec<f64>,
    pub nu_m_prime: Vec<f64>,
    /// `nu_bar + nu_m_bar - |nu_j - nu_m_j| - |nu'_j + nu'_m_j|`
    pub alpha: Vec<f64>,
    /// Members with `alpha <= 0`, counting values within rounding of zero
    /// (`1e-12 * (nu_bar + nu_m_bar)`) as zero.
    pub flagged: Vec<usize>,
}

impl ViscosityStats {
    pub fn all_positive(&self) -> bool {
        self.flagged.is_empty()
    }

    /// `nu_bar + nu_m_bar`
    pub fn total_mean(&self) -> f64 {
        self.nu_bar + self.nu_m_bar
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sum::<f64>() / n
}

pub fn viscosity_stats(members: &[MemberParams]) -> ViscosityStats {
    let nu_bar = mean(members.iter().map(|m| m.nu));
    let nu_m_bar = mean(members.iter().map(|m| m.nu_m));
    let nu_prime: Vec<f64> = members.iter().map(|m| m.nu - nu_bar).collect();
    let nu_m_prime: Vec<f64> = members.iter().map(|m| m.nu_m - nu_m_bar).collect();
    let alpha: Vec<f64> = members
        .iter()
        .zip(nu_prime.iter().zip(&nu_m_prime))
        .map(|(m, (a, b))| nu_bar + nu_m_bar - (m.nu - m.nu_m).abs() - (a + b).abs())
        .collect();
    let tol = 1e-12 * (nu_bar + nu_m_bar);
    let flagged = alpha.iter().enumerate().filter(|(_, a)| **a <= tol).map(|(j, _)| j).collect();
    ViscosityStats { nu_bar, nu_m_bar, nu_prime, nu_m_prime, alpha, flagged }
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(invalid(format!("field lengths differ: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

/// `v = u + sqrt(s) B`, `w = u - sqrt(s) B` coefficientwise.
pub fn elsasser_from_primitive(u: &[f64], b: &[f64], s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(s >= 0.0) {
        return Err(invalid(format!("coupling number must be nonnegative, got {s}")));
    }
    check_same_len(u, b)?;
    let r = s.sqrt();
    Ok((u.iter().zip(b).map(|(u, b)| u + r * b).collect(), u.iter().zip(b).map(|(u, b)| u - r * b).collect()))
}

/// Pointwise version of [`elsasser_from_primitive`] for boundary and initial data.
pub fn elsasser_point(u: [f64; 2], b: [f64; 2], s: f64) -> ([f64; 2], [f64; 2]) {
    let r = s.sqrt();
    ([u[0] + r * b[0], u[1] + r * b[1]], [u[0] - r * b[0], u[1] - r * b[1]])
}

/// Inverse transform. With `s = 0` the magnetic field is only recoverable
/// (as zero) when `v == w`.
pub fn primitive_from_elsasser(v: &[f64], w: &[f64], s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(s >= 0.0) {
        return Err(invalid(format!("coupling number must be nonnegative, got {s}")));
    }
    check_same_len(v, w)?;
    let u = v.iter().zip(w).map(|(v, w)| 0.5 * (v + w)).collect();
    if s == 0.0 {
        let max_gap = v.iter().zip(w).map(|(v, w)| (v - w).abs()).fold(0.0, f64::max);
        if max_gap > 0.0 {
            return Err(Error::DegenerateCoupling { max_gap });
        }
        return Ok((u, vec![0.0; v.len()]));
    }
    let scale = 1.0 / (2.0 * s.sqrt());
    Ok((u, v.iter().zip(w).map(|(v, w)| (v - w) * scale).collect()))
}

/// Mean and fluctuations of one family of member fields.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mean: Vec<f64>,
    pub fluctuations: Vec<Vec<f64>>,
}

pub fn ensemble_stats(members: &[Vec<f64>]) -> Result<EnsembleStats> {
    let first = members.first().ok_or_else(|| invalid("statistics of an empty ensemble"))?;
    if let Some(m) = members.iter().find(|m| m.len() != first.len()) {
        return Err(invalid(format!("member fields differ in length: {} vs {}", m.len(), first.len())));
    }
    let inv = 1.0 / members.len() as f64;
    let mut mean = vec![0.0; first.len()];
    for m in members {
        for (acc, x) in mean.iter_mut().zip(m) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x *= inv);
    let fluctuations = members.iter().map(|m| m.iter().zip(&mean).map(|(x, c)| x - c).collect()).collect();
    Ok(EnsembleStats { mean, fluctuations })
}

/// Member coefficient vectors at one time level plus cached statistics.
///
/// `v`, `w` live in the velocity space, `q`, `r` in the pressure space.
/// After editing member fields in place call [`EnsembleState::refresh`].
#[derive(Debug, Clone)]
pub struct EnsembleState {
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    step: usize,
    stats_v: EnsembleStats,
    stats_w: EnsembleStats,
}

impl EnsembleState {
    pub fn new(v: Vec<Vec<f64>>, w: Vec<Vec<f64>>, q: Vec<Vec<f64>>, r: Vec<Vec<f64>>) -> Result<Self> {
        if w.len() != v.len() || q.len() != v.len() || r.len() != v.len() {
            return Err(invalid("v, w, q and r must hold the same number of members"));
        }
        let stats_v = ensemble_stats(&v)?;
        let stats_w = ensemble_stats(&w)?;
        if stats_v.mean.len() != stats_w.mean.len() {
            return Err(invalid("v and w fields differ in length"));
        }
        Ok(Self { v, w, q, r, step: 0, stats_v, stats_w })
    }

    pub fn num_members(&self) -> usize {
        self.v.len()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Replaces all member fields by the next time level and refreshes the caches.
    pub fn advance_to(&mut self, v: Vec<Vec<f64>>, w: Vec<Vec<f64>>, q: Vec<Vec<f64>>, r: Vec<Vec<f64>>) -> Result<()> {
        let next = Self::new(v, w, q, r)?;
        let step = self.step + 1;
        *self = next;
        self.step = step;
        Ok(())
    }

    /// Recomputes the cached statistics from the member fields.
    pub fn refresh(&mut self) -> Result<()> {
        self.stats_v = ensemble_stats(&self.v)?;
        self.stats_w = ensemble_stats(&self.w)?;
        Ok(())
    }

    pub fn mean_v(&self) -> &[f64] {
        &self.stats_v.mean
    }

    pub fn mean_w(&self) -> &[f64] {
        &self.stats_w.mean
    }

    pub fn fluct_v(&self) -> &[Vec<f64>] {
        &self.stats_v.fluctuations
    }

    pub fn fluct_w(&self) -> &[Vec<f64>] {
        &self.stats_w.fluctuations
    }

    /// Largest deviation between the caches and freshly recomputed statistics.
    pub fn cache_error(&self) -> Result<f64> {
        let fresh_v = ensemble_stats(&self.v)?;
        let fresh_w = ensemble_stats(&self.w)?;
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let mut worst = diff(&fresh_v.mean, &self.stats_v.mean).max(diff(&fresh_w.mean, &self.stats_w.mean));
        for (a, b) in fresh_v.fluctuations.iter().zip(&self.stats_v.fluctuations) {
            worst = worst.max(diff(a, b));
        }
        for (a, b) in fresh_w.fluctuations.iter().zip(&self.stats_w.fluctuations) {
            worst = worst.max(diff(a, b));
        }
        Ok(worst)
    }
}

/// `mu * dt * (max_j |z'_j(x)|)^2` at every point, given the fluctuation
/// values `fluct[j][point]`.
pub fn eddy_viscosity_from_values(fluct: &[Vec<[f64; 2]>], mu: f64, dt: f64) -> Vec<f64> {
    let Some(first) = fluct.first() else { return Vec::new() };
    (0..first.len())
        .map(|k| {
            let l2 = fluct.iter().map(|f| f[k][0] * f[k][0] + f[k][1] * f[k][1]).fold(0.0, f64::max);
            mu * dt * l2
        })
        .collect()
}

/// Eddy viscosity at the quadrature points of `assembler` (cell-major).
pub fn eddy_viscosity_at_quadrature(
    assembler: &crate::fem::Assembler,
    fluctuations: &[Vec<f64>],
    mu: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let values = fluctuations.iter().map(|f| assembler.values_at_quadrature(f)).collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Ok(vec![0.0; assembler.num_quadrature_points() * assembler.space().num_cells()]);
    }
    Ok(eddy_viscosity_from_values(&values, mu, dt))
}

/// Rectangle of viscosity pairs to sample from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViscosityRanges {
    pub nu: [f64; 2],
    pub nu_m: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// i.i.d. uniform draws from a ChaCha8 stream with this seed.
    Uniform { seed: u64 },
    /// Cell midpoints of an `rows x cols` grid, `rows` the largest divisor of
    /// `J` not exceeding `sqrt(J)`; `nu` varies along the columns.
    Grid,
}

pub fn sample_viscosities(ranges: ViscosityRanges, count: usize, sampling: Sampling) -> Result<Vec<MemberParams>> {
    for (name, [lo, hi]) in [("nu", ranges.nu), ("nu_m", ranges.nu_m)] {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(invalid(format!("{name} range [{lo}, {hi}] is empty or not positive")));
        }
    }
    if count == 0 {
        return Err(invalid("at least one member is required"));
    }
    let lerp = |[lo, hi]: [f64; 2], t: f64| lo + (hi - lo) * t;
    let members = match sampling {
        Sampling::Uniform { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    let a: f64 = rng.random();
                    let b: f64 = rng.random();
                    MemberParams { nu: lerp(ranges.nu, a), nu_m: lerp(ranges.nu_m, b) }
                })
                .collect()
        }
        Sampling::Grid => {
            let rows = (1..=count).filter(|d| count % d == 0 && d * d <= count).max().unwrap_or(1);
            let cols = count / rows;
            (0..count)
                .map(|k| {
                    let (i, j) = (k / cols, k % cols);
                    MemberParams {
                        nu: lerp(ranges.nu, (j as f64 + 0.5) / cols as f64),
                        nu_m: lerp(ranges.nu_m, (i as f64 + 0.5) / rows as f64),
                    }
                })
                .collect()
        }
    };
    Ok(members)
}

/// `1 + (-1)^(j+1) ceil(j/2) eps / 5` for one-based `j`.
pub fn perturbation_factor(j: usize, eps: f64) -> f64 {
    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
    1.0 + sign * j.div_ceil(2) as f64 * eps / 5.0
}

pub fn perturbed_member_field(base: &[f64], j: usize, eps: f64) -> Vec<f64> {
    let c = perturbation_factor(j, eps);
    base.iter().map(|x| c * x).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn elsasser_examples() {
        let (v, w) = elsasser_from_primitive(&[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert_eq!((v, w), (vec![1.0, 1.0], vec![1.0, -1.0]));
        let (v, w) = elsasser_from_primitive(&[2.0, 0.0], &[0.0, 2.0], 0.25).unwrap();
        assert_eq!((v, w), (vec![2.0, 1.0], vec![2.0, -1.0]));
        let (v, w) = elsasser_from_primitive(&[0.3, -0.7], &[5.0, 6.0], 0.0).unwrap();
        assert_eq!(v, vec![0.3, -0.7]);
        assert_eq!(w, v);
        assert!(elsasser_from_primitive(&[1.0], &[1.0], -1.0).is_err());
    }

    #[test]
    fn inverse_examples() {
        let (u, b) = primitive_from_elsasser(&[1.0, 1.0], &[1.0, -1.0], 1.0).unwrap();
        assert_eq!((u, b), (vec![1.0, 0.0], vec![0.0, 1.0]));
        let (_, b) = primitive_from_elsasser(&[0.4, 2.0], &[0.4, 2.0], 0.3).unwrap();
        assert_eq!(b, vec![0.0, 0.0]);
        let (_, b) = primitive_from_elsasser(&[1.0], &[1.0], 0.0).unwrap();
        assert_eq!(b, vec![0.0]);
        assert!(matches!(
            primitive_from_elsasser(&[1.0], &[0.5], 0.0),
            Err(Error::DegenerateCoupling { max_gap }) if max_gap == 0.5
        ));
    }

    #[test]
    fn stats_examples() {
        let st = ensemble_stats(&[vec![2.0, 2.0], vec![4.0, 4.0]]).unwrap();
        assert_eq!(st.mean, vec![3.0, 3.0]);
        assert_eq!(st.fluctuations, vec![vec![-1.0, -1.0], vec![1.0, 1.0]]);
        let single = ensemble_stats(&[vec![1.5, -2.0]]).unwrap();
        assert!(single.fluctuations[0].iter().all(|&x| x == 0.0));
        assert!(ensemble_stats(&[]).is_err());
    }

    #[test]
    fn signed_perturbation_sum_vanishes_for_even_count() {
        let signed: i64 = (1..=20i64).map(|j| if j % 2 == 1 { (j + 1) / 2 } else { -(j / 2) }).sum();
        assert_eq!(signed, 0);
        let base = vec![1.0, -0.25, 3.5];
        let members: Vec<Vec<f64>> = (1..=20).map(|j| perturbed_member_field(&base, j, 0.01)).collect();
        let st = ensemble_stats(&members).unwrap();
        for (m, b) in st.mean.iter().zip(&base) {
            assert!(close(*m, *b, 1e-15));
        }
    }

    #[test]
    fn perturbation_factor_examples() {
        assert_eq!(perturbation_factor(1, 0.0), 1.0);
        assert_eq!(perturbation_factor(7, 0.0), 1.0);
        assert!(close(perturbation_factor(1, 0.01), 1.002, 1e-15));
        assert!(close(perturbation_factor(2, 0.01), 0.998, 1e-15));
        assert!(close(perturbation_factor(20, 0.01), 0.98, 1e-15));
    }

    #[test]
    fn alpha_examples() {
        // means (0.01, 0.1) with a symmetric partner for each probe member
        let pair = |nu: f64, nu_m: f64| {
            let members = [MemberParams { nu, nu_m }, MemberParams { nu: 0.02 - nu, nu_m: 0.2 - nu_m }];
            viscosity_stats(&members)
        };
        let at_mean = pair(0.01, 0.1);
        assert!(close(at_mean.alpha[0], 0.02, 1e-15));
        assert!(at_mean.all_positive());
        let inner = pair(0.0105, 0.105);
        assert!(close(inner.alpha[0], 0.01, 1e-15));
        let corner = pair(0.011, 0.11);
        assert!(close(corner.alpha[0], 0.0, 1e-15));
        assert!(corner.flagged.contains(&0));
    }

    #[test]
    fn eddy_viscosity_examples() {
        let same = vec![vec![[0.0, 0.0]; 3]; 4];
        assert!(eddy_viscosity_from_values(&same, 1.0, 0.05).iter().all(|&x| x == 0.0));
        let f = vec![vec![[0.0, 2.0]], vec![[1.0, 0.0]], vec![[0.0, -1.0]]];
        assert!(close(eddy_viscosity_from_values(&f, 1.0, 0.05)[0], 0.2, 1e-15));
        let f = vec![vec![[0.06, 0.08]], vec![[0.0, 0.0]]];
        assert!(close(eddy_viscosity_from_values(&f, 1.0, 0.001 / 8.0)[0], 1.25e-6, 1e-20));
    }

    #[test]
    fn sampling_examples() {
        let ranges = ViscosityRanges { nu: [0.009, 0.011], nu_m: [0.09, 0.11] };
        let a = sample_viscosities(ranges, 20, Sampling::Uniform { seed: 42 }).unwrap();
        let b = sample_viscosities(ranges, 20, Sampling::Uniform { seed: 42 }).unwrap();
        assert_eq!(a, b);
        let c = sample_viscosities(ranges, 20, Sampling::Uniform { seed: 43 }).unwrap();
        assert_ne!(a, c);
        for m in &a {
            assert!((0.009..=0.011).contains(&m.nu) && (0.09..=0.11).contains(&m.nu_m));
        }
        let point = ViscosityRanges { nu: [0.01, 0.01], nu_m: [0.1, 0.1] };
        for s in [Sampling::Grid, Sampling::Uniform { seed: 1 }] {
            assert!(sample_viscosities(point, 5, s).unwrap().iter().all(|m| m.nu == 0.01 && m.nu_m == 0.1));
        }
        let bad = ViscosityRanges { nu: [0.02, 0.01], nu_m: [0.1, 0.2] };
        assert!(sample_viscosities(bad, 3, Sampling::Grid).is_err());
    }

    #[test]
    fn grid_sampling_is_centered_and_stable() {
        for ranges in [
            ViscosityRanges { nu: [0.009, 0.011], nu_m: [0.09, 0.11] },
            ViscosityRanges { nu: [0.009, 0.011], nu_m: [0.0009, 0.0011] },
            ViscosityRanges { nu: [0.0009, 0.0011], nu_m: [0.009, 0.011] },
        ] {
            let m = sample_viscosities(ranges, 20, Sampling::Grid).unwrap();
            let st = viscosity_stats(&m);
            assert!(close(st.nu_bar, 0.5 * (ranges.nu[0] + ranges.nu[1]), 1e-15));
            assert!(close(st.nu_m_bar, 0.5 * (ranges.nu_m[0] + ranges.nu_m[1]), 1e-15));
            assert!(st.all_positive(), "{:?}", st.alpha);
        }
    }

    #[test]
    fn state_caches_track_members() {
        let v = vec![vec![1.0, 2.0], vec![3.0, 6.0]];
        let w = vec![vec![0.0, 0.0], vec![2.0, -2.0]];
        let mut st = EnsembleState::new(v, w, vec![vec![]; 2], vec![vec![]; 2]).unwrap();
        assert_eq!(st.mean_v(), &[2.0, 4.0]);
        assert_eq!(st.fluct_w()[1], vec![1.0, -1.0]);
        st.advance_to(vec![vec![5.0, 5.0]; 2], vec![vec![1.0, 1.0]; 2], vec![vec![]; 2], vec![vec![]; 2]).unwrap();
        assert_eq!(st.step(), 1);
        assert_eq!(st.cache_error().unwrap(), 0.0);
        assert!(st.fluct_v().iter().flatten().all(|&x| x == 0.0));
    }

    proptest! {
        #[test]
        fn elsasser_round_trip(
            u in prop::collection::vec(-10.0f64..10.0, 1..40),
            seed in any::<u64>(),
            s in 1e-4f64..10.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = u.iter().map(|_| Rng::random_range(&mut rng, -10.0..10.0)).collect();
            let (v, w) = elsasser_from_primitive(&u, &b, s).unwrap();
            let (u2, b2) = primitive_from_elsasser(&v, &w, s).unwrap();
            for (x, y) in u.iter().zip(&u2) {
                prop_assert!((x - y).abs() <= 1e-13 * x.abs().max(1.0));
            }
            for (x, y) in b.iter().zip(&b2) {
                prop_assert!((x - y).abs() <= 1e-13 * x.abs().max(1.0) / s.sqrt().min(1.0));
            }
        }

        #[test]
        fn fluctuations_sum_to_zero(fields in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 1..12)) {
            let st = ensemble_stats(&fields).unwrap();
            for k in 0..6 {
                let s: f64 = st.fluctuations.iter().map(|f| f[k]).sum();
                prop_assert!(s.abs() <= 1e-12 * fields.len() as f64);
            }
        }

        #[test]
        fn alpha_is_permutation_invariant(
            pairs in prop::collection::vec((0.001f64..0.1, 0.001f64..0.1), 2..10),
            rot in 0usize..10,
        ) {
            let members: Vec<MemberParams> = pairs.iter().map(|&(nu, nu_m)| MemberParams { nu, nu_m }).collect();
            let mut shifted = members.clone();
            let k = rot % members.len();
            shifted.rotate_left(k);
            let a = viscosity_stats(&members).alpha;
            let b = viscosity_stats(&shifted).alpha;
            for (j, x) in a.iter().enumerate() {
                let y = b[(j + members.len() - k) % members.len()];
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }

        #[test]
        fn eddy_viscosity_is_symmetric_and_quadratic(
            vals in prop::collection::vec(prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 4), 1..8),
            scale in 0.1f64..10.0,
        ) {
            let f: Vec<Vec<[f64; 2]>> = vals.iter().map(|m| m.iter().map(|&(a, b)| [a, b]).collect()).collect();
            let base = eddy_viscosity_from_values(&f, 1.3, 0.01);
            let mut rev = f.clone();
            rev.reverse();
            prop_assert_eq!(&base, &eddy_viscosity_from_values(&rev, 1.3, 0.01));
            let scaled: Vec<Vec<[f64; 2]>> = f.iter().map(|m| m.iter().map(|p| [p[0] * scale, p[1] * scale]).collect()).collect();
            for (x, y) in base.iter().zip(eddy_viscosity_from_values(&scaled, 1.3, 0.01)) {
                prop_assert!((x * scale * scale - y).abs() <= 1e-12 * y.abs().max(1e-300));
            }
        }

        #[test]
        fn perturbation_mean_is_one(half in 1usize..30, eps in 0.0f64..0.5) {
            let j = 2 * half;
            let m: f64 = (1..=j).map(|k| perturbation_factor(k, eps)).sum::<f64>() / j as f64;
            prop_assert!((m - 1.0).abs() <= 1e-13);
        }
    }
}
