//! Competitor sets: monotone radial profiles, axis-centred balls and voxel
//! grids on one period of the slab, with volumes, Fraenkel asymmetry and the
//! slice-wise symmetric-decreasing rearrangement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::special::{ball_volume, BallGeometry};
use crate::{Error, Result};

/// Even, nonincreasing radial profile on `[0, 1/2]`, piecewise constant on
/// `m` cells of width `1/(2m)` with nodes at `(i + 1/2)/(2m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    values: Vec<f64>,
    n: usize,
}

impl Profile {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("dimension n = {n} < 2")));
        }
        if values.is_empty() {
            return Err(Error::InvalidParams("profile needs at least one cell".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParams(format!("profile value {v} is not a finite nonnegative number")));
        }
        if let Some(w) = values.windows(2).find(|w| w[1] > w[0]) {
            return Err(Error::InvalidParams(format!(
                "profile is not nonincreasing: {} followed by {}",
                w[0], w[1]
            )));
        }
        Ok(Self { values, n })
    }

    pub fn constant(n: usize, m: usize, radius: f64) -> Result<Self> {
        Self::new(n, vec![radius; m])
    }

    /// Cross-section radii of the ball `|x| <= radius` sampled at the nodes.
    pub fn ball(n: usize, m: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParams(format!("ball radius {radius} must be positive")));
        }
        let values = (0..m)
            .map(|i| {
                let x = node(m, i);
                (radius * radius - x * x).max(0.0).sqrt()
            })
            .collect();
        Self::new(n, values)
    }

    /// Sorted uniform samples in `[0, max_value]`.
    pub fn random(n: usize, m: usize, seed: u64, max_value: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..m).map(|_| max_value * rng.gen::<f64>()).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(n, values)
    }

    /// `R (1 - b x^2 - c x^4)` with seeded `b, c`, sampled at the nodes.
    pub fn smooth_random(n: usize, m: usize, seed: u64, radius: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: f64 = rng.gen_range(0.5..1.5);
        let c: f64 = rng.gen_range(0.0..2.0);
        let values = (0..m)
            .map(|i| {
                let x = node(m, i);
                radius * (1.0 - b * x * x - c * x.powi(4))
            })
            .collect();
        Self::new(n, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of cells on `[0, 1/2]`.
    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn cell_width(&self) -> f64 {
        0.5 / self.m() as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        node(self.m(), i)
    }

    pub fn max_value(&self) -> f64 {
        self.values[0]
    }

    pub fn is_empty_set(&self) -> bool {
        self.values[0] == 0.0
    }

    /// Radius at `x1`, using evenness and 1-periodicity.
    pub fn value_at(&self, x1: f64) -> f64 {
        let t = (x1 - x1.round()).abs();
        let i = ((t * 2.0 * self.m() as f64) as usize).min(self.m() - 1);
        self.values[i]
    }

    /// Membership of the periodic set `{|x'| <= f(x1)}`.
    pub fn contains(&self, x: &[f64]) -> bool {
        let r2: f64 = x[1..].iter().map(|v| v * v).sum();
        let f = self.value_at(x[0]);
        r2 <= f * f
    }

    /// Same set on a grid refined by an integer factor.
    pub fn refine(&self, factor: usize) -> Self {
        let values = self
            .values
            .iter()
            .flat_map(|&v| std::iter::repeat(v).take(factor))
            .collect();
        Self { values, n: self.n }
    }

    /// Values on the full period `[-1/2, 1/2]`, `2m` cells left to right.
    pub fn full_period(&self) -> Vec<f64> {
        self.values.iter().rev().chain(self.values.iter()).copied().collect()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.n, self.values.iter().map(|v| v * factor).collect())
    }
}

fn node(m: usize, i: usize) -> f64 {
    (i as f64 + 0.5) / (2.0 * m as f64)
}

/// Ball centred on the symmetry axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxiBall {
    pub center_x1: f64,
    pub radius: f64,
}

impl AxiBall {
    pub fn new(center_x1: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParams(format!("ball radius {radius} must be positive")));
        }
        if !(-0.5..=0.5).contains(&center_x1) {
            return Err(Error::InvalidParams(format!("ball center {center_x1} outside [-1/2, 1/2]")));
        }
        Ok(Self { center_x1, radius })
    }

    pub fn volume(&self, n: usize) -> f64 {
        ball_volume(n) * self.radius.powi(n as i32)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let d1 = x[0] - self.center_x1;
        d1 * d1 + x[1..].iter().map(|v| v * v).sum::<f64>() <= self.radius * self.radius
    }
}

/// `|F ∩ S| = 2 v_{n-1} Σ f_i^{n-1} / (2m)`.
pub fn volume(p: &Profile) -> f64 {
    let m_d = (p.n - 1) as i32;
    let sum: f64 = p.values.iter().map(|v| v.powi(m_d)).sum();
    2.0 * ball_volume(p.n - 1) * sum * p.cell_width()
}

/// Scales the profile so that its volume equals `mu`.
pub fn rescale_to_volume(p: &Profile, mu: f64) -> Result<Profile> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParams(format!("target volume {mu} must be positive")));
    }
    let vol = volume(p);
    if vol <= 0.0 {
        return Err(Error::ZeroVolume);
    }
    let lambda = (mu / vol).powf(1.0 / (p.n - 1) as f64);
    p.scaled(lambda)
}

/// `∫_a^b min(f, g_c)^{n-1} dx` for constant `f` on `[a, b]`, where `g_c` is
/// the cross-section radius of the ball of radius `r` centred at `c`.
fn cell_overlap(geo: &BallGeometry, f: f64, a: f64, b: f64, c: f64, r: f64) -> f64 {
    let m_d = (geo.m - 1) as i32;
    // ∫_c^{c+t} g^{n-1} = slab(r, t) / v_{n-1}
    let cap = |t: f64| geo.slab(r, t) / ball_volume(geo.m - 1);
    let g_integral = |lo: f64, hi: f64| cap(hi - c) - cap(lo - c);
    if f <= 0.0 {
        return 0.0;
    }
    if f >= r {
        return g_integral(a, b);
    }
    let w = (r * r - f * f).sqrt();
    let (lo, hi) = ((c - w).clamp(a, b), (c + w).clamp(a, b));
    g_integral(a, lo) + f.powi(m_d) * (hi - lo) + g_integral(hi, b)
}

/// `|E ∩ B|` for the ball of radius `r` centred at `(c, 0)`.
fn ball_intersection(p: &Profile, geo: &BallGeometry, c: f64, r: f64) -> f64 {
    let h = p.cell_width();
    let m = p.m();
    let mut acc = 0.0;
    for (j, &f) in p.full_period().iter().enumerate() {
        let a = -0.5 + j as f64 * h;
        let b = a + h;
        if b < c - r || a > c + r {
            continue;
        }
        acc += cell_overlap(geo, f, a, b, c, r);
    }
    debug_assert!(acc.is_finite() && m > 0);
    ball_volume(p.n - 1) * acc
}

/// Fraenkel asymmetry `min_c |E Δ B_c| / |E|` over balls of volume `|E|`
/// centred at `(c, 0)`, `c ∈ [-1/2, 1/2]`, restricted to one period.
pub fn fraenkel_deficit(p: &Profile) -> Result<f64> {
    let vol = volume(p);
    if vol <= 0.0 {
        return Err(Error::ZeroVolume);
    }
    let geo = BallGeometry::new(p.n);
    let r = (vol / ball_volume(p.n)).powf(1.0 / p.n as f64);
    let deficit = |c: f64| ((2.0 * vol - 2.0 * ball_intersection(p, &geo, c, r)) / vol).clamp(0.0, 2.0);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (-0.5, 0.5);
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let (mut f1, mut f2) = (deficit(x1), deficit(x2));
    while hi - lo > 1e-6 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = deficit(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = deficit(x2);
        }
    }
    // the even profile makes the centred ball a natural candidate
    Ok(deficit(0.5 * (lo + hi)).min(deficit(0.0)))
}

/// Binary occupancy grid on one period: `m1` cells in `x1 ∈ [-1/2, 1/2]` and
/// `mt^{n-1}` cells in the transverse box `[-L/2, L/2]^{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSet {
    n: usize,
    m1: usize,
    mt: usize,
    side: f64,
    cells: Vec<bool>,
}

impl VoxelSet {
    pub fn empty(n: usize, m1: usize, mt: usize, side: f64) -> Result<Self> {
        if n < 2 || m1 == 0 || mt == 0 || !(side > 0.0) {
            return Err(Error::InvalidParams(format!(
                "voxel grid needs n >= 2 and positive sizes (n={n}, m1={m1}, mt={mt}, L={side})"
            )));
        }
        let len = m1 * mt.pow((n - 1) as u32);
        Ok(Self {
            n,
            m1,
            mt,
            side,
            cells: vec![false; len],
        })
    }

    /// Occupies every cell whose centre satisfies `membership`.
    pub fn from_membership(
        n: usize,
        m1: usize,
        mt: usize,
        side: f64,
        membership: impl Fn(&[f64]) -> bool,
    ) -> Result<Self> {
        let mut v = Self::empty(n, m1, mt, side)?;
        let mut x = vec![0.0; n];
        for idx in 0..v.cells.len() {
            v.center_into(idx, &mut x);
            v.cells[idx] = membership(&x);
        }
        Ok(v)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m1(&self) -> usize {
        self.m1
    }
    pub fn mt(&self) -> usize {
        self.mt
    }
    pub fn side(&self) -> f64 {
        self.side
    }
    pub fn cells(&self) -> &[bool] {
        &self.cells
    }
    pub fn slice_len(&self) -> usize {
        self.mt.pow((self.n - 1) as u32)
    }
    pub fn cell_widths(&self) -> (f64, f64) {
        (1.0 / self.m1 as f64, self.side / self.mt as f64)
    }
    pub fn cell_volume(&self) -> f64 {
        let (a, b) = self.cell_widths();
        a * b.powi((self.n - 1) as i32)
    }

    pub fn get(&self, slice: usize, transverse: usize) -> bool {
        self.cells[slice * self.slice_len() + transverse]
    }

    pub fn set(&mut self, slice: usize, transverse: usize, value: bool) {
        let len = self.slice_len();
        self.cells[slice * len + transverse] = value;
    }

    /// Transverse multi-index, first coordinate most significant.
    pub fn transverse_index(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.n - 1];
        let mut rest = flat;
        for k in (0..self.n - 1).rev() {
            out[k] = rest % self.mt;
            rest /= self.mt;
        }
        out
    }

    pub fn center_into(&self, idx: usize, x: &mut [f64]) {
        let (w1, wt) = self.cell_widths();
        let len = self.slice_len();
        x[0] = -0.5 + ((idx / len) as f64 + 0.5) * w1;
        let mut rest = idx % len;
        for k in (1..self.n).rev() {
            x[k] = -0.5 * self.side + ((rest % self.mt) as f64 + 0.5) * wt;
            rest /= self.mt;
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn slice_counts(&self) -> Vec<usize> {
        self.cells
            .chunks(self.slice_len())
            .map(|s| s.iter().filter(|c| **c).count())
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.occupied_count() as f64 * self.cell_volume()
    }

    /// Transverse cells ordered by distance of their centres to the axis,
    /// ties broken by flat index.
    fn center_order(&self) -> Vec<usize> {
        // doubled offsets (2j + 1 - mt) keep squared distances integral
        let mt = self.mt as i64;
        let dist2 = |flat: usize| -> i64 {
            self.transverse_index(flat)
                .iter()
                .map(|&j| {
                    let d = 2 * j as i64 + 1 - mt;
                    d * d
                })
                .sum()
        };
        let mut order: Vec<(i64, usize)> = (0..self.slice_len()).map(|t| (dist2(t), t)).collect();
        order.sort_unstable();
        order.into_iter().map(|(_, t)| t).collect()
    }
}

/// Voxelizes the profile set in a transverse box of side `side`.
pub fn voxelize(p: &Profile, m1: usize, mt: usize, side: f64) -> Result<VoxelSet> {
    if side < 2.0 * p.max_value() {
        return Err(Error::BoxTooSmall {
            side,
            radius: p.max_value(),
        });
    }
    VoxelSet::from_membership(p.n, m1, mt, side, |x| p.contains(x))
}

/// Slice-wise symmetric-decreasing rearrangement: each slice keeps its cell
/// count, moved to the cells nearest the axis.
pub fn rearrange_slices(v: &VoxelSet) -> VoxelSet {
    let order = v.center_order();
    let len = v.slice_len();
    let mut out = VoxelSet {
        cells: vec![false; v.cells.len()],
        ..v.clone()
    };
    for (slice, count) in v.slice_counts().into_iter().enumerate() {
        for &t in &order[..count] {
            out.cells[slice * len + t] = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    #[test]
    fn volume_examples() {
        let c = Profile::constant(3, 8, 0.3).unwrap();
        assert!((volume(&c) - PI * 0.09).abs() < 1e-14);
        assert_eq!(volume(&Profile::constant(3, 4, 0.0).unwrap()), 0.0);
        // n = 2: cross-sections are segments of length 2f
        let stair = Profile::new(2, vec![2.0, 1.0]).unwrap();
        assert!((volume(&stair) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn profile_rejects_bad_values() {
        assert!(Profile::new(3, vec![1.0, 2.0]).is_err());
        assert!(Profile::new(3, vec![-1.0]).is_err());
        assert!(Profile::new(3, vec![f64::INFINITY]).is_err());
        assert!(Profile::new(1, vec![1.0]).is_err());
        assert!(Profile::new(3, vec![]).is_err());
    }

    #[test]
    fn rescale_examples() {
        let c = Profile::constant(3, 8, 0.1).unwrap();
        let same = rescale_to_volume(&c, volume(&c)).unwrap();
        assert!(same.values().iter().all(|v| (v - 0.1).abs() < 1e-16));
        let big = rescale_to_volume(&c, 4.0 * volume(&c)).unwrap();
        assert!(big.values().iter().all(|v| (v - 0.2).abs() < 1e-15));
        assert!(matches!(
            rescale_to_volume(&Profile::constant(3, 4, 0.0).unwrap(), 1.0),
            Err(Error::ZeroVolume)
        ));
    }

    #[test]
    fn value_at_is_even_and_periodic() {
        let p = Profile::new(3, vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        for &x in &[0.01, 0.13, 0.26, 0.49] {
            assert_eq!(p.value_at(x), p.value_at(-x));
            assert_eq!(p.value_at(x), p.value_at(x + 3.0));
        }
        assert_eq!(p.value_at(0.3), 0.2);
        assert_eq!(p.full_period(), vec![0.1, 0.2, 0.3, 0.4, 0.4, 0.3, 0.2, 0.1]);
    }

    #[test]
    fn ball_deficit_is_discretization_limited() {
        for &m in &[16usize, 32, 64, 128] {
            let p = Profile::ball(3, m, 0.3).unwrap();
            let d = fraenkel_deficit(&p).unwrap();
            assert!(d <= 2.0 / m as f64, "m={m}: {d}");
        }
    }

    /// Independent voxel count of `|E Δ B| / |E|` for a cylinder and the
    /// centred ball of equal volume.
    #[test]
    fn cylinder_deficit_matches_voxel_oracle() {
        let p = Profile::constant(3, 16, 0.2).unwrap();
        let vol = volume(&p);
        let d = fraenkel_deficit(&p).unwrap();
        let r = (vol / (4.0 / 3.0 * PI)).cbrt();
        let side = 2.0 * r.max(0.2) * 1.01;
        let (m1, mt) = (256usize, 256usize);
        let (w1, wt) = (1.0 / m1 as f64, side / mt as f64);
        let mut diff = 0usize;
        for i in 0..m1 {
            let x1 = -0.5 + (i as f64 + 0.5) * w1;
            for j in 0..mt {
                let y = -0.5 * side + (j as f64 + 0.5) * wt;
                for k in 0..mt {
                    let z = -0.5 * side + (k as f64 + 0.5) * wt;
                    let rho2 = y * y + z * z;
                    let in_e = rho2 <= 0.04;
                    let in_b = x1 * x1 + rho2 <= r * r;
                    diff += (in_e != in_b) as usize;
                }
            }
        }
        let oracle = diff as f64 * w1 * wt * wt / vol;
        assert!((d - oracle).abs() < 0.02 * oracle, "{d} vs {oracle}");
    }

    #[test]
    fn voxelize_examples() {
        let empty = voxelize(&Profile::constant(3, 4, 0.0).unwrap(), 8, 8, 1.0).unwrap();
        assert_eq!(empty.occupied_count(), 0);
        let cyl = voxelize(&Profile::constant(3, 4, 0.3).unwrap(), 8, 16, 1.0).unwrap();
        let counts = cyl.slice_counts();
        assert!(counts.iter().all(|c| *c == counts[0]) && counts[0] > 0);
        assert!(matches!(
            voxelize(&Profile::constant(3, 4, 0.6).unwrap(), 8, 8, 1.0),
            Err(Error::BoxTooSmall { .. })
        ));
        let ball = Profile::ball(3, 64, 0.3).unwrap();
        let v = voxelize(&ball, 128, 128, 0.62).unwrap();
        let rel = (v.volume() - volume(&ball)).abs() / volume(&ball);
        assert!(rel < 0.02, "{rel}");
    }

    #[test]
    fn voxel_volume_converges_at_first_order_or_better() {
        let p = Profile::smooth_random(3, 256, 3, 0.3).unwrap();
        let exact = volume(&p);
        let err = |res: usize| (voxelize(&p, res, res, 0.7).unwrap().volume() - exact).abs();
        let (e1, e2) = (err(32), err(64));
        assert!(e2 <= 0.5 * 1.3 * e1, "{e1} -> {e2}");
    }

    #[test]
    fn rearrangement_examples() {
        let mut v = VoxelSet::empty(3, 2, 6, 1.0).unwrap();
        v.set(0, 0, true);
        let r = rearrange_slices(&v);
        assert_eq!(r.occupied_count(), 1);
        // first centre-most cell is (2, 2) in the 6x6 slice
        assert!(r.get(0, 2 * 6 + 2));
        let ball = voxelize(&Profile::ball(3, 8, 0.4).unwrap(), 8, 12, 1.0).unwrap();
        assert_eq!(rearrange_slices(&ball), ball);
    }

    proptest! {
        #[test]
        fn rescale_preserves_monotonicity_and_hits_target(
            seed in 0u64..1000, mu in 1e-4f64..1.0
        ) {
            let p = Profile::random(3, 12, seed, 0.5).unwrap();
            prop_assume!(volume(&p) > 0.0);
            let q = rescale_to_volume(&p, mu).unwrap();
            prop_assert!(((volume(&q) - mu) / mu).abs() < 1e-13);
            prop_assert!(q.values().windows(2).all(|w| w[0] >= w[1]));
            let q2 = rescale_to_volume(&q, mu).unwrap();
            for (a, b) in q.values().iter().zip(q2.values()) {
                prop_assert!((a - b).abs() <= 1e-15 * a.max(1e-300));
            }
        }

        #[test]
        fn deficit_stays_in_range(seed in 0u64..500) {
            let p = Profile::random(3, 10, seed, 0.4).unwrap();
            prop_assume!(volume(&p) > 0.0);
            let d = fraenkel_deficit(&p).unwrap();
            prop_assert!((0.0..=2.0).contains(&d));
        }

        #[test]
        fn rearrangement_is_idempotent_and_count_preserving(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = VoxelSet::empty(3, 4, 8, 1.0).unwrap();
            for idx in 0..v.cells.len() {
                v.cells[idx] = rng.gen::<f64>() < 0.3;
            }
            let r = rearrange_slices(&v);
            prop_assert_eq!(r.slice_counts(), v.slice_counts());
            prop_assert_eq!(rearrange_slices(&r), r);
        }
    }
}
