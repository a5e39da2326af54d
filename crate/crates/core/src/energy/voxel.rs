//! Capped-kernel interaction energy of voxel sets.
//!
//! The in-box term `Σ_{a ∈ E} Σ_{b ∉ E} h_M(c_a - c_b) |cell|^2` is a circular
//! convolution in `x1` and a zero-padded one across the transverse axes,
//! evaluated with FFTs. The outside-box term integrates the period-averaged
//! kernel `β |x' - y'|^{-(n+s)+1}` over the transverse complement of the box,
//! reduced to the box faces by the divergence theorem.

use std::collections::HashMap;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{EnergyValue, Method};
use crate::kernel::{capped_kernel, KernelParams};
use crate::quad;
use crate::shapes::VoxelSet;
use crate::special::{far_field_constant, power_head};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelOptions {
    /// Adds the interaction with the region outside the transverse box.
    pub outside_term: bool,
}

impl Default for VoxelOptions {
    fn default() -> Self {
        Self { outside_term: true }
    }
}

/// Dense complex array with per-axis FFTs.
struct Grid {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl Grid {
    fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            data: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn transform(&mut self, planner: &mut FftPlanner<f64>, inverse: bool) {
        let total = self.data.len();
        let mut stride = total;
        for &len in &self.dims {
            stride /= len;
            let fft = if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            };
            let mut line = vec![Complex64::new(0.0, 0.0); len];
            let block = stride * len;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = self.data[base + k * stride];
                    }
                    fft.process(&mut line);
                    for (k, v) in line.iter().enumerate() {
                        self.data[base + k * stride] = *v;
                    }
                }
            }
        }
    }
}

/// Capped kernel on lattice differences, laid out on the padded grid.
fn kernel_grid(v: &VoxelSet, cap: f64, kernel: &KernelParams) -> Result<Grid> {
    let (m1, mt, n) = (v.m1(), v.mt(), v.n());
    let (w1, wt) = v.cell_widths();
    let padded = 2 * mt;
    let mut dims = vec![m1];
    dims.extend(std::iter::repeat(padded).take(n - 1));
    let mut grid = Grid::zeros(dims);
    let signed = |k: usize, len: usize| -> i64 {
        if k <= len / 2 {
            k as i64
        } else {
            k as i64 - len as i64
        }
    };
    let mut memo: HashMap<(usize, i64), f64> = HashMap::new();
    let slice = padded.pow((n - 1) as u32);
    let mut point = vec![0.0; n];
    for (idx, slot) in grid.data.iter_mut().enumerate() {
        let d1 = signed(idx / slice, m1).unsigned_abs() as usize;
        let mut rest = idx % slice;
        let mut r2 = 0i64;
        for _ in 1..n {
            let d = signed(rest % padded, padded);
            rest /= padded;
            if d.unsigned_abs() as usize >= mt {
                r2 = -1;
                break;
            }
            r2 += d * d;
        }
        if r2 < 0 {
            continue;
        }
        let value = match memo.get(&(d1, r2)) {
            Some(&h) => h,
            None => {
                point.fill(0.0);
                point[0] = d1 as f64 * w1;
                point[1] = (r2 as f64).sqrt() * wt;
                let h = capped_kernel(&point, cap, kernel)?;
                memo.insert((d1, r2), h);
                h
            }
        };
        *slot = Complex64::new(value, 0.0);
    }
    Ok(grid)
}

/// Embeds the voxel cells into the padded grid.
fn indicator(v: &VoxelSet, occupied: bool) -> Grid {
    let (m1, mt, n) = (v.m1(), v.mt(), v.n());
    let padded = 2 * mt;
    let mut dims = vec![m1];
    dims.extend(std::iter::repeat(padded).take(n - 1));
    let mut grid = Grid::zeros(dims);
    let len = v.slice_len();
    let padded_slice = padded.pow((n - 1) as u32);
    for (idx, &cell) in v.cells().iter().enumerate() {
        if cell != occupied {
            continue;
        }
        let mut rest = idx % len;
        let mut offset = 0;
        let mut scale = 1;
        for _ in 1..n {
            offset += (rest % mt) * scale;
            rest /= mt;
            scale *= padded;
        }
        grid.data[(idx / len) * padded_slice + offset] = Complex64::new(1.0, 0.0);
    }
    grid
}

/// `∫_{[lo, hi]} (a^2 + |t|^2)^{-q} dt` over a box of any dimension.
fn face_integral(a: f64, lo: &[f64], hi: &[f64], q: f64) -> Result<f64> {
    if lo.len() == 1 {
        let head = |t: f64| t.signum() * power_head(t.abs(), a, q);
        return Ok(head(hi[0]) - head(lo[0]));
    }
    let mut pts = vec![lo[0]];
    if lo[0] < 0.0 && hi[0] > 0.0 {
        pts.push(0.0);
    }
    pts.push(hi[0]);
    let mut total = 0.0;
    let mut failure = None;
    for w in pts.windows(2) {
        let est = quad::adaptive(w[0], w[1], 0.0, 1e-10, 2000, |t| {
            face_integral((a * a + t * t).sqrt(), &lo[1..], &hi[1..], q).unwrap_or_else(|e| {
                failure = Some(e);
                0.0
            })
        })?;
        total += est.value;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// `∫_{R^{m} \ box} |x' - y'|^{-(m+1+s)} dy'` for `x'` inside the box
/// `[-L/2, L/2]^m`.
fn outside_box(x: &[f64], half: f64, s: f64) -> Result<f64> {
    let m = x.len();
    let q = 0.5 * (m as f64 + 1.0 + s);
    let mut total = 0.0;
    for axis in 0..m {
        for sign in [-1.0, 1.0] {
            let a = half - sign * x[axis];
            if m == 1 {
                total += a.powf(-(1.0 + s));
                continue;
            }
            let (lo, hi): (Vec<f64>, Vec<f64>) = (0..m)
                .filter(|&k| k != axis)
                .map(|k| (-half - x[k], half - x[k]))
                .unzip();
            total += a * face_integral(a, &lo, &hi, q)?;
        }
    }
    Ok(total / (1.0 + s))
}

/// Capped-kernel energy of the voxel set.
pub fn energy_voxel(v: &VoxelSet, cap: f64, kernel: &KernelParams, opts: VoxelOptions) -> Result<EnergyValue> {
    kernel.validate()?;
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::InvalidParams(format!("cap {cap} must be positive and finite")));
    }
    if v.n() != kernel.n {
        return Err(Error::InvalidParams(format!(
            "voxel dimension {} does not match kernel dimension {}",
            v.n(),
            kernel.n
        )));
    }
    let cells = v.cells().len() as u64;
    let occupied = v.occupied_count();
    if occupied == 0 {
        return Ok(EnergyValue {
            count: cells,
            ..EnergyValue::zero(Method::Voxel)
        });
    }
    let cv = v.cell_volume();
    let mut value = 0.0;
    if occupied < v.cells().len() {
        let mut planner = FftPlanner::new();
        let mut h = kernel_grid(v, cap, kernel)?;
        let mut empty = indicator(v, false);
        h.transform(&mut planner, false);
        empty.transform(&mut planner, false);
        for (e, k) in empty.data.iter_mut().zip(&h.data) {
            *e *= k;
        }
        empty.transform(&mut planner, true);
        let scale = 1.0 / empty.data.len() as f64;
        let full = indicator(v, true);
        let sum: f64 = full
            .data
            .iter()
            .zip(&empty.data)
            .filter(|(f, _)| f.re > 0.0)
            .map(|(_, c)| c.re * scale)
            .sum();
        value += cv * cv * sum;
    }
    if opts.outside_term {
        let beta = far_field_constant(kernel.n, kernel.s);
        let half = 0.5 * v.side();
        let mut x = vec![0.0; v.n()];
        let mut memo: HashMap<usize, f64> = HashMap::new();
        let len = v.slice_len();
        let mut outside = 0.0;
        for (idx, _) in v.cells().iter().enumerate().filter(|(_, c)| **c) {
            let t = idx % len;
            let g = match memo.get(&t) {
                Some(&g) => g,
                None => {
                    v.center_into(idx, &mut x);
                    let g = outside_box(&x[1..], half, kernel.s)?;
                    memo.insert(t, g);
                    g
                }
            };
            outside += g;
        }
        value += cv * beta * outside;
    }
    Ok(EnergyValue {
        value: value.max(0.0),
        error: 0.0,
        method: Method::Voxel,
        count: cells,
    })
}

/// Discretization tolerance `4 M |cell| · #interface cells`, where interface
/// cells are occupied cells with an empty face neighbour (periodic in `x1`).
pub fn voxel_tolerance(v: &VoxelSet, cap: f64) -> f64 {
    let (m1, mt, n) = (v.m1(), v.mt(), v.n());
    let len = v.slice_len();
    let cells = v.cells();
    let mut count = 0usize;
    for (idx, _) in cells.iter().enumerate().filter(|(_, c)| **c) {
        let (slice, t) = (idx / len, idx % len);
        let mut interface = !cells[((slice + 1) % m1) * len + t] || !cells[((slice + m1 - 1) % m1) * len + t];
        let mut stride = 1;
        for _ in 1..n {
            let j = (t / stride) % mt;
            if j + 1 < mt && !cells[idx + stride] || j > 0 && !cells[idx - stride] {
                interface = true;
            }
            stride *= mt;
        }
        count += interface as usize;
    }
    4.0 * cap * v.cell_volume() * count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::sphere_area;

    fn no_outside() -> VoxelOptions {
        VoxelOptions { outside_term: false }
    }

    #[test]
    fn single_cell_matches_brute_force() {
        let k = KernelParams::new(3, 0.5).unwrap();
        let mut v = VoxelSet::empty(3, 16, 16, 1.0).unwrap();
        let target = 5 * v.slice_len() + 7 * 16 + 9;
        v.set(5, 7 * 16 + 9, true);
        let cap = 1e3;
        let got = energy_voxel(&v, cap, &k, no_outside()).unwrap().value;
        let (mut xa, mut xb, mut d) = (vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]);
        v.center_into(target, &mut xa);
        let mut brute = 0.0;
        for idx in 0..v.cells().len() {
            if idx == target {
                continue;
            }
            v.center_into(idx, &mut xb);
            for k in 0..3 {
                d[k] = xa[k] - xb[k];
            }
            brute += capped_kernel(&d, cap, &k).unwrap();
        }
        brute *= v.cell_volume().powi(2);
        assert!((got - brute).abs() < 1e-10 * brute, "{got} vs {brute}");
    }

    #[test]
    fn complement_has_equal_energy_without_outside_term() {
        let k = KernelParams::new(3, 0.3).unwrap();
        let ball = |x: &[f64]| x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2] <= 0.1;
        let v = VoxelSet::from_membership(3, 12, 10, 1.0, ball).unwrap();
        let c = VoxelSet::from_membership(3, 12, 10, 1.0, |x| !ball(x)).unwrap();
        let a = energy_voxel(&v, 50.0, &k, no_outside()).unwrap().value;
        let b = energy_voxel(&c, 50.0, &k, no_outside()).unwrap().value;
        assert!((a - b).abs() < 1e-10 * a, "{a} vs {b}");
    }

    #[test]
    fn full_and_empty_boxes() {
        let k = KernelParams::new(2, 0.5).unwrap();
        let empty = VoxelSet::empty(2, 8, 8, 1.0).unwrap();
        assert_eq!(energy_voxel(&empty, 10.0, &k, VoxelOptions::default()).unwrap().value, 0.0);
        let full = VoxelSet::from_membership(2, 8, 8, 1.0, |_| true).unwrap();
        assert_eq!(energy_voxel(&full, 10.0, &k, no_outside()).unwrap().value, 0.0);
        assert!(energy_voxel(&full, 10.0, &k, VoxelOptions::default()).unwrap().value > 0.0);
        assert_eq!(voxel_tolerance(&full, 10.0), 0.0);
    }

    #[test]
    fn outside_box_matches_polar_integral_at_centre() {
        // at the centre of a square, integrate over the complement in polar
        // coordinates: ∫_0^{2π} ∫_{ρ(θ)}^∞ ρ^{-(3+s)} ρ dρ dθ
        let (s, half) = (0.4, 0.7);
        let got = outside_box(&[0.0, 0.0], half, s).unwrap();
        let polar = quad::adaptive(0.0, std::f64::consts::FRAC_PI_4, 0.0, 1e-12, 500, |th| {
            (half / th.cos()).powf(-(1.0 + s)) / (1.0 + s)
        })
        .unwrap()
        .value
            * 8.0;
        assert!((got - polar).abs() < 1e-9 * polar, "{got} vs {polar}");
        let line = outside_box(&[0.2], 0.5, s).unwrap();
        let exact = (0.3f64.powf(-(1.0 + s)) + 0.7f64.powf(-(1.0 + s))) / (1.0 + s);
        assert!((line - exact).abs() < 1e-12 * exact);
        let cube = outside_box(&[0.0, 0.0, 0.0], half, s).unwrap();
        // inner ball of radius `half` bounds the complement from above
        let upper = sphere_area(2) * half.powf(-(1.0 + s)) / (1.0 + s);
        assert!(cube > 0.0 && cube < upper);
    }

    #[test]
    fn interface_count() {
        let mut v = VoxelSet::empty(2, 4, 4, 1.0).unwrap();
        v.set(0, 1, true);
        v.set(1, 1, true);
        assert_eq!(voxel_tolerance(&v, 2.0), 4.0 * 2.0 * v.cell_volume() * 2.0);
    }
}
