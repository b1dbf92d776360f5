//! Measures on the circle × mass half-line, their grids and the weak
//! distance `ρ`.
//!
//! Both kinds of measure carry mass-flow weights: an atom `(x, m, w)` of the
//! particle picture has rescaled mass `m = N·Mⁱ` and weight `w = Mⁱ`, and a
//! grid cell holds the mass-flow of its (cell, bin) box.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, usage};
use crate::Result;

/// A point mass of an [`EmpiricalMeasure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub x: f64,
    pub m: f64,
    pub w: f64,
}

/// Anything that can be integrated against test functions of `(x, m)`.
pub trait Measure {
    /// Calls `f(x, m, weight)` once per atom or grid cell.
    fn for_each_atom<F: FnMut(f64, f64, f64)>(&self, f: F);

    fn total(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each_atom(|_, _, w| acc += w);
        acc
    }
}

/// `⟨f, μ⟩`.
pub fn moment<M: Measure + ?Sized, F: Fn(f64, f64) -> f64>(mu: &M, f: F) -> f64 {
    let mut acc = 0.0;
    mu.for_each_atom(|x, m, w| acc += w * f(x, m));
    acc
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmpiricalMeasure {
    atoms: Vec<Atom>,
}

impl EmpiricalMeasure {
    /// Rejects atoms with `x ∉ [0, 1)`, non-positive weight or negative mass.
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if !(0.0..1.0).contains(&a.x) {
                return Err(domain!("atom position {} outside [0, 1)", a.x));
            }
            if !(a.w > 0.0 && a.w.is_finite()) {
                return Err(domain!("atom weight must be positive, got {}", a.w));
            }
            if !(a.m >= 0.0 && a.m.is_finite()) {
                return Err(domain!("atom mass must be nonnegative, got {}", a.m));
            }
        }
        Ok(Self { atoms })
    }

    pub(crate) fn from_atoms_unchecked(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

impl Measure for EmpiricalMeasure {
    fn for_each_atom<F: FnMut(f64, f64, f64)>(&self, mut f: F) {
        for a in &self.atoms {
            f(a.x, a.m, a.w);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassGridKind {
    /// Representatives `1, 2, …, B`.
    Integer,
    /// Representatives `m_min·ratioᵏ`.
    Geometric { ratio: f64 },
}

/// Where the coalescence of two bins lands: `theta` of the mass-flow goes to
/// `lo`, the rest to `hi`. Mass-flow and particle number are both conserved
/// unless the sum overflows the last bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTarget {
    pub lo: usize,
    pub hi: usize,
    pub theta: f64,
}

/// Mass bins with representative (rescaled) masses; the last bin also
/// collects everything above its representative.
#[derive(Debug, Clone, PartialEq)]
pub struct MassGrid {
    kind: MassGridKind,
    reps: Vec<f64>,
}

impl MassGrid {
    pub fn integer(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(usage!("mass grid needs at least one bin"));
        }
        Ok(Self { kind: MassGridKind::Integer, reps: (1..=bins).map(|k| k as f64).collect() })
    }

    pub fn geometric(m_min: f64, ratio: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(usage!("mass grid needs at least one bin"));
        }
        if !(m_min > 0.0 && m_min.is_finite() && ratio > 1.0 && ratio.is_finite()) {
            return Err(domain!("geometric grid needs m_min > 0 and ratio > 1"));
        }
        let reps = (0..bins).map(|k| m_min * libm::pow(ratio, k as f64)).collect();
        Ok(Self { kind: MassGridKind::Geometric { ratio }, reps })
    }

    pub fn kind(&self) -> MassGridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn reps(&self) -> &[f64] {
        &self.reps
    }

    /// Nearest bin, clamped to the grid (the last bin is the overflow bin).
    pub fn bin_of(&self, m: f64) -> usize {
        let last = self.reps.len() - 1;
        let k = match self.kind {
            MassGridKind::Integer => libm::round(m) - 1.0,
            MassGridKind::Geometric { ratio } => {
                libm::round(libm::log(m / self.reps[0]) / libm::log(ratio))
            }
        };
        if k.is_nan() || k <= 0.0 {
            0
        } else if k >= last as f64 {
            last
        } else {
            k as usize
        }
    }

    /// Destination of the coalescence of bins `a` and `b`.
    pub fn pair_target(&self, a: usize, b: usize) -> PairTarget {
        let last = self.reps.len() - 1;
        match self.kind {
            MassGridKind::Integer => {
                let k = (a + b + 1).min(last);
                PairTarget { lo: k, hi: k, theta: 1.0 }
            }
            MassGridKind::Geometric { .. } => {
                let m = self.reps[a] + self.reps[b];
                if m >= self.reps[last] {
                    return PairTarget { lo: last, hi: last, theta: 1.0 };
                }
                let hi = self.reps.partition_point(|r| *r <= m);
                let lo = hi - 1;
                let (r0, r1) = (self.reps[lo], self.reps[hi]);
                let theta = (1.0 / m - 1.0 / r1) / (1.0 / r0 - 1.0 / r1);
                PairTarget { lo, hi, theta }
            }
        }
    }
}

/// Mass-flow on `J` uniform cells of `[0, 1)` × a [`MassGrid`], stored
/// row-major as `values[cell·B + bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    cells: usize,
    grid: MassGrid,
    values: Vec<f64>,
}

impl GridMeasure {
    pub fn zeros(cells: usize, grid: MassGrid) -> Result<Self> {
        if cells == 0 {
            return Err(usage!("spatial grid needs at least one cell"));
        }
        let values = vec![0.0; cells * grid.len()];
        Ok(Self { cells, grid, values })
    }

    pub fn from_values(cells: usize, grid: MassGrid, values: Vec<f64>) -> Result<Self> {
        if cells == 0 || values.len() != cells * grid.len() {
            return Err(usage!("grid values must have length cells × bins"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain!("grid values must be finite and nonnegative"));
        }
        Ok(Self { cells, grid, values })
    }

    /// Builds the product `h(x)·g(m)` sampled at cell centres and
    /// representatives, scaled to total `total`.
    pub fn product<H: Fn(f64) -> f64, G: Fn(f64) -> f64>(
        cells: usize,
        grid: MassGrid,
        density: H,
        mass_law: G,
        total: f64,
    ) -> Result<Self> {
        let mut g = Self::zeros(cells, grid)?;
        let bins = g.grid.len();
        for j in 0..cells {
            let h = density((j as f64 + 0.5) / cells as f64);
            for b in 0..bins {
                g.values[j * bins + b] = h * mass_law(g.grid.reps[b]);
            }
        }
        let sum: f64 = g.values.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) || g.values.iter().any(|v| !(*v >= 0.0)) {
            return Err(domain!("product profile must be nonnegative with positive total"));
        }
        let scale = total / sum;
        g.values.iter_mut().for_each(|v| *v *= scale);
        Ok(g)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn grid(&self) -> &MassGrid {
        &self.grid
    }

    pub fn bins(&self) -> usize {
        self.grid.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, cell: usize, bin: usize) -> f64 {
        self.values[cell * self.grid.len() + bin]
    }

    pub fn cell_center(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) / self.cells as f64
    }

    /// Mass-flow per bin summed over cells.
    pub fn mass_marginal(&self) -> Vec<f64> {
        let bins = self.grid.len();
        let mut out = vec![0.0; bins];
        for row in self.values.chunks_exact(bins) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// Mass-flow per cell summed over bins.
    pub fn space_marginal(&self) -> Vec<f64> {
        self.values.chunks_exact(self.grid.len()).map(|row| row.iter().sum()).collect()
    }

    /// Divides each bin by its representative: mass-flow `υ` becomes number
    /// concentration `υ̂ = υ/m`.
    pub fn to_concentration(&self) -> Result<GridMeasure> {
        if self.grid.reps.iter().any(|m| !(*m > 0.0)) {
            return Err(domain!("cannot convert a zero-mass bin to a concentration"));
        }
        Ok(self.map_bins(|v, m| v / m))
    }

    /// Inverse of [`to_concentration`](Self::to_concentration).
    pub fn from_concentration(&self) -> Result<GridMeasure> {
        Ok(self.map_bins(|v, m| v * m))
    }

    fn map_bins(&self, f: impl Fn(f64, f64) -> f64) -> GridMeasure {
        let bins = self.grid.len();
        let mut out = self.clone();
        for row in out.values.chunks_exact_mut(bins) {
            for (v, m) in row.iter_mut().zip(&self.grid.reps) {
                *v = f(*v, *m);
            }
        }
        out
    }
}

impl Measure for GridMeasure {
    fn for_each_atom<F: FnMut(f64, f64, f64)>(&self, mut f: F) {
        let bins = self.grid.len();
        for (j, row) in self.values.chunks_exact(bins).enumerate() {
            let x = self.cell_center(j);
            for (b, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    f(x, self.grid.reps[b], *v);
                }
            }
        }
    }
}

/// Adds each atom's weight to its (cell, bin). Masses above the last
/// representative land in the last bin.
pub fn project(emp: &EmpiricalMeasure, cells: usize, grid: &MassGrid) -> Result<GridMeasure> {
    let mut g = GridMeasure::zeros(cells, grid.clone())?;
    let bins = grid.len();
    for a in emp.atoms() {
        let j = ((a.x * cells as f64) as usize).min(cells - 1);
        let b = grid.bin_of(a.m);
        g.values[j * bins + b] += a.w;
    }
    Ok(g)
}

/// The test functions `f_k(x, m) = g(x)·exp(-m/q)`.
///
/// Spatial factors, in order: `1, cos 2πx, sin 2πx, …, cos 2π(P-1)x,
/// sin 2π(P-1)x, cos 2πPx` (`2P` of them). Mass factors: `exp(-m/q)` for each
/// `q` in the list. The index runs over the mass factors fastest, so with
/// `P = 8` and `q ∈ {1, 2, 4, 8, 16}` there are `K = 80` functions. Every
/// `|f_k| ≤ 1`, so truncating the series after `K` terms drops at most
/// `2^{-K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFamily {
    max_frequency: u32,
    scales: Vec<f64>,
}

impl Default for TestFamily {
    fn default() -> Self {
        Self { max_frequency: 8, scales: vec![1.0, 2.0, 4.0, 8.0, 16.0] }
    }
}

impl TestFamily {
    pub fn new(max_frequency: u32, scales: Vec<f64>) -> Result<Self> {
        if max_frequency == 0 || scales.is_empty() {
            return Err(usage!("test family needs a frequency and at least one mass scale"));
        }
        if scales.iter().any(|q| !(*q > 0.0 && q.is_finite())) {
            return Err(domain!("mass scales must be positive"));
        }
        Ok(Self { max_frequency, scales })
    }

    pub fn len(&self) -> usize {
        2 * self.max_frequency as usize * self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn spatial_factors(&self, x: f64, out: &mut [f64]) {
        let p_max = self.max_frequency as usize;
        let theta = 2.0 * core::f64::consts::PI * x;
        out[0] = 1.0;
        for p in 1..p_max {
            let (s, c) = libm::sincos(p as f64 * theta);
            out[2 * p - 1] = c;
            out[2 * p] = s;
        }
        out[2 * p_max - 1] = libm::cos(p_max as f64 * theta);
    }

    /// `f_k(x, m)` with `k` zero-based.
    pub fn eval(&self, k: usize, x: f64, m: f64) -> f64 {
        let nq = self.scales.len();
        let mut g = vec![0.0; 2 * self.max_frequency as usize];
        self.spatial_factors(x, &mut g);
        g[k / nq] * libm::exp(-m / self.scales[k % nq])
    }

    /// `⟨f_k, μ⟩` for every `k`.
    pub fn pairings<M: Measure + ?Sized>(&self, mu: &M) -> Vec<f64> {
        let nq = self.scales.len();
        let ng = 2 * self.max_frequency as usize;
        let mut out = vec![0.0; ng * nq];
        let mut g = vec![0.0; ng];
        let mut e = vec![0.0; nq];
        mu.for_each_atom(|x, m, w| {
            self.spatial_factors(x, &mut g);
            for (ei, q) in e.iter_mut().zip(&self.scales) {
                *ei = w * libm::exp(-m / q);
            }
            for (gi, gv) in g.iter().enumerate() {
                for (qi, ev) in e.iter().enumerate() {
                    out[gi * nq + qi] += gv * ev;
                }
            }
        });
        out
    }
}

/// `ρ(μ, ν) = Σ_k 2^{-k}·|Δ_k|/(1 + |Δ_k|)` with `Δ_k = ⟨f_k, μ⟩ - ⟨f_k, ν⟩`,
/// `k = 1…K`.
pub fn rho_distance<A: Measure + ?Sized, B: Measure + ?Sized>(
    mu: &A,
    nu: &B,
    family: &TestFamily,
) -> f64 {
    rho_from_pairings(&family.pairings(mu), &family.pairings(nu))
}

/// `ρ` from precomputed pairings.
pub fn rho_from_pairings(a: &[f64], b: &[f64]) -> f64 {
    let mut weight = 1.0;
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        weight *= 0.5;
        let d = libm::fabs(x - y);
        acc += weight * d / (1.0 + d);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(x: f64, m: f64, w: f64) -> Atom {
        Atom { x, m, w }
    }

    #[test]
    fn moments_of_monodisperse_state() {
        let n = 100;
        let atoms = (0..n).map(|i| atom(i as f64 / n as f64, 1.0, 1.0 / n as f64)).collect();
        let mu = EmpiricalMeasure::from_atoms(atoms).unwrap();
        assert!((moment(&mu, |_, _| 1.0) - 1.0).abs() < 1e-14);
        assert!((moment(&mu, |_, m| m) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_merge_raises_mass_moment_by_two_over_n() {
        let n = 100usize;
        let w = 1.0 / n as f64;
        let mut atoms: Vec<Atom> = (2..n).map(|i| atom(i as f64 / n as f64, 1.0, w)).collect();
        atoms.push(atom(0.0, 2.0, 2.0 * w));
        let mu = EmpiricalMeasure::from_atoms(atoms).unwrap();
        assert!((moment(&mu, |_, m| m) - (1.0 + 2.0 / n as f64)).abs() < 1e-14);
    }

    #[test]
    fn rho_identity_symmetry_and_continuity() {
        let fam = TestFamily::default();
        assert_eq!(fam.len(), 80);
        let mu = EmpiricalMeasure::from_atoms(vec![atom(0.3, 1.0, 1.0)]).unwrap();
        assert_eq!(rho_distance(&mu, &mu, &fam), 0.0);
        let mut last = f64::INFINITY;
        for delta in [0.1, 0.05, 0.01] {
            let nu = EmpiricalMeasure::from_atoms(vec![atom(0.3 + delta, 1.0, 1.0)]).unwrap();
            let d = rho_distance(&mu, &nu, &fam);
            assert_eq!(d, rho_distance(&nu, &mu, &fam));
            assert!(d < last, "{d} >= {last}");
            last = d;
        }
        assert!(last < 0.01);
    }

    #[test]
    fn family_is_bounded_and_ordered() {
        let fam = TestFamily::default();
        // k = 0..4 are the x-constant factors with q = 1, 2, 4, 8, 16
        assert!((fam.eval(1, 0.37, 2.0) - libm::exp(-1.0)).abs() < 1e-15);
        // k = 5 is cos 2πx with q = 1
        assert!((fam.eval(5, 0.25, 0.0)).abs() < 1e-15);
        assert!((fam.eval(79, 0.0, 0.0) - 1.0).abs() < 1e-15);
        for k in 0..80 {
            for x in [0.0, 0.1, 0.49, 0.77] {
                assert!(fam.eval(k, x, 0.5).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn projection_of_a_single_atom() {
        let grid = MassGrid::integer(4).unwrap();
        let emp = EmpiricalMeasure::from_atoms(vec![atom(0.25, 1.0, 0.5)]).unwrap();
        let g = project(&emp, 4, &grid).unwrap();
        assert_eq!(g.get(1, 0), 0.5);
        assert_eq!(g.values().iter().sum::<f64>(), 0.5);
    }

    #[test]
    fn overflow_bin_collects_heavy_atoms() {
        let grid = MassGrid::integer(3).unwrap();
        let emp = EmpiricalMeasure::from_atoms(vec![atom(0.5, 40.0, 0.25), atom(0.5, 2.0, 0.75)])
            .unwrap();
        let g = project(&emp, 2, &grid).unwrap();
        assert_eq!(g.get(1, 2), 0.25);
        assert_eq!(g.get(1, 1), 0.75);
    }

    #[test]
    fn concentration_round_trip() {
        let grid = MassGrid::integer(2).unwrap();
        let g = GridMeasure::from_values(1, grid, vec![0.4, 0.6]).unwrap();
        let c = g.to_concentration().unwrap();
        assert_eq!(c.values(), &[0.4, 0.3]);
        assert_eq!(c.from_concentration().unwrap().values(), g.values());
    }

    #[test]
    fn monodisperse_count_is_one() {
        let n = 4;
        let atoms = (0..n).map(|i| atom(i as f64 / n as f64, 1.0, 0.25)).collect();
        let emp = EmpiricalMeasure::from_atoms(atoms).unwrap();
        let g = project(&emp, 4, &MassGrid::integer(3).unwrap()).unwrap();
        let c = g.to_concentration().unwrap();
        assert_eq!(c.values().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn geometric_pair_target_conserves_mass_and_number() {
        let grid = MassGrid::geometric(1.0, libm::pow(2.0, 0.25), 40).unwrap();
        for (a, b) in [(0, 0), (3, 7), (10, 2), (5, 5)] {
            let t = grid.pair_target(a, b);
            let m = grid.reps()[a] + grid.reps()[b];
            let (r0, r1) = (grid.reps()[t.lo], grid.reps()[t.hi]);
            assert!(r0 <= m && m < r1);
            // number: θ/r0 + (1-θ)/r1 = 1/m
            assert!((t.theta / r0 + (1.0 - t.theta) / r1 - 1.0 / m).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&t.theta));
        }
    }

    #[test]
    fn bin_lookup() {
        let grid = MassGrid::integer(5).unwrap();
        assert_eq!(grid.bin_of(1.0), 0);
        assert_eq!(grid.bin_of(2.9999999), 2);
        assert_eq!(grid.bin_of(0.0), 0);
        assert_eq!(grid.bin_of(77.0), 4);
        assert_eq!(grid.pair_target(1, 2).lo, 4);
        assert_eq!(grid.pair_target(3, 3).lo, 4);
    }
}
