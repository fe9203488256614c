//! Measurements on converged states, pulled back to the 2D lattice.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ed::{ed_expectation, EdGroundState};
use crate::error::{Error, Result};
use crate::experiment::RunResult;
use crate::mps::MpsState;
use crate::ops::Axis;
use crate::spacefill::{ChainIndex, LatticeCoord, SiteMapping};
use crate::ttn::TtnState;

/// Single-site and collective spin expectations of a normalized chain state.
pub trait SpinExpectations {
    fn num_sites(&self) -> usize;

    fn expectation(&self, site: ChainIndex, axis: Axis) -> Result<f64>;

    /// `<(Σ_μ w_μ σx_μ)²>`.
    fn x_second_moment(&self, weights: &[f64]) -> Result<f64>;
}

fn check_site(site: ChainIndex, len: usize) -> Result<()> {
    if site.0 >= len {
        return Err(Error::IndexOutOfRange { index: site.0, len });
    }
    Ok(())
}

impl SpinExpectations for MpsState {
    fn num_sites(&self) -> usize {
        MpsState::num_sites(self)
    }

    fn expectation(&self, site: ChainIndex, axis: Axis) -> Result<f64> {
        check_site(site, MpsState::num_sites(self))?;
        Ok(self.local_expectation(site.0, axis.op()))
    }

    fn x_second_moment(&self, weights: &[f64]) -> Result<f64> {
        self.collective_x_second_moment(weights)
    }
}

impl SpinExpectations for TtnState {
    fn num_sites(&self) -> usize {
        TtnState::num_sites(self)
    }

    fn expectation(&self, site: ChainIndex, axis: Axis) -> Result<f64> {
        check_site(site, TtnState::num_sites(self))?;
        Ok(self.local_expectation(site.0, axis.op()))
    }

    fn x_second_moment(&self, weights: &[f64]) -> Result<f64> {
        self.collective_x_second_moment(weights)
    }
}

impl SpinExpectations for EdGroundState {
    fn num_sites(&self) -> usize {
        self.num_sites
    }

    fn expectation(&self, site: ChainIndex, axis: Axis) -> Result<f64> {
        check_site(site, self.num_sites)?;
        Ok(ed_expectation(self, site, axis))
    }

    fn x_second_moment(&self, weights: &[f64]) -> Result<f64> {
        if weights.len() != self.num_sites {
            return Err(Error::SizeMismatch(format!(
                "{} weights for {} sites",
                weights.len(),
                self.num_sites
            )));
        }
        Ok(self.collective_x_second_moment(weights))
    }
}

/// Sublattice parity `(-1)^(x+y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StaggeredSign {
    n: usize,
}

impl StaggeredSign {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn at(&self, c: LatticeCoord) -> f64 {
        if (c.x + c.y) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Signs in chain order, each divided by the number of sites.
    pub fn chain_weights(&self, mapping: &SiteMapping) -> Vec<f64> {
        let sites = (self.n * self.n) as f64;
        mapping.order().iter().map(|&c| self.at(c) / sites).collect()
    }
}

fn check_mapping(state: &impl SpinExpectations, mapping: &SiteMapping) -> Result<()> {
    if state.num_sites() != mapping.num_sites() {
        return Err(Error::SizeMismatch(format!(
            "state has {} sites, mapping has {}",
            state.num_sites(),
            mapping.num_sites()
        )));
    }
    Ok(())
}

/// `(1/n⁴) Σ_ij ζ_i ζ_j <σx_i σx_j>`.
pub fn staggered_magnetization_sq(state: &impl SpinExpectations, mapping: &SiteMapping) -> Result<f64> {
    check_mapping(state, mapping)?;
    let w = StaggeredSign::new(mapping.n()).chain_weights(mapping);
    Ok(state.x_second_moment(&w)?.clamp(0.0, 1.0))
}

/// Square root of [`staggered_magnetization_sq`]; the reported order parameter.
pub fn staggered_magnetization(state: &impl SpinExpectations, mapping: &SiteMapping) -> Result<f64> {
    Ok(staggered_magnetization_sq(state, mapping)?.sqrt())
}

/// `(1/n²) Σ_i ζ_i <σx_i>`. Zero for a symmetric state; nonzero only when the
/// solver has broken the spin-flip symmetry.
pub fn signed_staggered_magnetization(state: &impl SpinExpectations, mapping: &SiteMapping) -> Result<f64> {
    check_mapping(state, mapping)?;
    let w = StaggeredSign::new(mapping.n()).chain_weights(mapping);
    (0..w.len()).try_fold(0.0, |acc, mu| Ok(acc + w[mu] * state.expectation(ChainIndex(mu), Axis::X)?))
}

/// Per-site values on the `n x n` lattice, stored row by row from `y = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationMap {
    pub n: usize,
    pub values: Vec<f64>,
}

impl MagnetizationMap {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        Self::bounded(n, values, 1.0)
    }

    /// Site values may reach `limit` in magnitude; difference maps use 2.
    fn bounded(n: usize, values: Vec<f64>, limit: f64) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::SizeMismatch(format!("{} values for an {n}x{n} lattice", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= limit + 1e-6)) {
            return Err(Error::InvalidParameter(format!("site value {v} outside [-{limit}, {limit}]")));
        }
        Ok(Self { n, values })
    }

    pub fn get(&self, c: LatticeCoord) -> f64 {
        self.values[c.y * self.n + c.x]
    }

    /// `n` lines of `n` comma-separated values; line `y` holds row `y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.values.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|&v| crate::fmt_f64(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Accepts both magnetization maps and difference maps.
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut rows = 0;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            rows += 1;
            for field in line.split(',') {
                let v = field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("bad map entry '{field}': {e}")))?;
                values.push(v);
            }
        }
        Self::bounded(rows, values, 2.0)
    }

    /// Mean over sites next to a quadrant dividing line and mean over the rest.
    pub fn bulk_and_boundary_means(&self) -> (f64, f64) {
        let (mut bulk, mut boundary) = ((0.0, 0usize), (0.0, 0usize));
        for y in 0..self.n {
            for x in 0..self.n {
                let c = LatticeCoord::new(x, y);
                let acc = if on_quadrant_boundary(c, self.n) { &mut boundary } else { &mut bulk };
                acc.0 += self.get(c);
                acc.1 += 1;
            }
        }
        let mean = |(s, k): (f64, usize)| if k == 0 { f64::NAN } else { s / k as f64 };
        (mean(bulk), mean(boundary))
    }
}

/// Sites within distance 1 of the lines splitting the lattice into quadrants.
pub fn on_quadrant_boundary(c: LatticeCoord, n: usize) -> bool {
    let h = n / 2;
    let near = |v: usize| h >= 1 && (v == h - 1 || v == h);
    near(c.x) || near(c.y)
}

/// `<σz>` of every lattice site.
pub fn local_z_map(state: &impl SpinExpectations, mapping: &SiteMapping) -> Result<MagnetizationMap> {
    check_mapping(state, mapping)?;
    let n = mapping.n();
    let mut values = vec![0.0; n * n];
    for (mu, c) in mapping.order().iter().enumerate() {
        values[c.y * n + c.x] = state.expectation(ChainIndex(mu), Axis::Z)?;
    }
    MagnetizationMap::new(n, values)
}

/// Pointwise `|a - b|`.
pub fn magnetization_difference(a: &MagnetizationMap, b: &MagnetizationMap) -> Result<MagnetizationMap> {
    if a.n != b.n {
        return Err(Error::SizeMismatch(format!("maps of size {} and {}", a.n, b.n)));
    }
    let values = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    MagnetizationMap::bounded(a.n, values, 2.0)
}

/// `E_snake - E_hilbert` per site for two runs at the same parameters.
pub fn energy_difference(snake: &RunResult, hilbert: &RunResult) -> Result<f64> {
    let same = snake.n == hilbert.n
        && snake.lambda == hilbert.lambda
        && snake.boundary == hilbert.boundary
        && snake.engine == hilbert.engine
        && snake.m == hilbert.m;
    if !same {
        return Err(Error::InvalidParameter(
            "energy difference needs runs with equal n, lambda, boundary, engine and m".into(),
        ));
    }
    Ok(snake.energy_density - hilbert.energy_density)
}
