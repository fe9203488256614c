use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::env::{extend_left, extend_right, Env, TwoSiteOperator};
use super::mpo::{build_mpo, MpoOperator};
use super::MpsState;
use crate::error::{Error, Result};
use crate::model::TermList1D;
use crate::tensor::{gemm, lanczos_best_effort, svd_truncated_matrix, symmetric_eigen, DenseTensor, LanczosOptions, MatRef};
use crate::trace::ConvergenceTrace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmrgConfig {
    pub max_bond: usize,
    pub max_sweeps: usize,
    /// Stop when the sweep energy changes by less than this per site.
    pub energy_tol: f64,
    pub lanczos_tol: f64,
    pub lanczos_max_iter: usize,
    pub svd_cutoff: f64,
    pub seed: u64,
    /// Bond dimension of the random initial state (capped by `max_bond`).
    pub initial_bond: usize,
    /// Written after every sweep; resumed from when it already exists.
    pub checkpoint: Option<PathBuf>,
    /// Identifies the run a checkpoint belongs to.
    pub config_hash: String,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            max_bond: 50,
            max_sweeps: 30,
            energy_tol: 1e-9,
            lanczos_tol: 1e-8,
            lanczos_max_iter: 400,
            svd_cutoff: crate::tensor::DEFAULT_CUTOFF,
            seed: 1234,
            initial_bond: 8,
            checkpoint: None,
            config_hash: String::new(),
        }
    }
}

impl DmrgConfig {
    pub fn with_bond(max_bond: usize) -> Self {
        Self { max_bond, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.max_bond == 0 || self.initial_bond == 0 {
            return Err(Error::InvalidParameter("bond dimensions must be >= 1".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be >= 1".into()));
        }
        if !(self.energy_tol > 0.0 && self.lanczos_tol > 0.0 && self.svd_cutoff >= 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum InitialState {
    Random,
    DownProduct,
    Given(MpsState),
}

#[derive(Clone, Debug)]
pub struct DmrgOutcome {
    pub state: MpsState,
    pub trace: ConvergenceTrace,
    /// Lowest local eigenvalue of the final sweep.
    pub energy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MpsCheckpoint {
    pub config_hash: String,
    pub trace: ConvergenceTrace,
    pub state: MpsState,
}

impl MpsCheckpoint {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let raw: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        let state = MpsState::from_tensors(raw.state.tensors, raw.state.center)?;
        Ok(Self { state, ..raw })
    }
}

pub fn dmrg_ground_state(terms: &TermList1D, config: &DmrgConfig) -> Result<DmrgOutcome> {
    dmrg_ground_state_from(terms, config, InitialState::Random)
}

pub fn dmrg_ground_state_from(terms: &TermList1D, config: &DmrgConfig, initial: InitialState) -> Result<DmrgOutcome> {
    config.validate()?;
    let n = terms.num_sites();
    let mpo = build_mpo(terms);
    if n == 1 {
        return single_site(&mpo);
    }
    let mut trace = ConvergenceTrace::default();
    let resumed = match &config.checkpoint {
        Some(p) if p.exists() => {
            let ck = MpsCheckpoint::load(p)?;
            if ck.config_hash != config.config_hash {
                return Err(Error::InvalidParameter(format!(
                    "checkpoint {} belongs to a different configuration",
                    p.display()
                )));
            }
            trace = ck.trace;
            Some(ck.state)
        }
        _ => None,
    };
    let state = match (resumed, initial) {
        (Some(s), _) => s,
        (None, InitialState::Random) => MpsState::random(n, config.initial_bond.min(config.max_bond), config.seed)?,
        (None, InitialState::DownProduct) => MpsState::down_product(n)?,
        (None, InitialState::Given(s)) => s,
    };
    if state.num_sites() != n {
        return Err(Error::SizeMismatch(format!("initial state has {} sites, model {n}", state.num_sites())));
    }
    let mut sweeper = Sweeper::new(&mpo, state, config)?;
    let mut energy = trace.final_energy().unwrap_or(f64::INFINITY);
    if trace.converged {
        return Ok(DmrgOutcome { state: sweeper.state, trace, energy });
    }
    while trace.sweeps() < config.max_sweeps {
        let start = Instant::now();
        let mut max_tw = 0.0f64;
        for i in 0..n - 1 {
            max_tw = max_tw.max(sweeper.update(i, true)?);
        }
        let mut e = f64::INFINITY;
        for i in (0..n - 1).rev() {
            let tw = sweeper.update(i, false)?;
            max_tw = max_tw.max(tw);
            e = sweeper.last_energy;
        }
        trace.energies.push(e);
        trace.max_truncated_weights.push(max_tw);
        trace.wall_times_s.push(start.elapsed().as_secs_f64());
        trace.unconverged_local_solves = sweeper.unconverged;
        let done = (e - energy).abs() < config.energy_tol * n as f64;
        energy = e;
        if done {
            trace.converged = true;
        }
        if let Some(p) = &config.checkpoint {
            MpsCheckpoint {
                config_hash: config.config_hash.clone(),
                trace: trace.clone(),
                state: sweeper.state.clone(),
            }
            .save(p)?;
        }
        if done {
            break;
        }
    }
    Ok(DmrgOutcome { state: sweeper.state, trace, energy })
}

fn single_site(mpo: &MpoOperator) -> Result<DmrgOutcome> {
    let mut h = [0.0; 4];
    for e in mpo.entries(0) {
        for r in 0..2 {
            for c in 0..2 {
                h[r * 2 + c] += e.op[r][c];
            }
        }
    }
    let (values, vectors) = symmetric_eigen(&h, 2)?;
    let state = MpsState::product(&[[vectors[0], vectors[2]]])?;
    let trace = ConvergenceTrace {
        energies: vec![values[0]],
        max_truncated_weights: vec![0.0],
        wall_times_s: vec![0.0],
        converged: true,
        unconverged_local_solves: 0,
    };
    Ok(DmrgOutcome { state, trace, energy: values[0] })
}

struct Sweeper<'a> {
    mpo: &'a MpoOperator,
    state: MpsState,
    left: Vec<Env>,
    right: Vec<Env>,
    opts: LanczosOptions,
    max_bond: usize,
    cutoff: f64,
    last_energy: f64,
    unconverged: usize,
}

impl<'a> Sweeper<'a> {
    fn new(mpo: &'a MpoOperator, mut state: MpsState, config: &DmrgConfig) -> Result<Self> {
        let n = state.num_sites();
        state.move_center(0)?;
        let mut right = vec![Env::trivial(); n];
        for i in (1..n).rev() {
            let (dl, dr) = state.dims(i);
            right[i - 1] = extend_right(&right[i], state.tensors[i].data(), dl, dr, mpo.entries(i), mpo.widths(i).0);
        }
        Ok(Self {
            mpo,
            state,
            left: vec![Env::trivial(); n],
            right,
            opts: LanczosOptions {
                max_iter: config.lanczos_max_iter,
                krylov_dim: 40,
                tol: config.lanczos_tol,
                seed: config.seed ^ 0x1a2c,
                check_symmetry: false,
            },
            max_bond: config.max_bond,
            cutoff: config.svd_cutoff,
            last_energy: f64::INFINITY,
            unconverged: 0,
        })
    }

    /// Optimizes sites `(i, i + 1)` and moves the center in the sweep
    /// direction. Returns the discarded weight.
    fn update(&mut self, i: usize, rightward: bool) -> Result<f64> {
        let (dl, dm) = self.state.dims(i);
        let (_, dr) = self.state.dims(i + 1);
        let mut theta = vec![0.0; dl * 4 * dr];
        gemm(
            1.0,
            MatRef::new(self.state.tensors[i].data(), 2 * dl, dm),
            MatRef::new(self.state.tensors[i + 1].data(), dm, 2 * dr),
            0.0,
            &mut theta,
        );
        let heff = TwoSiteOperator::new(
            &self.left[i],
            &self.right[i + 1],
            self.mpo.entries(i),
            self.mpo.entries(i + 1),
            self.mpo.widths(i).1,
        );
        debug_assert_eq!(heff.dim(), theta.len());
        let pair = lanczos_best_effort(|x, y| heff.apply(x, y), &theta, &self.opts)?;
        if !pair.value.is_finite() || pair.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite local eigenpair at bond {i}")));
        }
        if !pair.converged {
            self.unconverged += 1;
        }
        self.last_energy = pair.value;

        let svd = svd_truncated_matrix(&pair.vector, 2 * dl, 2 * dr, self.max_bond, self.cutoff)?;
        let k = svd.s.len();
        let s_norm = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        let s: Vec<f64> = svd.s.iter().map(|v| v / s_norm).collect();
        let mut u = svd.u;
        let mut vt = svd.vt;
        if rightward {
            for r in 0..k {
                vt[r * 2 * dr..(r + 1) * 2 * dr].iter_mut().for_each(|v| *v *= s[r]);
            }
        } else {
            for row in u.chunks_mut(k) {
                row.iter_mut().zip(&s).for_each(|(v, sv)| *v *= sv);
            }
        }
        self.state.tensors[i] = DenseTensor::from_vec(&[dl, 2, k], u)?;
        self.state.tensors[i + 1] = DenseTensor::from_vec(&[k, 2, dr], vt)?;
        if rightward {
            self.state.center = i + 1;
            self.left[i + 1] = extend_left(
                &self.left[i],
                self.state.tensors[i].data(),
                dl,
                k,
                self.mpo.entries(i),
                self.mpo.widths(i).1,
            );
        } else {
            self.state.center = i;
            self.right[i] = extend_right(
                &self.right[i + 1],
                self.state.tensors[i + 1].data(),
                k,
                dr,
                self.mpo.entries(i + 1),
                self.mpo.widths(i + 1).0,
            );
        }
        Ok(svd.truncated_weight)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ed::ed_ground_state;
    use crate::model::{map_to_chain, Boundary, IsingModel2D, PairTerm};
    use crate::spacefill::{CurveKind, SiteMapping};

    fn terms(n: usize, lambda: f64, kind: CurveKind, boundary: Boundary) -> TermList1D {
        let model = IsingModel2D::new(n, lambda, boundary).unwrap();
        map_to_chain(&model, &SiteMapping::new(kind, n).unwrap()).unwrap()
    }

    #[test]
    fn exact_on_the_plaquette() {
        for kind in [CurveKind::Hilbert, CurveKind::Snake] {
            for lambda in [0.0, 1.0, 2.9] {
                let t = terms(2, lambda, kind, Boundary::Open);
                let out = dmrg_ground_state(&t, &DmrgConfig::with_bond(4)).unwrap();
                let ed = ed_ground_state(&t, 1e-12).unwrap();
                assert!((out.energy - ed.energy).abs() < 1e-9);
                let mpo = build_mpo(&t);
                assert!((out.state.expectation(&mpo).unwrap() - out.energy).abs() < 1e-8);
                assert!(out.trace.converged);
            }
        }
    }

    #[test]
    fn snake_3x3_matches_exact() {
        for boundary in [Boundary::Open, Boundary::Periodic] {
            let t = terms(3, 2.0, CurveKind::Snake, boundary);
            let out = dmrg_ground_state(&t, &DmrgConfig::with_bond(16)).unwrap();
            let ed = ed_ground_state(&t, 1e-12).unwrap();
            assert!((out.energy - ed.energy).abs() < 1e-8, "{boundary}: {} vs {}", out.energy, ed.energy);
            let v = out.state.to_statevector().unwrap();
            let overlap: f64 = v.iter().zip(&ed.amplitudes).map(|(a, b)| a * b).sum();
            assert!(overlap.abs() > 1.0 - 1e-8);
        }
    }

    #[test]
    fn single_site_and_down_start() {
        let t = TermList1D::new(1, 0.7, vec![]).unwrap();
        let out = dmrg_ground_state(&t, &DmrgConfig::default()).unwrap();
        assert!((out.energy + 0.7).abs() < 1e-14);

        // Nearest-neighbour terms only: from a product state two-site updates
        // cannot create correlations between sites that are never updated together.
        let pairs = vec![PairTerm { mu: 0, nu: 1, weight: 1.0 }, PairTerm { mu: 1, nu: 2, weight: 1.0 }];
        let t = TermList1D::new(3, 0.5, pairs).unwrap();
        let out = dmrg_ground_state_from(&t, &DmrgConfig::with_bond(4), InitialState::DownProduct).unwrap();
        let ed = ed_ground_state(&t, 1e-12).unwrap();
        assert!((out.energy - ed.energy).abs() < 1e-9);
    }

    #[test]
    fn sweep_energies_do_not_increase() {
        // Without truncation each local step is variational.
        let t = terms(3, 3.0, CurveKind::Snake, Boundary::Periodic);
        let mut cfg = DmrgConfig::with_bond(16);
        cfg.energy_tol = f64::MIN_POSITIVE;
        cfg.max_sweeps = 5;
        cfg.initial_bond = 2;
        let out = dmrg_ground_state(&t, &cfg).unwrap();
        for w in out.trace.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{:?}", out.trace.energies);
        }
        assert!(out.trace.max_truncated_weights.iter().all(|&w| w < 1e-12));
    }

    #[test]
    fn bond_cap_is_respected() {
        let t = terms(4, 3.0, CurveKind::Hilbert, Boundary::Open);
        let mut cfg = DmrgConfig::with_bond(6);
        cfg.max_sweeps = 3;
        let out = dmrg_ground_state(&t, &cfg).unwrap();
        assert_eq!(out.state.max_bond_dim(), 6);
        let e = out.state.expectation(&build_mpo(&t)).unwrap();
        assert!((e - out.energy).abs() < 1e-3);
    }

    #[test]
    fn checkpoint_resume_reproduces_run() {
        let t = terms(3, 1.5, CurveKind::Snake, Boundary::Open);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let mut cfg = DmrgConfig::with_bond(3);
        cfg.energy_tol = f64::MIN_POSITIVE;
        cfg.max_sweeps = 2;
        cfg.checkpoint = Some(path.clone());
        cfg.config_hash = "abc".into();
        let first = dmrg_ground_state(&t, &cfg).unwrap();
        assert_eq!(first.trace.sweeps(), 2);
        cfg.max_sweeps = 4;
        let resumed = dmrg_ground_state(&t, &cfg).unwrap();
        assert_eq!(resumed.trace.sweeps(), 4);
        assert_eq!(&resumed.trace.energies[..2], &first.trace.energies[..]);

        cfg.checkpoint = None;
        let straight = dmrg_ground_state(&t, &cfg).unwrap();
        assert_eq!(straight.trace.energies, resumed.trace.energies);

        cfg.checkpoint = Some(path);
        cfg.config_hash = "other".into();
        assert!(dmrg_ground_state(&t, &cfg).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let t = terms(2, 1.0, CurveKind::Snake, Boundary::Open);
        assert!(dmrg_ground_state(&t, &DmrgConfig::with_bond(0)).is_err());
    }
}
