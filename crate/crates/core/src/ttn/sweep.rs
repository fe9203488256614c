use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::block::{Block, CenterOperator};
use super::{oriented, other_legs, Link, TtnState, Tree};
use crate::error::{Error, Result};
use crate::model::TermList1D;
use crate::tensor::{lanczos_best_effort, DenseTensor, LanczosOptions};
use crate::trace::ConvergenceTrace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtnConfig {
    pub max_bond: usize,
    pub max_sweeps: usize,
    /// Stop when the sweep energy changes by less than this per site.
    pub energy_tol: f64,
    pub lanczos_tol: f64,
    pub lanczos_max_iter: usize,
    pub seed: u64,
    pub checkpoint: Option<PathBuf>,
    pub config_hash: String,
}

impl Default for TtnConfig {
    fn default() -> Self {
        Self {
            max_bond: 50,
            max_sweeps: 30,
            energy_tol: 1e-9,
            lanczos_tol: 1e-8,
            lanczos_max_iter: 400,
            seed: 1234,
            checkpoint: None,
            config_hash: String::new(),
        }
    }
}

impl TtnConfig {
    pub fn with_bond(max_bond: usize) -> Self {
        Self { max_bond, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.max_bond == 0 {
            return Err(Error::InvalidParameter("max_bond must be >= 1".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be >= 1".into()));
        }
        if !(self.energy_tol > 0.0 && self.lanczos_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TtnOutcome {
    pub state: TtnState,
    pub trace: ConvergenceTrace,
    /// Lowest local eigenvalue of the final update.
    pub energy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TtnCheckpoint {
    pub config_hash: String,
    pub trace: ConvergenceTrace,
    pub state: TtnState,
}

impl TtnCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        let s = raw.state;
        let state = TtnState::from_parts(s.num_leaves, s.tensors, s.center)?;
        Ok(Self { state, ..raw })
    }
}

/// Single-tensor variational sweeps from random isometries at full allowed
/// rank. Nodes are visited in depth-first pre-order from the first top node.
pub fn ttn_ground_state(terms: &TermList1D, config: &TtnConfig) -> Result<TtnOutcome> {
    config.validate()?;
    let n = terms.num_sites();
    let tree = Tree::new(n)?;
    let mut trace = ConvergenceTrace::default();
    let state = match &config.checkpoint {
        Some(p) if p.exists() => {
            let ck = TtnCheckpoint::load(p)?;
            if ck.config_hash != config.config_hash {
                return Err(Error::InvalidParameter(format!(
                    "checkpoint {} belongs to a different configuration",
                    p.display()
                )));
            }
            if ck.state.num_sites() != n {
                return Err(Error::SizeMismatch("checkpoint has a different size".into()));
            }
            trace = ck.trace;
            ck.state
        }
        _ => TtnState::random(n, config.max_bond, config.seed)?,
    };
    let mut energy = trace.final_energy().unwrap_or(f64::INFINITY);
    if trace.converged {
        return Ok(TtnOutcome { state, trace, energy });
    }
    let mut sweeper = Sweeper::new(terms, tree, state, config)?;
    let order = tree.sweep_order();
    while trace.sweeps() < config.max_sweeps {
        let start = Instant::now();
        for &node in &order {
            sweeper.move_to(node)?;
            sweeper.optimize()?;
        }
        // Park the center at node 0 so checkpoints resume where a sweep starts.
        sweeper.move_to(0)?;
        let e = sweeper.last_energy;
        trace.energies.push(e);
        trace.max_truncated_weights.push(0.0);
        trace.wall_times_s.push(start.elapsed().as_secs_f64());
        trace.unconverged_local_solves = sweeper.unconverged;
        let done = (e - energy).abs() < config.energy_tol * n as f64;
        energy = e;
        trace.converged = done;
        if let Some(p) = &config.checkpoint {
            TtnCheckpoint {
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
    Ok(TtnOutcome { state: sweeper.state, trace, energy })
}

struct Sweeper {
    tree: Tree,
    state: TtnState,
    adjacency: Vec<Vec<(usize, f64)>>,
    lambda: f64,
    /// `blocks[v][leg]`: block seen from node `v` through `leg`; valid for
    /// every link pointing toward the center.
    blocks: Vec<[Option<Block>; 3]>,
    opts: LanczosOptions,
    last_energy: f64,
    unconverged: usize,
}

impl Sweeper {
    fn new(terms: &TermList1D, tree: Tree, mut state: TtnState, config: &TtnConfig) -> Result<Self> {
        state.move_center(0)?;
        let mut s = Self {
            tree,
            blocks: vec![[None, None, None]; tree.num_nodes()],
            state,
            adjacency: terms.adjacency(),
            lambda: terms.lambda(),
            opts: LanczosOptions {
                max_iter: config.lanczos_max_iter,
                krylov_dim: 40,
                tol: config.lanczos_tol,
                seed: config.seed ^ 0x77a1,
                check_symmetry: false,
            },
            last_energy: f64::INFINITY,
            unconverged: 0,
        };
        for leg in 0..3 {
            s.fill(0, leg);
        }
        Ok(s)
    }

    /// Computes `blocks[v][leg]` and everything it depends on.
    fn fill(&mut self, v: usize, leg: usize) {
        let block = match self.tree.neighbor(v, leg) {
            Link::Leaf(site) => Block::leaf(site, self.tree.num_leaves(), self.lambda, &self.adjacency),
            Link::Node { id, leg: lu } => {
                let (p, q) = other_legs(lu);
                self.fill(id, p);
                self.fill(id, q);
                self.block_from(id, lu)
            }
        };
        self.blocks[v][leg] = Some(block);
    }

    /// Block of node `u`'s far side seen through `u`'s leg `lu`.
    fn block_from(&self, u: usize, lu: usize) -> Block {
        let (p, q) = other_legs(lu);
        let bp = self.blocks[u][p].as_ref().expect("blocks away from the center are cached");
        let bq = self.blocks[u][q].as_ref().expect("blocks away from the center are cached");
        let (data, dims) = oriented(&self.state.tensors[u], lu);
        Block::combine(bp, bq, &data, dims[2], &self.adjacency)
    }

    fn move_to(&mut self, target: usize) -> Result<()> {
        let path = self.tree.path(self.state.center, target);
        for w in path.windows(2) {
            let (u, v) = (w[0], w[1]);
            self.state.shift(u, v)?;
            let lu = self.tree.leg_toward(u, v);
            let lv = self.tree.leg_toward(v, u);
            self.blocks[v][lv] = Some(self.block_from(u, lu));
            // u's block toward v is stale from now on
            self.blocks[u][lu] = None;
        }
        Ok(())
    }

    fn optimize(&mut self) -> Result<()> {
        let c = self.state.center;
        let [b0, b1, b2] = &self.blocks[c];
        let blocks = [
            b0.as_ref().expect("center blocks cached"),
            b1.as_ref().expect("center blocks cached"),
            b2.as_ref().expect("center blocks cached"),
        ];
        let op = CenterOperator::new(blocks, &self.adjacency);
        let theta = &self.state.tensors[c];
        debug_assert_eq!(op.dim(), theta.len());
        let pair = lanczos_best_effort(|x, y| op.apply(x, y), theta.data(), &self.opts)?;
        if !pair.value.is_finite() || pair.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite local eigenpair at node {c}")));
        }
        if !pair.converged {
            self.unconverged += 1;
        }
        self.last_energy = pair.value;
        let shape = theta.shape().to_vec();
        self.state.tensors[c] = DenseTensor::from_vec(&shape, pair.vector)?;
        Ok(())
    }
}
