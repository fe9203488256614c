//! The 2D transverse-field Ising model and its long-range 1D image.
//!
//! `H = J Σ_<ij> σx_i σx_j + λ Σ_i σz_i` on an `n x n` lattice. Mapping the
//! lattice onto a chain with a [`SiteMapping`] turns every nearest-neighbour
//! bond into a (generally long-range) pair term of a [`TermList1D`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spacefill::{tree_distance_unchecked, LatticeCoord, SiteMapping};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[serde(alias = "obc")]
    Open,
    #[serde(alias = "pbc")]
    Periodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Open => f.write_str("obc"),
            Boundary::Periodic => f.write_str("pbc"),
        }
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "obc" | "open" => Ok(Boundary::Open),
            "pbc" | "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::InvalidParameter(format!("unknown boundary '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge2D {
    pub a: LatticeCoord,
    pub b: LatticeCoord,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingModel2D {
    pub n: usize,
    pub coupling_j: f64,
    pub field_lambda: f64,
    pub boundary: Boundary,
}

impl IsingModel2D {
    /// Antiferromagnetic model with `J = 1`.
    ///
    /// Periodic boundaries need `n >= 3`; at `n = 2` every wraparound bond
    /// would coincide with an open-boundary bond.
    pub fn new(n: usize, field_lambda: f64, boundary: Boundary) -> Result<Self> {
        Self::with_coupling(n, 1.0, field_lambda, boundary)
    }

    pub fn with_coupling(
        n: usize,
        coupling_j: f64,
        field_lambda: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("lattice size must be >= 2, got {n}")));
        }
        if boundary == Boundary::Periodic && n < 3 {
            return Err(Error::InvalidSize("periodic boundaries need n >= 3".into()));
        }
        if !coupling_j.is_finite() || !field_lambda.is_finite() {
            return Err(Error::InvalidParameter("non-finite coupling or field".into()));
        }
        Ok(Self {
            n,
            coupling_j,
            field_lambda,
            boundary,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.n * self.n
    }
}

/// All nearest-neighbour bonds; under periodic boundaries also the `n`
/// wraparound bonds per row and per column.
pub fn edges_2d(model: &IsingModel2D) -> Vec<Edge2D> {
    let n = model.n;
    let mut edges = Vec::with_capacity(2 * n * n);
    for y in 0..n {
        for x in 0..n {
            let here = LatticeCoord::new(x, y);
            if x + 1 < n {
                edges.push(Edge2D { a: here, b: LatticeCoord::new(x + 1, y) });
            } else if model.boundary == Boundary::Periodic {
                edges.push(Edge2D { a: here, b: LatticeCoord::new(0, y) });
            }
            if y + 1 < n {
                edges.push(Edge2D { a: here, b: LatticeCoord::new(x, y + 1) });
            } else if model.boundary == Boundary::Periodic {
                edges.push(Edge2D { a: here, b: LatticeCoord::new(x, 0) });
            }
        }
    }
    edges
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub mu: usize,
    pub nu: usize,
    pub weight: f64,
}

/// Chain Hamiltonian `Σ w σx_mu σx_nu + λ Σ σz_mu`, pair terms sorted by `(mu, nu)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TermList1D {
    num_sites: usize,
    lambda: f64,
    pairs: Vec<PairTerm>,
}

impl TermList1D {
    /// Validates and sorts the pairs; `(mu, nu)` may be given in either order.
    pub fn new(num_sites: usize, lambda: f64, pairs: Vec<PairTerm>) -> Result<Self> {
        if num_sites == 0 {
            return Err(Error::InvalidSize("term list needs at least one site".into()));
        }
        let mut pairs: Vec<PairTerm> = pairs
            .into_iter()
            .map(|p| PairTerm {
                mu: p.mu.min(p.nu),
                nu: p.mu.max(p.nu),
                weight: p.weight,
            })
            .collect();
        for p in &pairs {
            if p.nu >= num_sites {
                return Err(Error::IndexOutOfRange { index: p.nu, len: num_sites });
            }
            if p.mu == p.nu {
                return Err(Error::InvalidParameter(format!("self-coupling at site {}", p.mu)));
            }
            if !p.weight.is_finite() {
                return Err(Error::InvalidParameter("non-finite pair weight".into()));
            }
        }
        pairs.sort_by_key(|p| (p.mu, p.nu));
        if pairs.windows(2).any(|w| (w[0].mu, w[0].nu) == (w[1].mu, w[1].nu)) {
            return Err(Error::InvalidParameter("duplicate pair term".into()));
        }
        Ok(Self {
            num_sites,
            lambda,
            pairs,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn pairs(&self) -> &[PairTerm] {
        &self.pairs
    }

    /// Same pairs with a different transverse field.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    /// For every site, the list of `(partner, weight)` couplings.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.num_sites];
        for p in &self.pairs {
            adj[p.mu].push((p.nu, p.weight));
            adj[p.nu].push((p.mu, p.weight));
        }
        adj
    }

    pub fn to_json(&self) -> TermListJson {
        TermListJson {
            num_sites: self.num_sites,
            lambda: self.lambda,
            pairs: self.pairs.iter().map(|p| (p.mu, p.nu, p.weight)).collect(),
        }
    }

    pub fn from_json(json: &TermListJson) -> Result<Self> {
        let pairs = json
            .pairs
            .iter()
            .map(|&(mu, nu, weight)| PairTerm { mu, nu, weight })
            .collect();
        Self::new(json.num_sites, json.lambda, pairs)
    }
}

/// Serialized term list: `{num_sites, lambda, pairs: [[mu, nu, weight], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermListJson {
    pub num_sites: usize,
    pub lambda: f64,
    pub pairs: Vec<(usize, usize, f64)>,
}

/// Relabels the bonds of `model` through `mapping`.
pub fn map_to_chain(model: &IsingModel2D, mapping: &SiteMapping) -> Result<TermList1D> {
    if mapping.n() != model.n {
        return Err(Error::SizeMismatch(format!(
            "model n={} but mapping n={}",
            model.n,
            mapping.n()
        )));
    }
    let pairs = edges_2d(model)
        .into_iter()
        .map(|e| PairTerm {
            mu: mapping.forward(e.a).0,
            nu: mapping.forward(e.b).0,
            weight: model.coupling_j,
        })
        .collect();
    TermList1D::new(model.num_sites(), model.field_lambda, pairs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Chain,
    Tree,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Geometry::Chain => f.write_str("chain"),
            Geometry::Tree => f.write_str("tree"),
        }
    }
}

/// Distribution of network distances over the pair terms of a [`TermList1D`].
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceHistogram {
    pub geometry: Geometry,
    pub counts: BTreeMap<usize, usize>,
    pub normalized: BTreeMap<usize, f64>,
}

impl DistanceHistogram {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn mean(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.counts.iter().map(|(&d, &c)| (d * c) as f64).sum::<f64>() / total as f64
    }

    pub fn max_distance(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }

    /// Probability mass at distances `>= fraction * max_distance`.
    pub fn tail_mass(&self, fraction: f64) -> f64 {
        let Some(max) = self.max_distance() else {
            return 0.0;
        };
        let threshold = fraction * max as f64;
        self.normalized
            .iter()
            .filter(|(&d, _)| d as f64 >= threshold)
            .map(|(_, &p)| p)
            .sum()
    }

    /// CSV with header `distance,count,probability`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "distance,count,probability")?;
        for (d, c) in &self.counts {
            writeln!(w, "{d},{c},{}", crate::fmt_f64(self.normalized[d]))?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str, geometry: Geometry) -> Result<Self> {
        let mut counts = BTreeMap::new();
        let mut normalized = BTreeMap::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || Error::InvalidParameter(format!("bad histogram line '{line}'"));
            if cols.len() != 3 {
                return Err(bad());
            }
            let d: usize = cols[0].parse().map_err(|_| bad())?;
            counts.insert(d, cols[1].parse().map_err(|_| bad())?);
            normalized.insert(d, cols[2].parse().map_err(|_| bad())?);
        }
        Ok(Self {
            geometry,
            counts,
            normalized,
        })
    }
}

pub fn distance_histogram(terms: &TermList1D, geometry: Geometry) -> Result<DistanceHistogram> {
    let n = terms.num_sites();
    let levels = match geometry {
        Geometry::Chain => 0,
        Geometry::Tree => {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::InvalidSize(format!(
                    "tree geometry needs a power-of-two site count >= 4, got {n}"
                )));
            }
            n.trailing_zeros() as usize
        }
    };
    let mut counts = BTreeMap::new();
    for p in terms.pairs() {
        let d = match geometry {
            Geometry::Chain => p.nu - p.mu,
            Geometry::Tree => tree_distance_unchecked(p.mu, p.nu, levels),
        };
        *counts.entry(d).or_insert(0usize) += 1;
    }
    let total = terms.pairs().len().max(1) as f64;
    let normalized = counts.iter().map(|(&d, &c)| (d, c as f64 / total)).collect();
    Ok(DistanceHistogram {
        geometry,
        counts,
        normalized,
    })
}

/// Entry `b` counts the pair terms `(mu, nu)` with `mu <= b < nu`.
pub fn open_terms_per_cut(terms: &TermList1D) -> Vec<usize> {
    let n = terms.num_sites();
    let mut delta = vec![0isize; n + 1];
    for p in terms.pairs() {
        delta[p.mu] += 1;
        delta[p.nu] -= 1;
    }
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    let mut running = 0isize;
    for d in delta.iter().take(n.saturating_sub(1)) {
        running += d;
        out.push(running as usize);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacefill::{build_hilbert, build_snake, CurveKind};

    fn pair_set(t: &TermList1D) -> Vec<(usize, usize)> {
        t.pairs().iter().map(|p| (p.mu, p.nu)).collect()
    }

    #[test]
    fn edge_counts() {
        let obc = |n| IsingModel2D::new(n, 1.0, Boundary::Open).unwrap();
        let pbc = |n| IsingModel2D::new(n, 1.0, Boundary::Periodic).unwrap();
        assert_eq!(edges_2d(&obc(2)).len(), 4);
        assert_eq!(edges_2d(&obc(4)).len(), 24);
        assert_eq!(edges_2d(&pbc(4)).len(), 32);
        for n in 2..=64 {
            assert_eq!(edges_2d(&obc(n)).len(), 2 * n * (n - 1));
            if n >= 3 {
                assert_eq!(edges_2d(&pbc(n)).len(), 2 * n * n);
            }
        }
        assert!(IsingModel2D::new(2, 1.0, Boundary::Periodic).is_err());
        assert!(IsingModel2D::new(1, 1.0, Boundary::Open).is_err());
    }

    #[test]
    fn pbc_edges_are_distinct_neighbours() {
        let model = IsingModel2D::new(5, 0.0, Boundary::Periodic).unwrap();
        let mut seen = std::collections::HashSet::new();
        for e in edges_2d(&model) {
            let dx = e.a.x.abs_diff(e.b.x);
            let dy = e.a.y.abs_diff(e.b.y);
            let step = |d: usize| d == 1 || d == model.n - 1;
            assert!((step(dx) && dy == 0) || (step(dy) && dx == 0));
            assert!(seen.insert((e.a.min(e.b), e.a.max(e.b))));
        }
    }

    #[test]
    fn n2_maps_to_four_cycle() {
        let model = IsingModel2D::new(2, 0.7, Boundary::Open).unwrap();
        for kind in [CurveKind::Hilbert, CurveKind::Snake] {
            let t = map_to_chain(&model, &SiteMapping::new(kind, 2).unwrap()).unwrap();
            assert_eq!(pair_set(&t), vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
            assert!(t.pairs().iter().all(|p| p.weight == 1.0));
            assert_eq!(t.lambda(), 0.7);
        }
    }

    #[test]
    fn map_to_chain_rejects_size_mismatch() {
        let model = IsingModel2D::new(4, 1.0, Boundary::Open).unwrap();
        assert!(matches!(
            map_to_chain(&model, &build_hilbert(8).unwrap()),
            Err(Error::SizeMismatch(_))
        ));
    }

    #[test]
    fn snake_n8_term_distances() {
        let n = 8;
        let model = IsingModel2D::new(n, 1.0, Boundary::Open).unwrap();
        let t = map_to_chain(&model, &build_snake(n).unwrap()).unwrap();
        assert_eq!(t.pairs().len(), 112);
        // Horizontal bonds of every row have distance 1; the row turns are the
        // remaining unit-distance bonds.
        let unit = t.pairs().iter().filter(|p| p.nu - p.mu == 1).count();
        assert_eq!(unit, n * (n - 1) + (n - 1));
        assert_eq!(t.pairs().iter().map(|p| p.nu - p.mu).max(), Some(15));
    }

    #[test]
    fn unit_distance_terms_equal_chain_length_minus_one() {
        for n in [2, 4, 8, 16] {
            let model = IsingModel2D::new(n, 1.0, Boundary::Open).unwrap();
            for kind in [CurveKind::Hilbert, CurveKind::Snake] {
                let t = map_to_chain(&model, &SiteMapping::new(kind, n).unwrap()).unwrap();
                assert!(t.pairs().iter().all(|p| p.nu > p.mu));
                let unit = t.pairs().iter().filter(|p| p.nu - p.mu == 1).count();
                assert_eq!(unit, n * n - 1);
            }
        }
    }

    #[test]
    fn term_list_validation() {
        let p = |mu, nu| PairTerm { mu, nu, weight: 1.0 };
        assert!(TermList1D::new(4, 0.0, vec![p(0, 4)]).is_err());
        assert!(TermList1D::new(4, 0.0, vec![p(1, 1)]).is_err());
        assert!(TermList1D::new(4, 0.0, vec![p(0, 1), p(1, 0)]).is_err());
        let t = TermList1D::new(4, 0.0, vec![p(3, 2), p(0, 1)]).unwrap();
        assert_eq!(pair_set(&t), vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn term_list_json_round_trip() {
        let model = IsingModel2D::new(4, 2.9, Boundary::Periodic).unwrap();
        let t = map_to_chain(&model, &build_hilbert(4).unwrap()).unwrap();
        let text = serde_json::to_string(&t.to_json()).unwrap();
        assert!(text.contains("\"num_sites\":16"));
        let back = TermList1D::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn n2_histogram() {
        let model = IsingModel2D::new(2, 1.0, Boundary::Open).unwrap();
        for kind in [CurveKind::Hilbert, CurveKind::Snake] {
            let t = map_to_chain(&model, &SiteMapping::new(kind, 2).unwrap()).unwrap();
            let h = distance_histogram(&t, Geometry::Chain).unwrap();
            assert_eq!(h.counts, BTreeMap::from([(1, 3), (3, 1)]));
            let total: f64 = h.normalized.values().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn n16_histograms_by_enumeration() {
        // Expected values come from direct enumeration of all 480 bonds.
        let model = IsingModel2D::new(16, 1.0, Boundary::Open).unwrap();
        let h = map_to_chain(&model, &build_hilbert(16).unwrap()).unwrap();
        let s = map_to_chain(&model, &build_snake(16).unwrap()).unwrap();
        let chain_sum = |t: &TermList1D| t.pairs().iter().map(|p| p.nu - p.mu).sum::<usize>();
        let hc = distance_histogram(&h, Geometry::Chain).unwrap();
        let sc = distance_histogram(&s, Geometry::Chain).unwrap();
        assert_eq!(hc.total(), 480);
        assert_eq!(sc.max_distance(), Some(31));
        assert!((sc.mean() - chain_sum(&s) as f64 / 480.0).abs() < 1e-12);
        assert_eq!(chain_sum(&s), 4080);
        assert_eq!(chain_sum(&h), 4760);
        let ht = distance_histogram(&h, Geometry::Tree).unwrap();
        let st = distance_histogram(&s, Geometry::Tree).unwrap();
        assert!(ht.mean() < st.mean());
        assert_eq!(ht.max_distance(), Some(15));
    }

    #[test]
    fn tree_histogram_rejects_non_power_of_two() {
        let model = IsingModel2D::new(3, 1.0, Boundary::Open).unwrap();
        let t = map_to_chain(&model, &build_snake(3).unwrap()).unwrap();
        assert!(distance_histogram(&t, Geometry::Tree).is_err());
        assert!(distance_histogram(&t, Geometry::Chain).is_ok());
    }

    #[test]
    fn histogram_csv_round_trip() {
        let model = IsingModel2D::new(8, 1.0, Boundary::Open).unwrap();
        let t = map_to_chain(&model, &build_hilbert(8).unwrap()).unwrap();
        let h = distance_histogram(&t, Geometry::Tree).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let back = DistanceHistogram::read_csv(std::str::from_utf8(&buf).unwrap(), Geometry::Tree).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn open_terms_cases() {
        let model = IsingModel2D::new(2, 1.0, Boundary::Open).unwrap();
        let t = map_to_chain(&model, &build_hilbert(2).unwrap()).unwrap();
        assert_eq!(open_terms_per_cut(&t), vec![2, 2, 2]);
        let single = TermList1D::new(6, 0.0, vec![PairTerm { mu: 0, nu: 5, weight: 1.0 }]).unwrap();
        assert_eq!(open_terms_per_cut(&single), vec![1; 5]);
        let empty = TermList1D::new(5, 1.0, vec![]).unwrap();
        assert_eq!(open_terms_per_cut(&empty), vec![0; 4]);
    }

    #[test]
    fn snake_open_terms_peak_at_n_plus_one() {
        let model = IsingModel2D::new(8, 1.0, Boundary::Open).unwrap();
        let t = map_to_chain(&model, &build_snake(8).unwrap()).unwrap();
        assert_eq!(open_terms_per_cut(&t).into_iter().max(), Some(9));
    }
}
