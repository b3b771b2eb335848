//! Candidate model spaces.
//!
//! Two kinds of space are supported:
//!
//! * **Subsets** of `K` covariate columns (`K <= 20`), optionally with
//!   interaction columns that may only enter together with both parents.
//!   Models are ordered by number of included columns, then by the binary
//!   value of `gamma` with covariate 1 as the least significant bit.
//! * **Two-factor patterns** for two binary factors A and B: every partition
//!   of the four cells into groups with a common mean (15 partitions), plus
//!   the additive model, 16 in total. The order is null, A split, B split,
//!   additive, then the 12 interaction partitions by block count and
//!   restricted-growth label.
//!
//! The null model always sits at index 0.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_SUBSET_COVARIATES: usize = 20;

/// Cells of a 2x2 layout are indexed `2 * a + b` for factor levels `a, b`.
pub const CELLS: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

/// Partition of the four cells, as a restricted-growth string: `blocks[c]`
/// is the block of cell `c`, `blocks[0] == 0`, and each label is at most one
/// more than the largest label before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellPartition(pub [u8; 4]);

impl CellPartition {
    pub fn n_blocks(&self) -> usize {
        *self.0.iter().max().unwrap() as usize + 1
    }

    /// Factor A (first factor) separates two cells of the same B level.
    pub fn splits_a(&self) -> bool {
        self.0[0] != self.0[2] || self.0[1] != self.0[3]
    }

    pub fn splits_b(&self) -> bool {
        self.0[0] != self.0[1] || self.0[2] != self.0[3]
    }

    /// Factor A separates cells at every level of B.
    pub fn a_at_all_levels(&self) -> bool {
        self.0[0] != self.0[2] && self.0[1] != self.0[3]
    }

    pub fn b_at_all_levels(&self) -> bool {
        self.0[0] != self.0[1] && self.0[2] != self.0[3]
    }

    /// Partitions expressible without interaction: null, A split, B split.
    pub fn is_main_effect_only(&self) -> bool {
        matches!(self.0, [0, 0, 0, 0] | [0, 0, 1, 1] | [0, 1, 0, 1])
    }

    pub fn label(&self) -> String {
        let mut s = String::new();
        for block in 0..self.n_blocks() as u8 {
            s.push('{');
            let mut first = true;
            for (c, &(a, b)) in CELLS.iter().enumerate() {
                if self.0[c] == block {
                    if !first {
                        s.push(' ');
                    }
                    let _ = write!(s, "{a}{b}");
                    first = false;
                }
            }
            s.push('}');
        }
        s
    }
}

/// All 15 partitions of a 4-element set, in lexicographic order of their
/// restricted-growth strings.
pub fn cell_partitions() -> Vec<CellPartition> {
    let mut out = Vec::new();
    for b1 in 0..=1u8 {
        for b2 in 0..=b1 + 1 {
            let m2 = b1.max(b2);
            for b3 in 0..=m2 + 1 {
                out.push(CellPartition([0, b1, b2, b3]));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelIndex {
    /// Inclusion bits; bit `k` set means covariate `k + 1` is in the model.
    Subset(u32),
    Pattern(CellPartition),
    Additive,
}

/// An interaction column that may only enter with both of its parents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub column: usize,
    pub parents: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceKind {
    Subsets { interactions: Vec<Interaction> },
    TwoFactor,
}

#[derive(Debug, Clone)]
pub struct ModelSpace {
    kind: SpaceKind,
    covariate_names: Vec<String>,
    models: Vec<ModelIndex>,
}

/// Enumerates subsets of `k` generically named covariates `X1..Xk`.
pub fn enumerate_subsets(k: usize, hierarchy: &[Interaction]) -> Result<ModelSpace> {
    let names = (1..=k).map(|i| format!("X{i}")).collect();
    ModelSpace::subsets(names, hierarchy)
}

/// The 16-model cell-mean pattern space for two binary factors.
pub fn enumerate_two_factor_patterns(factor_a: &str, factor_b: &str) -> ModelSpace {
    ModelSpace::two_factor(factor_a, factor_b)
}

impl ModelSpace {
    pub fn subsets(names: Vec<String>, hierarchy: &[Interaction]) -> Result<Self> {
        let k = names.len();
        if k == 0 || k > MAX_SUBSET_COVARIATES {
            return Err(Error::ModelSpace(format!(
                "covariate count {k} outside 1..={MAX_SUBSET_COVARIATES}"
            )));
        }
        for it in hierarchy {
            let (p, q) = it.parents;
            if it.column >= k || p >= k || q >= k || p == q || p == it.column || q == it.column {
                return Err(Error::ModelSpace(format!(
                    "interaction column {} references invalid parents ({p}, {q})",
                    it.column
                )));
            }
        }
        let mut gammas: Vec<u32> = (0..(1u32 << k))
            .filter(|&g| {
                hierarchy.iter().all(|it| {
                    g & (1 << it.column) == 0
                        || (g & (1 << it.parents.0) != 0 && g & (1 << it.parents.1) != 0)
                })
            })
            .collect();
        gammas.sort_by_key(|&g| (g.count_ones(), g));
        Ok(Self {
            kind: SpaceKind::Subsets {
                interactions: hierarchy.to_vec(),
            },
            covariate_names: names,
            models: gammas.into_iter().map(ModelIndex::Subset).collect(),
        })
    }

    pub fn two_factor(factor_a: &str, factor_b: &str) -> Self {
        let null = CellPartition([0, 0, 0, 0]);
        let a_split = CellPartition([0, 0, 1, 1]);
        let b_split = CellPartition([0, 1, 0, 1]);
        let mut interactions: Vec<CellPartition> = cell_partitions()
            .into_iter()
            .filter(|p| !p.is_main_effect_only())
            .collect();
        interactions.sort_by_key(|p| (p.n_blocks(), p.0));
        let mut models = vec![
            ModelIndex::Pattern(null),
            ModelIndex::Pattern(a_split),
            ModelIndex::Pattern(b_split),
            ModelIndex::Additive,
        ];
        models.extend(interactions.into_iter().map(ModelIndex::Pattern));
        Self {
            kind: SpaceKind::TwoFactor,
            covariate_names: vec![factor_a.to_string(), factor_b.to_string()],
            models,
        }
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn models(&self) -> &[ModelIndex] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn null_index(&self) -> usize {
        0
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Number of non-intercept design columns of model `m`.
    pub fn rho(&self, m: usize) -> usize {
        match self.models[m] {
            ModelIndex::Subset(g) => g.count_ones() as usize,
            ModelIndex::Pattern(p) => p.n_blocks() - 1,
            ModelIndex::Additive => 2,
        }
    }

    pub fn label(&self, m: usize) -> String {
        match self.models[m] {
            ModelIndex::Subset(g) => (0..self.covariate_names.len())
                .map(|k| if g & (1 << k) != 0 { '1' } else { '0' })
                .collect(),
            ModelIndex::Pattern(p) => p.label(),
            ModelIndex::Additive => "additive".to_string(),
        }
    }

    /// Human-readable term list, e.g. `s+g` or `s*g pattern {00 01}{10}{11}`.
    pub fn describe(&self, m: usize) -> String {
        match self.models[m] {
            ModelIndex::Subset(0) => "null".into(),
            ModelIndex::Subset(g) => self
                .covariate_names
                .iter()
                .enumerate()
                .filter(|(k, _)| g & (1 << k) != 0)
                .map(|(_, n)| n.as_str())
                .collect::<Vec<_>>()
                .join("+"),
            ModelIndex::Pattern(p) => format!("pattern {}", p.label()),
            ModelIndex::Additive => self.covariate_names.join("+"),
        }
    }

    /// Design matrix (intercept first) of model `m`.
    ///
    /// `columns` holds the candidate covariate columns in `covariate_names`
    /// order; for a two-factor space these are the two 0/1 factor columns.
    pub fn design(&self, m: usize, columns: &[&[f64]]) -> Result<DMatrix<f64>> {
        if columns.len() != self.covariate_names.len() {
            return Err(Error::Dimension(format!(
                "{} covariate columns for a space over {}",
                columns.len(),
                self.covariate_names.len()
            )));
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension("covariate columns differ in length".into()));
        }
        let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
        match self.models[m] {
            ModelIndex::Subset(g) => {
                for (k, col) in columns.iter().enumerate() {
                    if g & (1 << k) != 0 {
                        cols.push(col.to_vec());
                    }
                }
            }
            ModelIndex::Additive => {
                cols.push(columns[0].to_vec());
                cols.push(columns[1].to_vec());
            }
            ModelIndex::Pattern(p) => {
                let cells = cell_index(columns[0], columns[1])?;
                for block in 1..p.n_blocks() as u8 {
                    cols.push(
                        cells
                            .iter()
                            .map(|&c| if p.0[c] == block { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
            }
        }
        Ok(DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]))
    }

    pub fn involvement(&self) -> CovariateInvolvement {
        involvement(self)
    }

    /// Writes one line per model: index, label, rho, description, then one
    /// 0/1 column per involvement term.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let inv = self.involvement();
        write!(w, "index,label,rho,terms")?;
        for t in &inv.terms {
            write!(w, ",{t}")?;
        }
        writeln!(w, ",interaction")?;
        for m in 0..self.len() {
            write!(w, "{m},{},{},{}", self.label(m), self.rho(m), self.describe(m))?;
            for f in &inv.flags[m] {
                write!(w, ",{}", u8::from(*f))?;
            }
            writeln!(w, ",{}", u8::from(inv.interaction[m]))?;
        }
        Ok(())
    }
}

fn cell_index(a: &[f64], b: &[f64]) -> Result<Vec<usize>> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x, y) {
            (x, y) if (x == 0.0 || x == 1.0) && (y == 0.0 || y == 1.0) => {
                Ok(2 * x as usize + y as usize)
            }
            _ => Err(Error::InvalidArgument(
                "two-factor pattern space requires 0/1 coded factors".into(),
            )),
        })
        .collect()
}

/// Which terms each model involves.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateInvolvement {
    /// Term names. Subset spaces: one per covariate column. Two-factor
    /// spaces: `a`, `b`, `a:b`, `a_main`, `b_main`.
    pub terms: Vec<String>,
    /// `flags[m][t]`: model `m` involves term `t`.
    pub flags: Vec<Vec<bool>>,
    /// Model includes an interaction column or interaction pattern.
    pub interaction: Vec<bool>,
}

impl CovariateInvolvement {
    pub fn term_index(&self, name: &str) -> Result<usize> {
        self.terms
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| Error::UnknownCovariate(name.to_string()))
    }

    pub fn involves(&self, m: usize, term: usize) -> bool {
        self.flags[m][term]
    }
}

/// Involvement flags.
///
/// In subset spaces, covariate `k` is involved iff `gamma_k = 1`. In
/// two-factor spaces, factor A is involved when some pair of cells differing
/// only in A lies in different blocks; `a:b` marks the 12 interaction
/// partitions; `a_main` requires an A difference at both levels of B (or the
/// additive model), which separates main-effect involvement from
/// interaction-only patterns.
pub fn involvement(space: &ModelSpace) -> CovariateInvolvement {
    match &space.kind {
        SpaceKind::Subsets { interactions } => {
            let k = space.covariate_names.len();
            let flags = space
                .models
                .iter()
                .map(|m| match m {
                    ModelIndex::Subset(g) => (0..k).map(|i| g & (1 << i) != 0).collect(),
                    _ => unreachable!("subset space holds subset models"),
                })
                .collect();
            let interaction = space
                .models
                .iter()
                .map(|m| match m {
                    ModelIndex::Subset(g) => interactions.iter().any(|it| g & (1 << it.column) != 0),
                    _ => false,
                })
                .collect();
            CovariateInvolvement {
                terms: space.covariate_names.clone(),
                flags,
                interaction,
            }
        }
        SpaceKind::TwoFactor => {
            let a = &space.covariate_names[0];
            let b = &space.covariate_names[1];
            let terms = vec![
                a.clone(),
                b.clone(),
                format!("{a}:{b}"),
                format!("{a}_main"),
                format!("{b}_main"),
            ];
            let mut flags = Vec::with_capacity(space.len());
            let mut interaction = Vec::with_capacity(space.len());
            for m in &space.models {
                let row = match m {
                    ModelIndex::Additive => vec![true, true, false, true, true],
                    ModelIndex::Pattern(p) => {
                        let inter = !p.is_main_effect_only();
                        vec![
                            p.splits_a(),
                            p.splits_b(),
                            inter,
                            p.a_at_all_levels(),
                            p.b_at_all_levels(),
                        ]
                    }
                    ModelIndex::Subset(_) => unreachable!("pattern space holds pattern models"),
                };
                interaction.push(row[2]);
                flags.push(row);
            }
            CovariateInvolvement {
                terms,
                flags,
                interaction,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// Bell-number oracle: all maps from 4 cells to block labels, canonicalised.
    fn brute_force_partitions() -> HashSet<[u8; 4]> {
        let mut out = HashSet::new();
        for code in 0..256u32 {
            let raw = [
                (code & 3) as u8,
                ((code >> 2) & 3) as u8,
                ((code >> 4) & 3) as u8,
                ((code >> 6) & 3) as u8,
            ];
            let mut relabel = [u8::MAX; 4];
            let mut next = 0;
            let mut canon = [0u8; 4];
            for c in 0..4 {
                let r = raw[c] as usize;
                if relabel[r] == u8::MAX {
                    relabel[r] = next;
                    next += 1;
                }
                canon[c] = relabel[r];
            }
            out.insert(canon);
        }
        out
    }

    #[test]
    fn subset_counts() {
        for k in 1..=10 {
            let s = enumerate_subsets(k, &[]).unwrap();
            assert_eq!(s.len(), 1 << k);
            let distinct: HashSet<_> = s.models().iter().collect();
            assert_eq!(distinct.len(), 1 << k);
            assert_eq!(s.models()[0], ModelIndex::Subset(0));
        }
        assert_eq!(enumerate_subsets(5, &[]).unwrap().len(), 32);
        let k1 = enumerate_subsets(1, &[]).unwrap();
        assert_eq!(k1.models(), &[ModelIndex::Subset(0), ModelIndex::Subset(1)]);
    }

    #[test]
    fn subset_ordering_is_size_then_binary_value() {
        let s = enumerate_subsets(3, &[]).unwrap();
        let labels: Vec<String> = (0..s.len()).map(|m| s.label(m)).collect();
        assert_eq!(labels, ["000", "100", "010", "001", "110", "101", "011", "111"]);
    }

    #[test]
    fn hierarchy_filter_matches_brute_force() {
        let it = Interaction {
            column: 2,
            parents: (0, 1),
        };
        let s = enumerate_subsets(3, &[it]).unwrap();
        let expected: Vec<u32> = (0..8u32)
            .filter(|g| g & 4 == 0 || (g & 1 != 0 && g & 2 != 0))
            .collect();
        assert_eq!(s.len(), 5);
        let got: HashSet<u32> = s
            .models()
            .iter()
            .map(|m| match m {
                ModelIndex::Subset(g) => *g,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(got, expected.into_iter().collect());
        let inv = s.involvement();
        assert_eq!(inv.interaction, vec![false, false, false, false, true]);
    }

    #[test]
    fn invalid_spaces_rejected() {
        assert!(enumerate_subsets(0, &[]).is_err());
        assert!(enumerate_subsets(21, &[]).is_err());
        let bad = Interaction {
            column: 2,
            parents: (0, 5),
        };
        assert!(enumerate_subsets(3, &[bad]).is_err());
    }

    #[test]
    fn partitions_match_exhaustive_oracle() {
        let oracle = brute_force_partitions();
        assert_eq!(oracle.len(), 15);
        let ours: HashSet<[u8; 4]> = cell_partitions().iter().map(|p| p.0).collect();
        assert_eq!(ours, oracle);
        let non_interaction = oracle
            .iter()
            .filter(|p| CellPartition(**p).is_main_effect_only())
            .count();
        assert_eq!(non_interaction, 3);
    }

    #[test]
    fn two_factor_space_has_sixteen_models() {
        let s = enumerate_two_factor_patterns("s", "g");
        assert_eq!(s.len(), 16);
        let inv = s.involvement();
        assert_eq!(inv.interaction.iter().filter(|&&f| f).count(), 12);
        assert_eq!(s.models()[0], ModelIndex::Pattern(CellPartition([0, 0, 0, 0])));
        assert!(inv.flags[0].iter().all(|f| !f));
        assert_eq!(s.rho(0), 0);
    }

    #[test]
    fn pattern_involvement_examples() {
        let s = enumerate_two_factor_patterns("s", "g");
        let inv = s.involvement();
        let find = |p: [u8; 4]| {
            s.models()
                .iter()
                .position(|m| *m == ModelIndex::Pattern(CellPartition(p)))
                .unwrap()
        };
        // A split only
        assert_eq!(inv.flags[find([0, 0, 1, 1])], vec![true, false, false, true, false]);
        // {00,01,10} vs {11}: checked against every pair of cells that
        // differ in exactly one factor
        let m = find([0, 0, 0, 1]);
        let p = [0u8, 0, 0, 1];
        let mut a = false;
        let mut b = false;
        for c1 in 0..4 {
            for c2 in 0..4 {
                let (a1, b1) = CELLS[c1];
                let (a2, b2) = CELLS[c2];
                if p[c1] != p[c2] {
                    a |= a1 != a2 && b1 == b2;
                    b |= b1 != b2 && a1 == a2;
                }
            }
        }
        assert!(a && b);
        assert!(inv.flags[m][0] && inv.flags[m][1] && inv.flags[m][2]);
        // interaction-only pattern: no main effect
        assert!(!inv.flags[m][3] && !inv.flags[m][4]);
    }

    #[test]
    fn subset_involvement_is_gamma() {
        let s = enumerate_subsets(3, &[]).unwrap();
        let inv = s.involvement();
        let m = s
            .models()
            .iter()
            .position(|m| *m == ModelIndex::Subset(0b101))
            .unwrap();
        assert_eq!(inv.flags[m], vec![true, false, true]);
    }

    #[test]
    fn pattern_designs_full_rank_with_populated_cells() {
        let a = [0.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let b = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let s = enumerate_two_factor_patterns("s", "g");
        for m in 0..s.len() {
            let x = s.design(m, &[&a, &b]).unwrap();
            assert_eq!(x.ncols(), s.rho(m) + 1);
            let rank = x.clone().svd(false, false).rank(1e-9);
            assert_eq!(rank, x.ncols(), "model {}", s.label(m));
        }
        let null = s.design(0, &[&a, &b]).unwrap();
        assert_eq!(null.ncols(), 1);
    }

    #[test]
    fn model_dump_has_header_and_rows() {
        let s = enumerate_two_factor_patterns("s", "g");
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.starts_with("index,label,rho,terms,s,g,s:g,s_main,g_main,interaction"));
    }
}
