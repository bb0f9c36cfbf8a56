//! Weighted least-squares regression problems built from event sequences.
//!
//! Each observed event `(t_i, d_i)` contributes one row. The label is the
//! counting process `N_{d_i}(t_i)` (events of dimension `d_i` up to and
//! including `t_i`) and the row is the time integral of the linear
//! predictor of `lambda_{d_i}` on `[0, t_i]`, so that `X theta` is the
//! compensator. Labels and rows are scaled by `1 / sqrt(L)` with `L` the
//! total number of events, and rows carry weight `1 / t_i`.
//!
//! Parameter layout (`D` = dimension, `M` = number of sources):
//!
//! * single and super: `[mu (D); vec(A) (D*D)]`
//! * multi: `[mu^1 (D); ...; mu^M (D); vec(A) (D*D)]`
//!
//! `vec(A)` is column-major: `a[d][d']` sits at offset `d + D * d'` of the
//! infectivity block.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{superpose, EventSequence};

/// How the parameter vector of a bundle is laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Layout {
    Single,
    /// One exogenous block per source, in the order given.
    Multi { sources: Vec<SourceKey> },
    /// Groups of superposed sequences with their sizes.
    Super { group_sizes: Vec<usize> },
}

impl Layout {
    pub fn name(&self) -> &'static str {
        match self {
            Layout::Single => "single",
            Layout::Multi { .. } => "multi",
            Layout::Super { .. } => "super",
        }
    }

    /// Number of exogenous blocks of length `D`.
    pub fn mu_blocks(&self) -> usize {
        match self {
            Layout::Multi { sources } => sources.len(),
            _ => 1,
        }
    }

    pub fn n_params(&self, dim: usize) -> usize {
        dim * (self.mu_blocks() + dim)
    }
}

/// Identity of a source in the multi layout. Tagged sequences share a
/// block per tag; untagged sequences each get their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKey {
    Tagged(u64),
    Untagged(usize),
}

/// Column of `a[d][d']` in a layout with `mu_blocks` exogenous blocks.
pub fn a_column(dim: usize, mu_blocks: usize, d: usize, d_prime: usize) -> usize {
    dim * mu_blocks + d + dim * d_prime
}

/// Which sequence and event a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIndex {
    pub seq: usize,
    pub event: usize,
}

/// Labels, sparse design rows and diagonal weights of one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionBundle {
    layout: Layout,
    dim: usize,
    decay: f64,
    n_cols: usize,
    labels: Vec<f64>,
    weights: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    index: Vec<RowIndex>,
}

impl RegressionBundle {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Kernel decay the features were integrated with.
    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn index(&self) -> &[RowIndex] {
        &self.index
    }

    /// Nonzero columns and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.n_rows(), self.n_cols);
        for r in 0..self.n_rows() {
            let (c, v) = self.row(r);
            for (&c, &v) in c.iter().zip(v) {
                x[(r, c)] = v;
            }
        }
        x
    }

    /// `sum_r (w_r (N_r - x_r . theta))^2`.
    pub fn loss(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.n_cols, "parameter length does not match layout");
        (0..self.n_rows())
            .map(|r| {
                let (c, v) = self.row(r);
                let fit: f64 = c.iter().zip(v).map(|(&c, &v)| v * theta[c]).sum();
                let res = self.weights[r] * (self.labels[r] - fit);
                res * res
            })
            .sum()
    }

    /// Weighted normal equations `(X~'X~, X~'N~)` with `X~ = W X`.
    pub fn normal_equations(&self) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.n_cols;
        let mut gram = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        for r in 0..self.n_rows() {
            let (c, v) = self.row(r);
            let w2 = self.weights[r] * self.weights[r];
            for (i, (&ci, &vi)) in c.iter().zip(v).enumerate() {
                rhs[ci] += w2 * vi * self.labels[r];
                for (&cj, &vj) in c[..=i].iter().zip(v) {
                    gram[(ci, cj)] += w2 * vi * vj;
                }
            }
        }
        gram.fill_upper_triangle_with_lower_triangle();
        (gram, rhs)
    }

    /// Rows grouped so that no column is shared between groups. Each group
    /// is returned as (rows, columns), both ascending.
    pub fn independent_blocks(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut parent: Vec<usize> = (0..self.n_cols).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for r in 0..self.n_rows() {
            let (c, _) = self.row(r);
            if let Some(&first) = c.first() {
                let root = find(&mut parent, first);
                for &other in &c[1..] {
                    let o = find(&mut parent, other);
                    if o != root {
                        parent[o] = root;
                    }
                }
            }
        }
        let mut blocks: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for c in 0..self.n_cols {
            let root = find(&mut parent, c);
            blocks.entry(root).or_default().1.push(c);
        }
        for r in 0..self.n_rows() {
            let (c, _) = self.row(r);
            if let Some(&first) = c.first() {
                let root = find(&mut parent, first);
                blocks.get_mut(&root).expect("root present").0.push(r);
            }
        }
        blocks.into_values().collect()
    }

    /// Write a plain-text dump, one row per line:
    ///
    /// ```text
    /// # superhawkes bundle v1
    /// layout <single|multi|super> dim <D> rows <L> cols <P>
    /// <seq> <event> <label> <weight> <col>:<value> ...
    /// ```
    ///
    /// Indices are 0-based; values use Rust's shortest round-trip formatting.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# superhawkes bundle v1")?;
        writeln!(
            out,
            "layout {} dim {} rows {} cols {}",
            self.layout.name(),
            self.dim,
            self.n_rows(),
            self.n_cols
        )?;
        for r in 0..self.n_rows() {
            let ix = self.index[r];
            write!(out, "{} {} {:?} {:?}", ix.seq, ix.event, self.labels[r], self.weights[r])?;
            let (c, v) = self.row(r);
            for (c, v) in c.iter().zip(v) {
                write!(out, " {c}:{v:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    fn scale_rows(&mut self, rows: std::ops::Range<usize>, factor: f64) {
        for r in rows {
            self.labels[r] *= factor;
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            self.vals[span].iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Integral over `[0, t]` of the predictor of `lambda_d`, over the events of
/// `seq` strictly before `t`. Returns the dense single-layout row of length
/// `D (1 + D)`.
pub fn compensator_features(seq: &EventSequence, w: f64, t: f64, d: usize) -> Result<Vec<f64>> {
    let dim = seq.dim();
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("feature time must be positive, got {t}")));
    }
    if d >= dim {
        return Err(Error::InvalidParameter(format!("dimension {} outside 1..={dim}", d + 1)));
    }
    check_decay(w)?;
    let mut row = vec![0.0; dim * (1 + dim)];
    row[d] = t;
    let n_prior = seq.events().partition_point(|e| e.t < t);
    for (d_prime, v) in kernel_integrals(&seq.events()[..n_prior], w, t, dim).into_iter().enumerate() {
        row[a_column(dim, 1, d, d_prime)] = v;
    }
    Ok(row)
}

fn check_decay(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("decay must be positive, got {w}")))
    }
}

// sum over prior events of dimension d' of (1 - exp(-w (t - t_j))) / w.
pub(crate) fn kernel_integrals(prior: &[crate::sequence::Event], w: f64, t: f64, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for e in prior {
        acc[e.dim] += -(-w * (t - e.t)).exp_m1() / w;
    }
    acc
}

fn check_sequences(seqs: &[&EventSequence]) -> Result<(usize, usize)> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::EmptyData("no sequences to build a regression from".into()))?;
    let dim = first.dim();
    if let Some(bad) = seqs.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "sequences of dimension {dim} and {} mixed",
            bad.dim()
        )));
    }
    let total: usize = seqs.iter().map(|s| s.len()).sum();
    if total == 0 {
        return Err(Error::EmptyData("sequences contain no events".into()));
    }
    Ok((dim, total))
}

/// Events closer than this relative gap are tie-broken copies of one instant
/// (see [`EventSequence::new`]); labels count them together.
const TIE_RTOL: f64 = 1e-12;

// Shared assembly: `mu_block[k]` picks the exogenous block of sequence k.
fn assemble(seqs: &[&EventSequence], w: f64, layout: Layout, mu_block: &[usize]) -> Result<RegressionBundle> {
    check_decay(w)?;
    let (dim, total) = check_sequences(seqs)?;
    let blocks = layout.mu_blocks();
    let n_cols = layout.n_params(dim);
    let scale = 1.0 / (total as f64).sqrt();

    let mut bundle = RegressionBundle {
        layout,
        dim,
        decay: w,
        n_cols,
        labels: Vec::with_capacity(total),
        weights: Vec::with_capacity(total),
        row_ptr: Vec::with_capacity(total + 1),
        cols: Vec::with_capacity(total * (dim + 1)),
        vals: Vec::with_capacity(total * (dim + 1)),
        index: Vec::with_capacity(total),
    };
    bundle.row_ptr.push(0);
    for (k, seq) in seqs.iter().enumerate() {
        let events = seq.events();
        let mut counts = vec![0usize; dim];
        for (i, e) in events.iter().enumerate() {
            counts[e.dim] += 1;
            let simultaneous = events[i + 1..]
                .iter()
                .take_while(|later| later.t - e.t <= TIE_RTOL * e.t)
                .filter(|later| later.dim == e.dim)
                .count();
            bundle.labels.push((counts[e.dim] + simultaneous) as f64 * scale);
            bundle.weights.push(1.0 / e.t);
            bundle.index.push(RowIndex { seq: k, event: i });
            bundle.cols.push(mu_block[k] * dim + e.dim);
            bundle.vals.push(e.t * scale);
            for (d_prime, v) in kernel_integrals(&events[..i], w, e.t, dim).into_iter().enumerate() {
                if v != 0.0 {
                    bundle.cols.push(a_column(dim, blocks, e.dim, d_prime));
                    bundle.vals.push(v * scale);
                }
            }
            bundle.row_ptr.push(bundle.cols.len());
        }
    }
    Ok(bundle)
}

/// One Hawkes process for all sequences.
pub fn build_single(seqs: &[EventSequence], w: f64) -> Result<RegressionBundle> {
    let refs: Vec<&EventSequence> = seqs.iter().collect();
    assemble(&refs, w, Layout::Single, &vec![0; refs.len()])
}

/// One exogenous rate vector per source and a shared infectivity matrix.
/// Sources come from the sequences' tags, ordered by tag; untagged
/// sequences follow as individual sources in input order.
pub fn build_multi(seqs: &[EventSequence], w: f64) -> Result<RegressionBundle> {
    let (sources, block) = source_blocks(seqs);
    let refs: Vec<&EventSequence> = seqs.iter().collect();
    assemble(&refs, w, Layout::Multi { sources }, &block)
}

/// Distinct sources of `seqs` and the source position of every sequence.
pub fn source_blocks(seqs: &[EventSequence]) -> (Vec<SourceKey>, Vec<usize>) {
    let keys: Vec<SourceKey> = seqs
        .iter()
        .enumerate()
        .map(|(k, s)| s.source_id().map_or(SourceKey::Untagged(k), SourceKey::Tagged))
        .collect();
    let mut sources = keys.clone();
    sources.sort();
    sources.dedup();
    let block: Vec<usize> = keys
        .iter()
        .map(|k| sources.binary_search(k).expect("key collected above"))
        .collect();
    (sources, block)
}

/// Superpose each group, then build the single-process problem with the
/// rows of a group of `M` sequences scaled by `1 / M`.
pub fn build_super<G: AsRef<[EventSequence]>>(groups: &[G], w: f64) -> Result<RegressionBundle> {
    let merged = groups
        .iter()
        .map(|g| superpose(g.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<usize> = groups.iter().map(|g| g.as_ref().len()).collect();
    let refs: Vec<&EventSequence> = merged.iter().collect();
    let mut bundle = assemble(&refs, w, Layout::Super { group_sizes: sizes.clone() }, &vec![0; refs.len()])?;
    let mut start = 0;
    for (seq, &m) in merged.iter().zip(&sizes) {
        let end = start + seq.len();
        bundle.scale_rows(start..end, 1.0 / m as f64);
        start = end;
    }
    Ok(bundle)
}
