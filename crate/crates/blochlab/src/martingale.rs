//! The interval martingale induced by a half-plane Bloch function: node
//! values are horizontal means over n-adic subintervals of [0, 1] at a
//! common small height, local variances describe the martingale increments,
//! and box averages furnish the comparison quantity.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::BlochFunction;
use crate::error::{Error, Result};
use crate::hyperbolic::Domain;
use crate::quad::simpson_adaptive_complex;
use crate::transforms::{box_average, NAdicBox};

#[derive(Clone, Copy, Debug)]
pub struct MartingaleNode {
    pub value: Complex64,
    /// Two-height consistency check: |B_I(h0) - B_I(h0/2)|. The limit the
    /// node approximates is the h -> 0+ mean; no rate is assumed, so the
    /// discrepancy is recorded rather than extrapolated.
    pub check: f64,
}

/// Complete n-adic tree of interval means over [0, 1].
///
/// All nodes are evaluated at one common height h0, so the martingale
/// identity B_I = (1/n) sum of children holds up to quadrature tolerance
/// alone.
#[derive(Clone, Debug)]
pub struct MartingaleTree {
    n: u32,
    depth: u32,
    h0: f64,
    /// levels[l] holds the n^l nodes of level l in j-order.
    levels: Vec<Vec<MartingaleNode>>,
}

#[derive(Serialize, Deserialize)]
struct TreeRecord {
    n: u32,
    depth: u32,
    h0: f64,
    nodes: Vec<(u32, u64, f64, f64, f64)>,
}

impl MartingaleTree {
    pub fn base(&self) -> u32 {
        self.n
    }
    pub fn depth(&self) -> u32 {
        self.depth
    }
    pub fn height(&self) -> f64 {
        self.h0
    }

    pub fn node(&self, level: u32, j: u64) -> Result<&MartingaleNode> {
        self.levels
            .get(level as usize)
            .and_then(|l| l.get(j as usize))
            .ok_or_else(|| Error::domain(format!("no node at level {level}, index {j}")))
    }

    pub fn level(&self, level: u32) -> Result<&[MartingaleNode]> {
        self.levels
            .get(level as usize)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::domain(format!("tree has no level {level}")))
    }

    pub fn to_json(&self) -> String {
        let mut nodes = Vec::new();
        for (l, row) in self.levels.iter().enumerate() {
            for (j, node) in row.iter().enumerate() {
                nodes.push((l as u32, j as u64, node.value.re, node.value.im, node.check));
            }
        }
        serde_json::to_string(&TreeRecord {
            n: self.n,
            depth: self.depth,
            h0: self.h0,
            nodes,
        })
        .expect("tree record serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let rec: TreeRecord = serde_json::from_str(json)?;
        let mut levels: Vec<Vec<MartingaleNode>> = (0..=rec.depth)
            .map(|l| {
                vec![
                    MartingaleNode { value: Complex64::new(0.0, 0.0), check: 0.0 };
                    (rec.n as usize).pow(l)
                ]
            })
            .collect();
        for (l, j, re, im, check) in rec.nodes {
            let slot = levels
                .get_mut(l as usize)
                .and_then(|row| row.get_mut(j as usize))
                .ok_or_else(|| Error::domain(format!("node ({l}, {j}) outside tree shape")))?;
            *slot = MartingaleNode { value: Complex64::new(re, im), check };
        }
        Ok(MartingaleTree { n: rec.n, depth: rec.depth, h0: rec.h0, levels })
    }
}

/// How node means are integrated over their intervals.
#[derive(Clone, Copy, Debug)]
enum MeanRule {
    /// Adaptive Simpson to an absolute tolerance (per unit length).
    Adaptive(f64),
    /// Fixed composite Gauss-Legendre panels; the right choice when the
    /// evaluator itself carries quadrature noise that adaptive refinement
    /// would chase forever.
    FixedGauss(usize),
}

const GL4_NODES: [f64; 4] = [
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.34785484513745385,
    0.6521451548625461,
    0.6521451548625461,
    0.34785484513745385,
];

fn interval_mean(b: &BlochFunction, x0: f64, x1: f64, h: f64, rule: MeanRule) -> Result<Complex64> {
    match rule {
        MeanRule::Adaptive(tol) => {
            let f = |x: f64| b.eval(Complex64::new(x, h));
            let integral = simpson_adaptive_complex(&f, x0, x1, tol * (x1 - x0))?;
            Ok(integral / (x1 - x0))
        }
        MeanRule::FixedGauss(panels) => {
            let hp = (x1 - x0) / panels as f64;
            let vals: Vec<Complex64> = (0..panels * 4)
                .into_par_iter()
                .map(|idx| {
                    let (p, q) = (idx / 4, idx % 4);
                    let x = x0 + (p as f64 + 0.5 * (1.0 + GL4_NODES[q])) * hp;
                    GL4_WEIGHTS[q] * 0.5 * hp * b.eval(Complex64::new(x, h))
                })
                .collect();
            Ok(crate::quad::pairwise_sum_complex(&vals) / (x1 - x0))
        }
    }
}

fn build_with_rule(
    b: &BlochFunction,
    n: u32,
    depth: u32,
    h0: f64,
    rule: MeanRule,
) -> Result<MartingaleTree> {
    if b.domain() != Domain::HalfPlane {
        return Err(Error::domain("the interval martingale expects a half-plane function"));
    }
    if n < 2 {
        return Err(Error::domain(format!("base {n} must be >= 2")));
    }
    if depth < 1 {
        return Err(Error::domain("depth must be >= 1"));
    }
    let finest = (n as f64).powi(-(depth as i32));
    if !(h0 > 0.0 && h0 < finest) {
        return Err(Error::domain(format!(
            "height h0 = {h0} must lie in (0, n^-depth = {finest})"
        )));
    }
    let mut levels = Vec::with_capacity(depth as usize + 1);
    for l in 0..=depth {
        let count = (n as usize).pow(l);
        let len = 1.0 / count as f64;
        let row: Result<Vec<MartingaleNode>> = (0..count)
            .into_par_iter()
            .map(|j| {
                let (x0, x1) = (j as f64 * len, (j as f64 + 1.0) * len);
                let v = interval_mean(b, x0, x1, h0, rule)?;
                let v_half = interval_mean(b, x0, x1, h0 / 2.0, rule)?;
                Ok(MartingaleNode { value: v, check: (v - v_half).norm() })
            })
            .collect();
        levels.push(row?);
    }
    Ok(MartingaleTree { n, depth, h0, levels })
}

/// Builds the complete tree of interval means at the common height h0,
/// with a two-height consistency check per node.
pub fn build_martingale(b: &BlochFunction, n: u32, depth: u32, h0: f64) -> Result<MartingaleTree> {
    build_with_rule(b, n, depth, h0, MeanRule::Adaptive(1e-10))
}

/// Same tree, but with fixed Gauss-Legendre panels per node. Meant for
/// evaluators that are themselves quadratures (transform-built functions),
/// whose noise floor defeats adaptive refinement.
pub fn build_martingale_gauss(
    b: &BlochFunction,
    n: u32,
    depth: u32,
    h0: f64,
    panels: usize,
) -> Result<MartingaleTree> {
    build_with_rule(b, n, depth, h0, MeanRule::FixedGauss(panels.max(1)))
}

/// Local variance at a node: (1/n) sum_j |B_child_j - B_I|^2.
pub fn local_variance(tree: &MartingaleTree, level: u32, j: u64) -> Result<f64> {
    if level + 1 > tree.depth {
        return Err(Error::domain(format!(
            "node at level {level} is a leaf of a depth-{} tree",
            tree.depth
        )));
    }
    let parent = tree.node(level, j)?.value;
    let children = tree.level(level + 1)?;
    let n = tree.n as u64;
    let mut acc = 0.0;
    for c in 0..n {
        let idx = (j * n + c) as usize;
        acc += (children[idx].value - parent).norm_sqr();
    }
    Ok(acc / tree.n as f64)
}

/// Minimum and maximum of var_I B / log n over all intervals of a level.
pub fn variance_extremes(tree: &MartingaleTree, level: u32) -> Result<(f64, f64)> {
    if level >= tree.depth {
        return Err(Error::domain(format!(
            "level {level} has no children in a depth-{} tree",
            tree.depth
        )));
    }
    let log_n = (tree.n as f64).ln();
    let count = (tree.n as u64).pow(level);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..count {
        let v = local_variance(tree, level, j)? / log_n;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// |var_I B / log n - box average over the box of I|: the discrepancy the
/// O(1/sqrt(log n)) comparison controls. I is the n-adic interval with
/// index (j, k); the height must resolve its children (h0 < n^{-k-1}).
pub fn compare_box_variance(b: &BlochFunction, n: u32, j: i64, k: i32, h0: f64) -> Result<f64> {
    if b.domain() != Domain::HalfPlane {
        return Err(Error::domain("the comparison expects a half-plane function"));
    }
    let box_ = NAdicBox::new(n, j, k)?;
    let (x0, _x1) = box_.interval();
    let child_len = box_.len() / n as f64;
    if !(h0 > 0.0 && h0 < child_len) {
        return Err(Error::domain(format!(
            "height h0 = {h0} must lie below the child scale {child_len}"
        )));
    }
    let rule = MeanRule::Adaptive(1e-10);
    let parent = interval_mean(b, x0, x0 + box_.len(), h0, rule)?;
    let mut var = 0.0;
    for c in 0..n {
        let cx0 = x0 + c as f64 * child_len;
        let child = interval_mean(b, cx0, cx0 + child_len, h0, rule)?;
        var += (child - parent).norm_sqr();
    }
    var /= n as f64;
    let avg = box_average(b, box_, 1e-7)?;
    Ok((var / (n as f64).ln() - avg).abs())
}
