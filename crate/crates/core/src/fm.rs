//! Factorization-machine scoring with attribute interactions, the dual pairwise ranking loss
//! and its analytic gradients.
//!
//! The score of item `v` for a user with embedding `e_u` and stated attributes `P_u` is
//! `e_u·e_v + Σ_{p∈P_u} e_v·e_p`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Catalog;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};

/// Server-held item and attribute embedding tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMatrices {
    pub items: Matrix,
    pub attributes: Matrix,
}

impl GlobalMatrices {
    pub fn new(items: Matrix, attributes: Matrix) -> Result<Self> {
        if items.cols() != attributes.cols() {
            return Err(Error::Shape {
                expected: items.cols(),
                actual: attributes.cols(),
            });
        }
        Ok(Self { items, attributes })
    }

    pub fn zeros(num_items: usize, num_attributes: usize, dim: usize) -> Self {
        Self {
            items: Matrix::zeros(num_items, dim),
            attributes: Matrix::zeros(num_attributes, dim),
        }
    }

    pub fn random<R: Rng + ?Sized>(
        num_items: usize,
        num_attributes: usize,
        dim: usize,
        std: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            items: Matrix::gaussian(num_items, dim, std, rng),
            attributes: Matrix::gaussian(num_attributes, dim, std, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.items.cols()
    }

    pub fn num_items(&self) -> usize {
        self.items.rows()
    }

    pub fn num_attributes(&self) -> usize {
        self.attributes.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.items.is_finite() && self.attributes.is_finite()
    }

    fn check_item(&self, item: usize) -> Result<()> {
        if item >= self.num_items() {
            return Err(Error::Index {
                what: "item",
                index: item,
                limit: self.num_items(),
            });
        }
        Ok(())
    }

    fn check_attributes(&self, attrs: &[usize]) -> Result<()> {
        if let Some(&a) = attrs.iter().find(|&&a| a >= self.num_attributes()) {
            return Err(Error::Index {
                what: "attribute",
                index: a,
                limit: self.num_attributes(),
            });
        }
        Ok(())
    }

    fn check_user(&self, user: &[f64]) -> Result<()> {
        if user.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                actual: user.len(),
            });
        }
        Ok(())
    }

    /// `e_u + Σ_{p∈P_u} e_p`, the vector an item embedding is dotted with.
    pub fn query_vector(&self, user: &[f64], stated: &[usize]) -> Vec<f64> {
        let mut q = user.to_vec();
        for &p in stated {
            axpy(1.0, self.attributes.row(p), &mut q);
        }
        q
    }
}

pub fn score(user: &[f64], item: usize, stated: &[usize], m: &GlobalMatrices) -> Result<f64> {
    m.check_user(user)?;
    m.check_item(item)?;
    m.check_attributes(stated)?;
    Ok(score_unchecked(user, item, stated, m))
}

pub(crate) fn score_unchecked(user: &[f64], item: usize, stated: &[usize], m: &GlobalMatrices) -> f64 {
    let ev = m.items.row(item);
    let mut s = dot(user, ev);
    for &p in stated {
        s += dot(ev, m.attributes.row(p));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceSource {
    /// Negative drawn from all uninteracted items.
    General,
    /// Negative drawn from uninteracted items carrying every stated attribute.
    AttributeMatched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseInstance {
    pub positive: usize,
    pub negative: usize,
    /// Sorted stated attributes used when scoring both items.
    pub stated: Vec<usize>,
    pub source: InstanceSource,
}

impl PairwiseInstance {
    fn check(&self, m: &GlobalMatrices) -> Result<()> {
        m.check_item(self.positive)?;
        m.check_item(self.negative)?;
        m.check_attributes(&self.stated)?;
        if self.positive == self.negative {
            return Err(Error::invalid("positive and negative item coincide"));
        }
        Ok(())
    }
}

/// `-ln σ(d)` without overflow.
pub fn neg_log_sigmoid(d: f64) -> f64 {
    if d > 0.0 {
        (-d).exp().ln_1p()
    } else {
        -d + d.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Rows of a gradient with respect to an embedding table; absent rows are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    pub rows: BTreeMap<usize, Vec<f64>>,
}

impl SparseRows {
    fn row_mut(&mut self, r: usize, dim: usize) -> &mut Vec<f64> {
        self.rows.entry(r).or_insert_with(|| vec![0.0; dim])
    }

    pub fn get(&self, r: usize) -> Option<&[f64]> {
        self.rows.get(&r).map(Vec::as_slice)
    }

    pub fn to_dense(&self, num_rows: usize, dim: usize) -> Matrix {
        let mut out = Matrix::zeros(num_rows, dim);
        for (&r, v) in &self.rows {
            out.row_mut(r).copy_from_slice(v);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmGradients {
    pub user: Vec<f64>,
    pub items: SparseRows,
    pub attributes: SparseRows,
}

fn touched_rows<'a>(
    instances: impl Iterator<Item = &'a PairwiseInstance> + Clone,
) -> (Vec<usize>, Vec<usize>) {
    let mut items: Vec<usize> = instances.clone().flat_map(|i| [i.positive, i.negative]).collect();
    items.sort_unstable();
    items.dedup();
    let mut attrs: Vec<usize> = instances.flat_map(|i| i.stated.iter().copied()).collect();
    attrs.sort_unstable();
    attrs.dedup();
    (items, attrs)
}

/// Dual pairwise ranking loss summed over both instance sets, plus L2 regularization on the
/// user embedding and every item/attribute row the instances touch.
pub fn dual_bpr_loss(
    general: &[PairwiseInstance],
    matched: &[PairwiseInstance],
    user: &[f64],
    m: &GlobalMatrices,
    reg: f64,
) -> Result<f64> {
    m.check_user(user)?;
    if reg < 0.0 {
        return Err(Error::invalid("regularization must be non-negative"));
    }
    let all = general.iter().chain(matched);
    let mut loss = 0.0;
    for inst in all.clone() {
        inst.check(m)?;
        let d = score_unchecked(user, inst.positive, &inst.stated, m)
            - score_unchecked(user, inst.negative, &inst.stated, m);
        loss += neg_log_sigmoid(d);
    }
    if reg > 0.0 {
        let (items, attrs) = touched_rows(all);
        let mut sq = dot(user, user);
        sq += items.iter().map(|&v| dot(m.items.row(v), m.items.row(v))).sum::<f64>();
        sq += attrs
            .iter()
            .map(|&p| dot(m.attributes.row(p), m.attributes.row(p)))
            .sum::<f64>();
        loss += reg * sq;
    }
    Ok(loss)
}

/// Analytic gradient of [`dual_bpr_loss`] with respect to the user embedding and the touched
/// rows of both tables.
pub fn fm_gradients(
    general: &[PairwiseInstance],
    matched: &[PairwiseInstance],
    user: &[f64],
    m: &GlobalMatrices,
    reg: f64,
) -> Result<FmGradients> {
    m.check_user(user)?;
    if reg < 0.0 {
        return Err(Error::invalid("regularization must be non-negative"));
    }
    let dim = m.dim();
    let mut grad = FmGradients {
        user: vec![0.0; dim],
        items: SparseRows::default(),
        attributes: SparseRows::default(),
    };
    let all = general.iter().chain(matched);
    for inst in all.clone() {
        inst.check(m)?;
        let (ev, en) = (m.items.row(inst.positive), m.items.row(inst.negative));
        let q = m.query_vector(user, &inst.stated);
        let d = dot(&q, ev) - dot(&q, en);
        // d/dd of -ln σ(d)
        let g = -sigmoid(-d);

        let diff: Vec<f64> = ev.iter().zip(en).map(|(a, b)| a - b).collect();
        axpy(g, &diff, &mut grad.user);
        axpy(g, &q, grad.items.row_mut(inst.positive, dim));
        axpy(-g, &q, grad.items.row_mut(inst.negative, dim));
        for &p in &inst.stated {
            axpy(g, &diff, grad.attributes.row_mut(p, dim));
        }
    }
    if reg > 0.0 {
        axpy(2.0 * reg, user, &mut grad.user);
        let (items, attrs) = touched_rows(all);
        for v in items {
            axpy(2.0 * reg, m.items.row(v), grad.items.row_mut(v, dim));
        }
        for p in attrs {
            axpy(2.0 * reg, m.attributes.row(p), grad.attributes.row_mut(p, dim));
        }
    }
    Ok(grad)
}

/// Which attribute set plays the role of the stated preferences during sampling.
#[derive(Debug, Clone, Copy)]
pub enum StatedAttributes<'a> {
    /// Each positive item's own attribute set.
    PositiveItem,
    Fixed(&'a [usize]),
}

const REJECTION_TRIES: usize = 64;

/// Uniform draw from `{v : !interacted(v) && accept(v)}`, or `None` when the pool is empty.
fn draw_negative<R: Rng + ?Sized>(
    num_items: usize,
    history: &[usize],
    accept: impl Fn(usize) -> bool,
    rng: &mut R,
) -> Option<usize> {
    let ok = |v: usize| history.binary_search(&v).is_err() && accept(v);
    for _ in 0..REJECTION_TRIES {
        let v = rng.gen_range(0..num_items);
        if ok(v) {
            return Some(v);
        }
    }
    let pool: Vec<usize> = (0..num_items).filter(|&v| ok(v)).collect();
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.gen_range(0..pool.len())])
    }
}

/// Draws `n_per_positive` general and attribute-matched pairs for each item in the sorted
/// `history`. A positive without an attribute-matched negative contributes general pairs only.
pub fn sample_instances<R: Rng + ?Sized>(
    history: &[usize],
    catalog: &Catalog,
    stated: StatedAttributes<'_>,
    n_per_positive: usize,
    rng: &mut R,
) -> (Vec<PairwiseInstance>, Vec<PairwiseInstance>) {
    debug_assert!(history.windows(2).all(|w| w[0] < w[1]));
    let mut general = Vec::new();
    let mut matched = Vec::new();
    for &pos in history {
        let attrs: Vec<usize> = match stated {
            StatedAttributes::PositiveItem => catalog.attributes(pos).to_vec(),
            StatedAttributes::Fixed(a) => a.to_vec(),
        };
        for _ in 0..n_per_positive {
            if let Some(neg) = draw_negative(catalog.num_items, history, |_| true, rng) {
                general.push(PairwiseInstance {
                    positive: pos,
                    negative: neg,
                    stated: attrs.clone(),
                    source: InstanceSource::General,
                });
            }
            if let Some(neg) =
                draw_negative(catalog.num_items, history, |v| catalog.has_all(v, &attrs), rng)
            {
                matched.push(PairwiseInstance {
                    positive: pos,
                    negative: neg,
                    stated: attrs.clone(),
                    source: InstanceSource::AttributeMatched,
                });
            }
        }
    }
    (general, matched)
}
