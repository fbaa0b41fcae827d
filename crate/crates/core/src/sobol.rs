//! Sobol decomposition of a set function over binary inclusion variables.
//!
//! A seed set of `m` candidates induces `2^m` inclusion patterns. With every pattern
//! equally likely, the spread `Y` becomes a function of `m` independent Bernoulli(1/2)
//! inputs and its variance splits into first-order, interaction and total effects.
//!
//! The closed forms used here only need sums over the table:
//!
//! ```text
//! S_i      = (Σ_{Ω~i} (Y[Ω+i] - Y[Ω]))²  / (4^m · Var Y)
//! S_Ψ      = Σ_{x ⊆ Ψ} (2^{s-m} Σ_{Ω~Ψ} Y[x ∪ Ω] - E Y)² / (2^s · Var Y)
//! S^(H)_Ψ  = S_Ψ - Σ_{i∈Ψ} S_i - Σ_{ζ⊊Ψ, |ζ|≥2} S^(H)_ζ
//! S^(T)_i  = Σ_{Ω~i} (Y[Ω+i] - Y[Ω])²  / (2^{m+1} · Var Y)
//! ```
//!
//! [`definitional`] evaluates the same quantities from conditional means and
//! variances, and [`anova_oracle`] builds every ANOVA term by Möbius inversion.
//! Neither shares code with the closed forms.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{estimate_spread, DiffusionConfig, SpreadEstimate};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Hard cap on the number of inclusion variables.
pub const MAX_WIDTH: usize = 32;
/// Table widths above this log a warning; `2^m` estimates get expensive quickly.
pub const WARN_WIDTH: usize = 20;
/// Width limit of [`anova_oracle`].
pub const ORACLE_WIDTH: usize = 10;

/// Inclusion pattern: bit `i` set means candidate `i` is seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    pub fn singleton(i: usize) -> SubsetMask {
        SubsetMask(1 << i)
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> SubsetMask {
        SubsetMask(members.into_iter().fold(0, |m, i| m | 1 << i))
    }

    /// All `width` candidates included.
    pub fn full(width: usize) -> SubsetMask {
        SubsetMask(if width >= 32 { u32::MAX } else { (1u32 << width) - 1 })
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn with(self, i: usize) -> SubsetMask {
        SubsetMask(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> SubsetMask {
        SubsetMask(self.0 & !(1 << i))
    }

    pub fn members(self) -> Vec<usize> {
        (0..32).filter(|&i| self.contains(i)).collect()
    }

    /// Every submask, from `self` down to the empty mask.
    pub fn submasks(self) -> impl Iterator<Item = SubsetMask> {
        let full = self.0;
        let mut next = Some(full);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == 0 { None } else { Some((cur - 1) & full) };
            Some(SubsetMask(cur))
        })
    }

    /// `width` characters, character `j` is `1` iff candidate `j` is included.
    pub fn to_bit_string(self, width: usize) -> String {
        (0..width).map(|j| if self.contains(j) { '1' } else { '0' }).collect()
    }

    pub fn parse_bit_string(s: &str) -> Option<SubsetMask> {
        if s.is_empty() || s.len() > MAX_WIDTH {
            return None;
        }
        s.chars().enumerate().try_fold(SubsetMask::EMPTY, |m, (j, c)| match c {
            '0' => Some(m),
            '1' => Some(m.with(j)),
            _ => None,
        })
    }

    /// Position of `mask`'s bits within this mask's members, packed densely.
    fn compact(self, mask: SubsetMask) -> usize {
        let mut out = 0;
        let mut k = 0;
        let mut rest = self.0;
        while rest != 0 {
            let bit = rest.trailing_zeros();
            if mask.0 >> bit & 1 == 1 {
                out |= 1 << k;
            }
            k += 1;
            rest &= rest - 1;
        }
        out
    }
}

/// A real function on the `2^width` inclusion patterns, indexed by mask bits.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFunction {
    width: usize,
    values: Vec<f64>,
}

impl SetFunction {
    pub fn new(values: Vec<f64>) -> Result<SetFunction> {
        let len = values.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("{len} cells is not 2^m with m >= 1")));
        }
        let width = len.trailing_zeros() as usize;
        if width > MAX_WIDTH {
            return Err(Error::TooManyCandidates { count: width, limit: MAX_WIDTH });
        }
        Ok(SetFunction { width, values })
    }

    pub fn from_fn<F: FnMut(SubsetMask) -> f64>(width: usize, mut f: F) -> Result<SetFunction> {
        if width == 0 || width > MAX_WIDTH {
            return Err(Error::InvalidParameter(format!("width {width} outside 1..={MAX_WIDTH}")));
        }
        SetFunction::new((0..1u64 << width).map(|b| f(SubsetMask(b as u32))).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, mask: SubsetMask) -> f64 {
        self.values[mask.0 as usize]
    }

    /// Relabels inputs: input `j` of the result is input `perm[j]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> SetFunction {
        SetFunction::from_fn(self.width, |mask| {
            self.value(SubsetMask::from_members(mask.members().into_iter().map(|j| perm[j])))
        })
        .expect("same width")
    }

    fn masks_without(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let bit = 1usize << i;
        (0..self.values.len()).filter(move |m| m & bit == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Population variance over the equally likely cells.
    pub variance: f64,
}

/// Equal-weight mean and population variance of all cells.
pub fn moments(y: &SetFunction) -> Moments {
    let n = y.values.len() as f64;
    let mean = y.values.iter().sum::<f64>() / n;
    let variance = y.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Moments { mean, variance }
}

/// Whether a variance is indistinguishable from rounding noise for this table.
pub fn is_degenerate(y: &SetFunction, m: &Moments) -> bool {
    let scale = y.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    m.variance <= (4.0 * f64::EPSILON * scale).powi(2)
}

fn checked_moments(y: &SetFunction) -> Result<Moments> {
    let m = moments(y);
    if is_degenerate(y, &m) {
        return Err(Error::ZeroVariance);
    }
    Ok(m)
}

fn check_input(y: &SetFunction, i: usize) -> Result<()> {
    if i >= y.width {
        return Err(Error::InvalidParameter(format!("input {i} out of range for width {}", y.width)));
    }
    Ok(())
}

fn check_subset(y: &SetFunction, psi: SubsetMask) -> Result<()> {
    if psi.is_empty() || !psi.is_subset_of(SubsetMask::full(y.width)) {
        return Err(Error::InvalidParameter(format!("subset {:#b} invalid for width {}", psi.0, y.width)));
    }
    Ok(())
}

fn first_order_with(y: &SetFunction, m: &Moments, i: usize) -> f64 {
    let bit = 1usize << i;
    let signed: f64 = y.masks_without(i).map(|w| y.values[w | bit] - y.values[w]).sum();
    signed * signed / (4f64.powi(y.width as i32) * m.variance)
}

/// First-order index from the signed sum of paired differences.
pub fn first_order_index(y: &SetFunction, i: usize) -> Result<f64> {
    check_input(y, i)?;
    Ok(first_order_with(y, &checked_moments(y)?, i))
}

/// First-order index from absolute differences `|Y[Ω+i] - Y[Ω]|`. Equals
/// [`first_order_index`] only when `Y` is monotone in input `i`.
pub fn first_order_index_abs(y: &SetFunction, i: usize) -> Result<f64> {
    check_input(y, i)?;
    let m = checked_moments(y)?;
    let bit = 1usize << i;
    let s: f64 = y.masks_without(i).map(|w| (y.values[w | bit] - y.values[w]).abs()).sum();
    Ok(s * s / (4f64.powi(y.width as i32) * m.variance))
}

fn subset_first_order_with(y: &SetFunction, m: &Moments, psi: SubsetMask) -> f64 {
    let s = psi.len();
    let mut sums = vec![0.0; 1 << s];
    for (mask, v) in y.values.iter().enumerate() {
        sums[psi.compact(SubsetMask(mask as u32))] += v;
    }
    let scale = 2f64.powi(s as i32 - y.width as i32);
    let num: f64 = sums.iter().map(|t| (t * scale - m.mean).powi(2)).sum();
    num / (2f64.powi(s as i32) * m.variance)
}

/// Closed (first-order) index of the subset `psi`: the share of variance explained
/// by `psi`'s inputs jointly, interactions among them included.
pub fn subset_first_order(y: &SetFunction, psi: SubsetMask) -> Result<f64> {
    check_subset(y, psi)?;
    Ok(subset_first_order_with(y, &checked_moments(y)?, psi))
}

fn total_with(y: &SetFunction, m: &Moments, i: usize) -> f64 {
    let bit = 1usize << i;
    let num: f64 = y.masks_without(i).map(|w| (y.values[w | bit] - y.values[w]).powi(2)).sum();
    num / (2f64.powi(y.width as i32 + 1) * m.variance)
}

/// Total index of input `i`: variance lost when `i` is frozen.
pub fn total_index(y: &SetFunction, i: usize) -> Result<f64> {
    check_input(y, i)?;
    Ok(total_with(y, &checked_moments(y)?, i))
}

/// Pure interaction index of `psi` (|psi| >= 2), by recursion over its subset lattice.
/// Not clamped: noisy tables can yield negative values.
pub fn higher_order_index(y: &SetFunction, psi: SubsetMask) -> Result<f64> {
    check_subset(y, psi)?;
    if psi.len() < 2 {
        return Err(Error::InvalidParameter("higher-order index needs at least two inputs".into()));
    }
    let m = checked_moments(y)?;
    let mut memo = HashMap::new();
    Ok(higher_order_rec(y, &m, psi, &mut memo))
}

fn higher_order_rec(y: &SetFunction, m: &Moments, psi: SubsetMask, memo: &mut HashMap<SubsetMask, f64>) -> f64 {
    if let Some(&v) = memo.get(&psi) {
        return v;
    }
    let mut v = subset_first_order_with(y, m, psi);
    for i in psi.members() {
        v -= first_order_with(y, m, i);
    }
    for zeta in psi.submasks().skip(1) {
        if zeta.len() >= 2 {
            v -= higher_order_rec(y, m, zeta, memo);
        }
    }
    memo.insert(psi, v);
    v
}

/// All interaction indices with `2 <= |Ψ| <= max_order`, computed bottom-up.
fn higher_orders_with(y: &SetFunction, m: &Moments, first: &[f64], max_order: usize) -> BTreeMap<SubsetMask, f64> {
    let mut by_order: Vec<Vec<SubsetMask>> = vec![Vec::new(); max_order + 1];
    if max_order >= 2 {
        for b in 1..=SubsetMask::full(y.width).0 {
            let mask = SubsetMask(b);
            if (2..=max_order).contains(&mask.len()) {
                by_order[mask.len()].push(mask);
            }
        }
    }
    let mut out = BTreeMap::new();
    for level in by_order.iter().skip(2) {
        let computed: Vec<(SubsetMask, f64)> = level
            .par_iter()
            .map(|&psi| {
                let mut v = subset_first_order_with(y, m, psi);
                for i in psi.members() {
                    v -= first[i];
                }
                for zeta in psi.submasks().skip(1) {
                    if zeta.len() >= 2 {
                        v -= out[&zeta];
                    }
                }
                (psi, v)
            })
            .collect();
        out.extend(computed);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionIndex {
    /// Input positions, ascending.
    pub members: Vec<usize>,
    pub index: f64,
    /// `index · Var(Y)`.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolDecomposition {
    pub width: usize,
    pub mean_y: f64,
    pub var_y: f64,
    pub max_order: usize,
    pub first_order: Vec<f64>,
    pub total: Vec<f64>,
    /// Sorted by order, then lexicographically by members.
    pub higher_order: Vec<InteractionIndex>,
    pub first_order_variance: Vec<f64>,
    pub total_variance: Vec<f64>,
    /// `1 - (Σ S_i + Σ S^(H))`, reported only when every order is included.
    pub closure_residual: Option<f64>,
}

impl SobolDecomposition {
    pub fn interaction(&self, members: &[usize]) -> Option<f64> {
        self.higher_order.iter().find(|h| h.members == members).map(|h| h.index)
    }
}

pub fn full_decomposition(y: &SetFunction, max_order: usize) -> Result<SobolDecomposition> {
    if max_order > y.width {
        return Err(Error::InvalidParameter(format!("max order {max_order} exceeds width {}", y.width)));
    }
    let m = checked_moments(y)?;
    let first: Vec<f64> = (0..y.width).map(|i| first_order_with(y, &m, i)).collect();
    let total: Vec<f64> = (0..y.width).map(|i| total_with(y, &m, i)).collect();
    let higher = higher_orders_with(y, &m, &first, max_order);
    let mut higher_order: Vec<InteractionIndex> = higher
        .iter()
        .map(|(mask, &index)| InteractionIndex { members: mask.members(), index, variance: index * m.variance })
        .collect();
    higher_order.sort_by(|a, b| a.members.len().cmp(&b.members.len()).then_with(|| a.members.cmp(&b.members)));
    let closure_residual = (max_order == y.width)
        .then(|| 1.0 - first.iter().sum::<f64>() - higher_order.iter().map(|h| h.index).sum::<f64>());
    Ok(SobolDecomposition {
        width: y.width,
        mean_y: m.mean,
        var_y: m.variance,
        max_order,
        first_order_variance: first.iter().map(|s| s * m.variance).collect(),
        total_variance: total.iter().map(|s| s * m.variance).collect(),
        first_order: first,
        total,
        higher_order,
        closure_residual,
    })
}

/// Indices evaluated straight from their conditional-moment definitions.
pub mod definitional {
    use super::*;

    /// Conditional means `E(Y | inputs in psi fixed to x)`, indexed by compacted `x`.
    fn conditional_means(y: &SetFunction, psi: SubsetMask) -> Vec<f64> {
        let mut sum = vec![0.0; 1 << psi.len()];
        let mut count = vec![0usize; 1 << psi.len()];
        for (mask, v) in y.values.iter().enumerate() {
            let x = psi.compact(SubsetMask(mask as u32));
            sum[x] += v;
            count[x] += 1;
        }
        sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
    }

    fn population_variance(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean_sq = xs.iter().map(|x| x * x).sum::<f64>() / n;
        let mean = xs.iter().sum::<f64>() / n;
        mean_sq - mean * mean
    }

    fn var_y(y: &SetFunction) -> Result<f64> {
        let v = population_variance(&y.values);
        if is_degenerate(y, &moments(y)) {
            return Err(Error::ZeroVariance);
        }
        Ok(v)
    }

    /// `Var_Ψ(E(Y | Ψ)) / Var(Y)`.
    pub fn subset_first_order(y: &SetFunction, psi: SubsetMask) -> Result<f64> {
        check_subset(y, psi)?;
        Ok(population_variance(&conditional_means(y, psi)) / var_y(y)?)
    }

    /// `Var_i(E(Y | Ω_i)) / Var(Y)`.
    pub fn first_order(y: &SetFunction, i: usize) -> Result<f64> {
        check_input(y, i)?;
        subset_first_order(y, SubsetMask::singleton(i))
    }

    /// `E_{~i}(Var_i(Y | Ω_{~i})) / Var(Y)`.
    pub fn total(y: &SetFunction, i: usize) -> Result<f64> {
        check_input(y, i)?;
        let bit = 1usize << i;
        let pairs: Vec<f64> = (0..y.values.len())
            .filter(|m| m & bit == 0)
            .map(|w| population_variance(&[y.values[w], y.values[w | bit]]))
            .collect();
        Ok(pairs.iter().sum::<f64>() / pairs.len() as f64 / var_y(y)?)
    }
}

/// Exact ANOVA decomposition: `index[Ψ] = Var(f_Ψ) / Var(Y)` for every non-empty `Ψ`,
/// where `f_Ψ = Σ_{ζ⊆Ψ} (-1)^{|Ψ|-|ζ|} E(Y | ζ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaDecomposition {
    pub width: usize,
    pub var_y: f64,
    /// Indexed by mask bits; entry 0 is unused.
    pub indices: Vec<f64>,
}

impl AnovaDecomposition {
    pub fn index(&self, psi: SubsetMask) -> f64 {
        self.indices[psi.0 as usize]
    }

    pub fn first_order(&self, i: usize) -> f64 {
        self.index(SubsetMask::singleton(i))
    }

    /// Sum of all indices whose subset contains `i`.
    pub fn total(&self, i: usize) -> f64 {
        (1..self.indices.len()).filter(|m| m >> i & 1 == 1).map(|m| self.indices[m]).sum()
    }

    pub fn sum(&self) -> f64 {
        self.indices.iter().skip(1).sum()
    }
}

pub fn anova_oracle(y: &SetFunction) -> Result<AnovaDecomposition> {
    if y.width > ORACLE_WIDTH {
        return Err(Error::TooManyCandidates { count: y.width, limit: ORACLE_WIDTH });
    }
    let cells = y.values.len();
    let mut cond: Vec<Vec<f64>> = Vec::with_capacity(cells);
    for zeta in 0..cells {
        let zeta = SubsetMask(zeta as u32);
        let mut sum = vec![0.0; 1 << zeta.len()];
        for (mask, v) in y.values.iter().enumerate() {
            sum[zeta.compact(SubsetMask(mask as u32))] += v;
        }
        let per = (cells >> zeta.len()) as f64;
        cond.push(sum.into_iter().map(|s| s / per).collect());
    }
    let var_y = {
        let mean = cond[0][0];
        y.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cells as f64
    };
    if is_degenerate(y, &Moments { mean: cond[0][0], variance: var_y }) {
        return Err(Error::ZeroVariance);
    }
    let mut indices = vec![0.0; cells];
    for (p, slot) in indices.iter_mut().enumerate().skip(1) {
        let psi = SubsetMask(p as u32);
        let settings = 1usize << psi.len();
        let mut sq = 0.0;
        let mut lin = 0.0;
        for x in psi.submasks() {
            let mut f = 0.0;
            for zeta in psi.submasks() {
                let sign = if (psi.len() - zeta.len()).is_multiple_of(2) { 1.0 } else { -1.0 };
                f += sign * cond[zeta.0 as usize][zeta.compact(x)];
            }
            sq += f * f;
            lin += f;
        }
        let mean = lin / settings as f64;
        *slot = (sq / settings as f64 - mean * mean) / var_y;
    }
    Ok(AnovaDecomposition { width: y.width, var_y, indices })
}

/// Spread estimates for every inclusion pattern over an ordered candidate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSpreadTable {
    pub candidates: Vec<NodeId>,
    /// Indexed by mask bits; the empty pattern is `0` without simulation.
    pub cells: Vec<SpreadEstimate>,
    /// Diffusion settings the cells were estimated with; `None` for loaded tables.
    pub config: Option<DiffusionConfig>,
}

/// Spread estimates keyed by seed-set content (sorted node ids). Only valid for a
/// single graph and diffusion configuration.
#[derive(Debug, Clone, Default)]
pub struct SpreadCache {
    entries: HashMap<Vec<NodeId>, SpreadEstimate>,
}

impl SpreadCache {
    pub fn new() -> SpreadCache {
        SpreadCache::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn sorted(mut nodes: Vec<NodeId>) -> Vec<NodeId> {
    nodes.sort_unstable();
    nodes
}

impl SubsetSpreadTable {
    pub fn width(&self) -> usize {
        self.candidates.len()
    }

    pub fn cell(&self, mask: SubsetMask) -> &SpreadEstimate {
        &self.cells[mask.0 as usize]
    }

    /// Seed nodes of a pattern, in candidate order.
    pub fn nodes(&self, mask: SubsetMask) -> Vec<NodeId> {
        mask.members().into_iter().filter(|&j| j < self.width()).map(|j| self.candidates[j]).collect()
    }

    pub fn function(&self) -> SetFunction {
        SetFunction::new(self.cells.iter().map(|c| c.mean).collect()).expect("complete table")
    }

    /// Total simulated rounds behind the cells.
    pub fn rounds(&self) -> u64 {
        self.cells.iter().map(|c| c.rounds as u64).sum()
    }

    /// CSV with header `mask,mean,std,rounds`; see [`SubsetMask::to_bit_string`].
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "mask,mean,std,rounds")?;
        for (bits, c) in self.cells.iter().enumerate() {
            let mask = SubsetMask(bits as u32).to_bit_string(self.width());
            writeln!(out, "{mask},{},{},{}", c.mean, c.std, c.rounds)?;
        }
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv). Candidates become
    /// `0..m` and the provenance is unknown.
    pub fn read_csv<R: BufRead>(source: R) -> Result<SubsetSpreadTable> {
        let mut rows: BTreeMap<u32, SpreadEstimate> = BTreeMap::new();
        let mut width = None;
        for (i, line) in source.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (line_no == 1 && line.starts_with("mask")) {
                continue;
            }
            let bad = |message: String| Error::MalformedLine { line: line_no, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [mask, mean, std, rounds] = fields.as_slice() else {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            };
            let parsed = SubsetMask::parse_bit_string(mask).ok_or_else(|| bad(format!("bad mask `{mask}`")))?;
            if *width.get_or_insert(mask.len()) != mask.len() {
                return Err(bad("mask width differs from earlier rows".into()));
            }
            let cell = SpreadEstimate {
                mean: mean.parse().map_err(|_| bad(format!("bad mean `{mean}`")))?,
                std: std.parse().map_err(|_| bad(format!("bad std `{std}`")))?,
                rounds: rounds.parse().map_err(|_| bad(format!("bad rounds `{rounds}`")))?,
            };
            if rows.insert(parsed.0, cell).is_some() {
                return Err(bad(format!("mask `{mask}` repeated")));
            }
        }
        let width = width.ok_or_else(|| Error::InvalidParameter("table is empty".into()))?;
        if rows.len() != 1 << width {
            return Err(Error::InvalidParameter(format!("table has {} of {} cells", rows.len(), 1u64 << width)));
        }
        Ok(SubsetSpreadTable { candidates: (0..width).collect(), cells: rows.into_values().collect(), config: None })
    }
}

fn check_candidates(g: &Graph, candidates: &[NodeId]) -> Result<()> {
    let m = candidates.len();
    if m == 0 {
        return Err(Error::InvalidParameter("no candidates".into()));
    }
    if m > MAX_WIDTH {
        return Err(Error::TooManyCandidates { count: m, limit: MAX_WIDTH });
    }
    if m > WARN_WIDTH {
        log::warn!("building a subset table over {m} candidates ({} cells)", 1u64 << m);
    }
    let n = g.node_count();
    if let Some(&bad) = candidates.iter().find(|&&c| c >= n) {
        return Err(Error::NodeOutOfRange { node: bad, n });
    }
    let mut s = candidates.to_vec();
    s.sort_unstable();
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("candidates are not distinct".into()));
    }
    Ok(())
}

/// Estimates the spread of every non-empty pattern with `cfg.rounds` cascades each.
pub fn build_subset_table(g: &Graph, candidates: &[NodeId], cfg: &DiffusionConfig) -> Result<SubsetSpreadTable> {
    Ok(build_subset_table_cached(g, candidates, cfg, None)?.0)
}

/// As [`build_subset_table`], reusing and filling `cache`. Also returns the number of
/// cascades actually simulated.
pub fn build_subset_table_cached(
    g: &Graph,
    candidates: &[NodeId],
    cfg: &DiffusionConfig,
    cache: Option<&mut SpreadCache>,
) -> Result<(SubsetSpreadTable, u64)> {
    check_candidates(g, candidates)?;
    cfg.validate()?;
    let width = candidates.len();
    let cells_len = 1usize << width;
    let nodes_of =
        |bits: usize| -> Vec<NodeId> { (0..width).filter(|&j| bits >> j & 1 == 1).map(|j| candidates[j]).collect() };
    let missing: Vec<usize> = (1..cells_len)
        .filter(|&b| cache.as_ref().is_none_or(|c| !c.entries.contains_key(&sorted(nodes_of(b)))))
        .collect();
    let fresh: Vec<(usize, SpreadEstimate)> =
        missing.par_iter().map(|&b| estimate_spread(g, &nodes_of(b), cfg).map(|e| (b, e))).collect::<Result<_>>()?;
    let simulated = fresh.iter().map(|(_, e)| e.rounds as u64).sum();

    let mut cells = vec![SpreadEstimate { mean: 0.0, std: 0.0, rounds: 0 }; cells_len];
    for &(b, e) in &fresh {
        cells[b] = e;
    }
    if let Some(cache) = cache {
        for (b, cell) in cells.iter_mut().enumerate().skip(1) {
            let key = sorted(nodes_of(b));
            match cache.entries.get(&key) {
                Some(hit) => *cell = *hit,
                None => {
                    cache.entries.insert(key, *cell);
                }
            }
        }
    }
    Ok((SubsetSpreadTable { candidates: candidates.to_vec(), cells, config: Some(*cfg) }, simulated))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXACT: f64 = 1e-12;

    fn and2() -> SetFunction {
        SetFunction::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn additive(w: &[f64]) -> SetFunction {
        SetFunction::from_fn(w.len(), |m| m.members().iter().map(|&i| w[i]).sum()).unwrap()
    }

    #[test]
    fn mask_helpers() {
        let m = SubsetMask::from_members([0, 2]);
        assert_eq!(m.bits(), 0b101);
        assert_eq!(m.to_bit_string(4), "1010");
        assert_eq!(SubsetMask::parse_bit_string("1010"), Some(m));
        assert_eq!(SubsetMask::parse_bit_string("10x"), None);
        assert_eq!(m.submasks().count(), 4);
        assert_eq!(SubsetMask::full(32).len(), 32);
        assert_eq!(SubsetMask(0b1101).compact(SubsetMask(0b1001)), 0b101);
    }

    #[test]
    fn moments_examples() {
        let m = moments(&SetFunction::new(vec![0.0, 1.0]).unwrap());
        assert_eq!((m.mean, m.variance), (0.5, 0.25));
        let m = moments(&and2());
        assert!((m.mean - 0.25).abs() < EXACT && (m.variance - 3.0 / 16.0).abs() < EXACT);
        let c = SetFunction::new(vec![0.1; 8]).unwrap();
        assert!(is_degenerate(&c, &moments(&c)));
    }

    #[test]
    fn and_function() {
        let y = and2();
        for i in 0..2 {
            assert!((first_order_index(&y, i).unwrap() - 1.0 / 3.0).abs() < EXACT);
            assert!((total_index(&y, i).unwrap() - 2.0 / 3.0).abs() < EXACT);
        }
        assert!((subset_first_order(&y, SubsetMask(0b11)).unwrap() - 1.0).abs() < EXACT);
        assert!((higher_order_index(&y, SubsetMask(0b11)).unwrap() - 1.0 / 3.0).abs() < EXACT);
    }

    #[test]
    fn additive_function() {
        let y = additive(&[2.0, 1.0]);
        assert!((first_order_index(&y, 0).unwrap() - 0.8).abs() < EXACT);
        assert!((first_order_index(&y, 1).unwrap() - 0.2).abs() < EXACT);
        assert!(higher_order_index(&y, SubsetMask(0b11)).unwrap().abs() < EXACT);
        assert!((total_index(&y, 0).unwrap() - 0.8).abs() < EXACT);
    }

    #[test]
    fn irrelevant_input_has_zero_indices() {
        let y =
            SetFunction::from_fn(3, |m| if m.contains(0) { 2.0 } else { 0.5 } + m.contains(2) as u8 as f64).unwrap();
        assert!(first_order_index(&y, 1).unwrap().abs() < EXACT);
        assert!(total_index(&y, 1).unwrap().abs() < EXACT);
    }

    #[test]
    fn three_way_and_against_oracle() {
        let y = SetFunction::from_fn(3, |m| (m.len() == 3) as u8 as f64).unwrap();
        let oracle = anova_oracle(&y).unwrap();
        let h = higher_order_index(&y, SubsetMask(0b111)).unwrap();
        assert!((h - oracle.index(SubsetMask(0b111))).abs() < 1e-12);
        let d = full_decomposition(&y, 3).unwrap();
        assert!(d.closure_residual.unwrap().abs() < 1e-12);
    }

    #[test]
    fn single_variable_owns_everything() {
        let y = SetFunction::new(vec![0.0, 4.2]).unwrap();
        let d = full_decomposition(&y, 1).unwrap();
        assert!((d.first_order[0] - 1.0).abs() < EXACT);
        assert!((d.total[0] - 1.0).abs() < EXACT);
    }

    #[test]
    fn and_decomposition() {
        let d = full_decomposition(&and2(), 2).unwrap();
        assert!((d.first_order[1] - 1.0 / 3.0).abs() < EXACT);
        assert!((d.interaction(&[0, 1]).unwrap() - 1.0 / 3.0).abs() < EXACT);
        assert!((d.total[0] - 2.0 / 3.0).abs() < EXACT);
        assert!(d.closure_residual.unwrap().abs() < EXACT);
        assert!((d.total_variance[0] - 2.0 / 3.0 * 3.0 / 16.0).abs() < EXACT);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let y = SetFunction::new(vec![3.0; 4]).unwrap();
        assert!(matches!(first_order_index(&y, 0), Err(Error::ZeroVariance)));
        assert!(matches!(total_index(&y, 0), Err(Error::ZeroVariance)));
        assert!(matches!(full_decomposition(&y, 2), Err(Error::ZeroVariance)));
        assert!(matches!(anova_oracle(&y), Err(Error::ZeroVariance)));
    }

    #[test]
    fn argument_errors() {
        let y = and2();
        assert!(higher_order_index(&y, SubsetMask(0b1)).is_err());
        assert!(subset_first_order(&y, SubsetMask(0b100)).is_err());
        assert!(full_decomposition(&y, 3).is_err());
        assert!(first_order_index(&y, 2).is_err());
        assert!(SetFunction::new(vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn abs_form_differs_for_non_monotone() {
        // XOR is not monotone: signed differences cancel, absolute ones do not
        let y = SetFunction::new(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(first_order_index(&y, 0).unwrap().abs() < EXACT);
        assert!(first_order_index_abs(&y, 0).unwrap() > 0.5);
    }

    #[test]
    fn csv_round_trip() {
        let table = SubsetSpreadTable {
            candidates: vec![0, 1],
            cells: vec![
                SpreadEstimate { mean: 0.0, std: 0.0, rounds: 0 },
                SpreadEstimate { mean: 1.25, std: 0.5, rounds: 10 },
                SpreadEstimate { mean: 1.0 / 3.0, std: 0.0, rounds: 10 },
                SpreadEstimate { mean: 2.5, std: 0.1, rounds: 10 },
            ],
            config: None,
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mask,mean,std,rounds\n00,0,0,0\n10,1.25,0.5,10\n"));
        assert_eq!(SubsetSpreadTable::read_csv(text.as_bytes()).unwrap(), table);
        assert!(SubsetSpreadTable::read_csv("mask,mean,std,rounds\n0,0,0,0\n".as_bytes()).is_err());
        assert!(SubsetSpreadTable::read_csv("0,0,0,0\n1,1,0,1\n1,1,0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn table_counts_and_empty_cell() {
        let g = crate::graph::GraphGenSpec::er(50, 4.0, 0.0, 0.0, 1).generate().unwrap();
        let cfg = DiffusionConfig::ic(25, 3);
        let t = build_subset_table(&g, &[4, 9, 13], &cfg).unwrap();
        assert_eq!(t.cells.len(), 8);
        assert_eq!(t.rounds(), 7 * 25);
        assert_eq!(*t.cell(SubsetMask::EMPTY), SpreadEstimate { mean: 0.0, std: 0.0, rounds: 0 });
        for b in 0..8u32 {
            let c = t.cell(SubsetMask(b));
            assert_eq!(c.mean, b.count_ones() as f64);
            assert_eq!(c.std, 0.0);
        }
        let one = build_subset_table(&g, &[7], &cfg).unwrap();
        assert_eq!(one.cells.len(), 2);
        assert!(build_subset_table(&g, &[1, 1], &cfg).is_err());
        assert!(build_subset_table(&g, &[], &cfg).is_err());
        assert!(build_subset_table(&g, &(0..33).collect::<Vec<_>>(), &cfg).is_err());
    }

    #[test]
    fn cache_reuses_sub_tables() {
        let g = crate::graph::GraphGenSpec::er(80, 5.0, 0.1, 0.3, 2).generate().unwrap();
        let cfg = DiffusionConfig::ic(30, 5);
        let mut cache = SpreadCache::new();
        let (full, cost) = build_subset_table_cached(&g, &[1, 2, 3, 4], &cfg, Some(&mut cache)).unwrap();
        assert_eq!(cost, 15 * 30);
        let (sub, cost) = build_subset_table_cached(&g, &[4, 1, 3], &cfg, Some(&mut cache)).unwrap();
        assert_eq!(cost, 0);
        assert_eq!(sub, build_subset_table(&g, &[4, 1, 3], &cfg).unwrap());
        assert_eq!(full.cell(SubsetMask(0b1001)), sub.cell(SubsetMask(0b011)));
    }
}
