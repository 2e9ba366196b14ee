//! Connectionist temporal classification loss.
//!
//! The loss is computed with the forward-backward recursions over the
//! blank-interleaved target, entirely in log space. Gradients are taken with
//! respect to logits (the row softmax is composed in). A brute-force path
//! enumerator is kept alongside as an oracle for small instances.

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::alphabet::LabelId;
use crate::error::{Error, Result};

pub const NEG_INF: f64 = f64::NEG_INFINITY;

const ROW_SUM_TOL: f64 = 1e-9;

/// `ln(e^a + e^b)`; `-inf` is absorbing.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == NEG_INF {
        return b;
    }
    if b == NEG_INF {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(NEG_INF, f64::max);
    if m == NEG_INF {
        return NEG_INF;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Row-wise log-softmax.
pub fn log_softmax(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let lse = log_sum_exp(row.iter().copied());
        row.mapv_inplace(|x| x - lse);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeKind {
    Probabilities,
    Logits,
}

/// Per-frame scores over a label space: `T` rows, `K` columns, blank at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorLattice {
    values: Array2<f64>,
    kind: LatticeKind,
}

impl PosteriorLattice {
    fn check_shape(values: &Array2<f64>) -> Result<()> {
        let (t, k) = values.dim();
        if t < 1 || k < 2 {
            return Err(Error::BadShape(format!("lattice needs T>=1 and K>=2, got {t}x{k}")));
        }
        Ok(())
    }

    pub fn from_probabilities(values: Array2<f64>) -> Result<Self> {
        Self::check_shape(&values)?;
        for (t, row) in values.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::BadShape(format!(
                    "row {t} is not a probability distribution (sum {sum})"
                )));
            }
        }
        Ok(PosteriorLattice {
            values,
            kind: LatticeKind::Probabilities,
        })
    }

    pub fn from_logits(values: Array2<f64>) -> Result<Self> {
        Self::check_shape(&values)?;
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::BadShape("non-finite logit".into()));
        }
        Ok(PosteriorLattice {
            values,
            kind: LatticeKind::Logits,
        })
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_labels(&self) -> usize {
        self.values.ncols()
    }

    pub fn log_probs(&self) -> Array2<f64> {
        match self.kind {
            LatticeKind::Logits => log_softmax(self.values.view()),
            LatticeKind::Probabilities => self.values.mapv(f64::ln),
        }
    }

    pub fn probabilities(&self) -> Array2<f64> {
        match self.kind {
            LatticeKind::Logits => log_softmax(self.values.view()).mapv(f64::exp),
            LatticeKind::Probabilities => self.values.clone(),
        }
    }
}

/// Target with a blank before, between, and after every label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpandedTarget {
    pub labels: Vec<LabelId>,
    pub original_len: usize,
}

impl ExpandedTarget {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Whether the recursion may skip from `s - 2` straight to `s`.
    fn can_skip(&self, s: usize) -> bool {
        s >= 2 && !self.labels[s].is_blank() && self.labels[s] != self.labels[s - 2]
    }
}

pub fn expand_target(y: &[LabelId]) -> Result<ExpandedTarget> {
    if let Some(position) = y.iter().position(|l| l.is_blank()) {
        return Err(Error::BlankInTarget { position });
    }
    let mut labels = Vec::with_capacity(2 * y.len() + 1);
    labels.push(LabelId::BLANK);
    for &l in y {
        labels.push(l);
        labels.push(LabelId::BLANK);
    }
    Ok(ExpandedTarget {
        labels,
        original_len: y.len(),
    })
}

pub fn adjacent_repeats(y: &[LabelId]) -> usize {
    y.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Minimum number of frames any CTC path for `y` needs.
pub fn min_frames(y: &[LabelId]) -> usize {
    y.len() + adjacent_repeats(y)
}

/// Removes consecutive duplicates, then blanks.
pub fn collapse_path(path: &[LabelId]) -> Vec<LabelId> {
    let mut out = Vec::new();
    let mut prev = None;
    for &l in path {
        if Some(l) != prev && !l.is_blank() {
            out.push(l);
        }
        prev = Some(l);
    }
    out
}

/// Log-space forward and backward variables. `log_alpha[t][s]` includes the
/// emission at `t`; `log_beta[t][s]` covers frames after `t` only, so that
/// `logsumexp_s(alpha_t(s) + beta_t(s))` is the total log-probability for
/// every `t`.
#[derive(Clone, Debug)]
pub struct ForwardBackward {
    pub target: ExpandedTarget,
    pub log_alpha: Array2<f64>,
    pub log_beta: Array2<f64>,
    pub log_prob: f64,
}

fn validate_target(y: &[LabelId], k: usize, t: usize) -> Result<ExpandedTarget> {
    let target = expand_target(y)?;
    if let Some(bad) = y.iter().find(|l| l.index() >= k) {
        return Err(Error::BadShape(format!("label {bad} outside a {k}-label lattice")));
    }
    let repeats = adjacent_repeats(y);
    if t < y.len() + repeats {
        return Err(Error::InfeasibleAlignment {
            frames: t,
            labels: y.len(),
            repeats,
        });
    }
    Ok(target)
}

fn forward_backward_logp(log_probs: ArrayView2<f64>, target: ExpandedTarget) -> ForwardBackward {
    let t_len = log_probs.nrows();
    let s_len = target.len();
    let lab = |s: usize| target.labels[s].index();

    let mut alpha = Array2::from_elem((t_len, s_len), NEG_INF);
    alpha[[0, 0]] = log_probs[[0, lab(0)]];
    if s_len > 1 {
        alpha[[0, 1]] = log_probs[[0, lab(1)]];
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut acc = alpha[[t - 1, s]];
            if s >= 1 {
                acc = log_add(acc, alpha[[t - 1, s - 1]]);
            }
            if target.can_skip(s) {
                acc = log_add(acc, alpha[[t - 1, s - 2]]);
            }
            alpha[[t, s]] = if acc == NEG_INF { NEG_INF } else { acc + log_probs[[t, lab(s)]] };
        }
    }

    let mut beta = Array2::from_elem((t_len, s_len), NEG_INF);
    beta[[t_len - 1, s_len - 1]] = 0.0;
    if s_len > 1 {
        beta[[t_len - 1, s_len - 2]] = 0.0;
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let step = |s2: usize| beta[[t + 1, s2]] + log_probs[[t + 1, lab(s2)]];
            let mut acc = step(s);
            if s + 1 < s_len {
                acc = log_add(acc, step(s + 1));
            }
            if s + 2 < s_len && target.can_skip(s + 2) {
                acc = log_add(acc, step(s + 2));
            }
            beta[[t, s]] = acc;
        }
    }

    let last = t_len - 1;
    let mut log_prob = alpha[[last, s_len - 1]];
    if s_len > 1 {
        log_prob = log_add(log_prob, alpha[[last, s_len - 2]]);
    }
    ForwardBackward {
        target,
        log_alpha: alpha,
        log_beta: beta,
        log_prob,
    }
}

/// Runs both recursions without forming a gradient.
pub fn forward_backward(lattice: &PosteriorLattice, y: &[LabelId]) -> Result<ForwardBackward> {
    let target = validate_target(y, lattice.num_labels(), lattice.frames())?;
    Ok(forward_backward_logp(lattice.log_probs().view(), target))
}

#[derive(Clone, Debug)]
pub struct CtcResult {
    /// `-ln p(y | lattice)` in nats.
    pub log_loss: f64,
    /// `d(-ln p)/d logit`. Probability lattices are treated as the softmax
    /// of their own logarithms.
    pub grad: Array2<f64>,
    /// Per-frame label occupancy: the posterior probability that frame `t`
    /// emits label `k`, summed over all paths of `y`.
    pub occupancy: Array2<f64>,
}

impl CtcResult {
    /// `d(-ln p)/d p_t(k)` for a probability lattice, by the chain rule
    /// through `p = exp(ln p)`.
    pub fn posterior_grad(&self, probs: &Array2<f64>) -> Array2<f64> {
        let mut g = -&self.occupancy;
        g.zip_mut_with(probs, |gi, &p| *gi /= p);
        g
    }
}

pub fn ctc_loss(lattice: &PosteriorLattice, y: &[LabelId]) -> Result<CtcResult> {
    let target = validate_target(y, lattice.num_labels(), lattice.frames())?;
    let log_probs = lattice.log_probs();
    let fb = forward_backward_logp(log_probs.view(), target);
    if fb.log_prob == NEG_INF {
        return Err(Error::ZeroProbability);
    }

    let (t_len, k) = log_probs.dim();
    let mut occupancy = Array2::zeros((t_len, k));
    let mut acc = vec![NEG_INF; k];
    for t in 0..t_len {
        acc.iter_mut().for_each(|a| *a = NEG_INF);
        for (s, l) in fb.target.labels.iter().enumerate() {
            let v = fb.log_alpha[[t, s]] + fb.log_beta[[t, s]];
            acc[l.index()] = log_add(acc[l.index()], v);
        }
        for (j, &a) in acc.iter().enumerate() {
            if a != NEG_INF {
                occupancy[[t, j]] = (a - fb.log_prob).exp();
            }
        }
    }
    let mut grad = log_probs.mapv(f64::exp);
    grad -= &occupancy;
    Ok(CtcResult {
        log_loss: -fb.log_prob,
        grad,
        occupancy,
    })
}

/// Loss over a padded `B x T x K` logit tensor. Frames at or beyond each
/// utterance's length are never read. Returns the summed loss and the
/// per-utterance results (gradients over true lengths only).
pub fn ctc_loss_batch(
    logits: &Array3<f64>,
    lengths: &[usize],
    targets: &[Vec<LabelId>],
) -> Result<(f64, Vec<CtcResult>)> {
    let (b, t_max, _) = logits.dim();
    if lengths.len() != b || targets.len() != b {
        return Err(Error::BadShape("batch sidecars disagree with tensor".into()));
    }
    let mut total = 0.0;
    let mut out = Vec::with_capacity(b);
    for (i, (&len, y)) in lengths.iter().zip(targets).enumerate() {
        if len == 0 || len > t_max {
            return Err(Error::BadShape(format!("length {len} for padded width {t_max}")));
        }
        let view = logits.index_axis(Axis(0), i);
        let lattice = PosteriorLattice::from_logits(view.slice(ndarray::s![..len, ..]).to_owned())?;
        let r = ctc_loss(&lattice, y)?;
        total += r.log_loss;
        out.push(r);
    }
    Ok((total, out))
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub const ORACLE_MAX_FRAMES: usize = 10;
pub const ORACLE_MAX_LABELS: usize = 6;

/// `ln p(y | lattice)` by enumerating all `K^T` frame labelings. Returns
/// `-inf` when no path collapses to `y`.
pub fn ctc_brute_force(lattice: &PosteriorLattice, y: &[LabelId]) -> Result<f64> {
    let (t_len, k) = (lattice.frames(), lattice.num_labels());
    if t_len > ORACLE_MAX_FRAMES || k > ORACLE_MAX_LABELS {
        return Err(Error::OracleTooLarge {
            frames: t_len,
            labels: k,
        });
    }
    let probs = lattice.probabilities();
    let mut path = vec![LabelId::BLANK; t_len];
    let mut digits = vec![0usize; t_len];
    let mut total = CompensatedSum::default();
    loop {
        for (p, &d) in path.iter_mut().zip(&digits) {
            *p = LabelId::from(d);
        }
        if collapse_path(&path) == y {
            let prob: f64 = digits.iter().enumerate().map(|(t, &d)| probs[[t, d]]).product();
            total.add(prob);
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == t_len {
                let p = total.total();
                return Ok(if p > 0.0 { p.ln() } else { NEG_INF });
            }
            digits[i] += 1;
            if digits[i] < k {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Largest `|analytic - numeric| / max(1, |analytic|)` over all logits, with
/// central differences of step `step`.
pub fn ctc_grad_check(lattice: &PosteriorLattice, y: &[LabelId], step: f64) -> Result<f64> {
    if lattice.kind() != LatticeKind::Logits {
        return Err(Error::BadShape("gradient check needs a logit lattice".into()));
    }
    let analytic = ctc_loss(lattice, y)?.grad;
    let base = lattice.values().clone();
    let mut worst: f64 = 0.0;
    for ((t, k), &a) in analytic.indexed_iter() {
        let mut plus = base.clone();
        plus[[t, k]] += step;
        let mut minus = base.clone();
        minus[[t, k]] -= step;
        let lp = ctc_loss(&PosteriorLattice::from_logits(plus)?, y)?.log_loss;
        let lm = ctc_loss(&PosteriorLattice::from_logits(minus)?, y)?.log_loss;
        let numeric = (lp - lm) / (2.0 * step);
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}
