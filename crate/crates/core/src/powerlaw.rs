//! Discrete power-law tail fitting.

/// Minimum number of tail observations for a fit to count as conclusive.
pub const MIN_TAIL_SAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailFit {
    Fitted { alpha: f64, d_min: usize, tail_len: usize },
    Inconclusive { d_min: usize, tail_len: usize },
}

impl TailFit {
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            TailFit::Fitted { alpha, .. } => Some(alpha),
            TailFit::Inconclusive { .. } => None,
        }
    }

    pub fn tail_len(&self) -> usize {
        match *self {
            TailFit::Fitted { tail_len, .. } | TailFit::Inconclusive { tail_len, .. } => tail_len,
        }
    }
}

/// Degree at quantile `q` (nearest-rank) of the given degrees.
pub fn degree_quantile(degrees: &[usize], q: f64) -> usize {
    if degrees.is_empty() {
        return 0;
    }
    let mut sorted = degrees.to_vec();
    sorted.sort_unstable();
    let rank = ((q.clamp(0.0, 1.0) * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Clauset MLE `α̂ = 1 + n / Σ ln(d_i / (d_min − ½))` over degrees `d ≥ d_min`.
///
/// The fit is inconclusive when fewer than [`MIN_TAIL_SAMPLES`] degrees lie in
/// the tail or the tail holds a single distinct value.
pub fn clauset_alpha(degrees: &[usize], d_min: usize) -> TailFit {
    let d_min = d_min.max(1);
    let tail: Vec<usize> = degrees.iter().copied().filter(|&d| d >= d_min).collect();
    let n = tail.len();
    let degenerate = tail.windows(2).all(|w| w[0] == w[1]);
    if n < MIN_TAIL_SAMPLES || degenerate {
        return TailFit::Inconclusive { d_min, tail_len: n };
    }
    let shift = d_min as f64 - 0.5;
    let s: f64 = tail.iter().map(|&d| (d as f64 / shift).ln()).sum();
    TailFit::Fitted {
        alpha: 1.0 + n as f64 / s,
        d_min,
        tail_len: n,
    }
}

/// Fraction of entries with degree exactly `k`.
pub fn degree_frequency(degrees: &[usize], k: usize) -> f64 {
    if degrees.is_empty() {
        return 0.0;
    }
    degrees.iter().filter(|&&d| d == k).count() as f64 / degrees.len() as f64
}
