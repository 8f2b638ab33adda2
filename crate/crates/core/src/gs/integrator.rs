//! Recursive numerical integration for the joint law of a sequence of
//! standardised statistics with independent score increments.
//!
//! With `S_k = Z_k sqrt(v_k)` and `S_k - S_{k-1} ~ N(m_k - m_{k-1}, v_k - v_{k-1})`,
//! the sub-density of `S_k` on the continuation region `{Z_l > c_l, l <= k}`
//! is carried on a Simpson grid from look to look.

use crate::error::{Error, Result};
use crate::normal;

/// Half-width of every grid in standard deviations of the marginal score.
pub const SPAN_SD: f64 = 8.0;
/// Grid spacing must not exceed this fraction of the next increment's sd.
pub const SPACING_PER_INCREMENT_SD: f64 = 0.25;
/// Relative increment sd below which an increment is treated as zero.
const DEGENERATE_INCREMENT: f64 = 1e-9;
/// Increment kernels are cut off beyond this many standard deviations.
const KERNEL_SD: f64 = 8.0;
/// Incremental spend below this is treated as zero.
const NOTHING_TO_SPEND: f64 = 1e-12;

/// One analysis: score variance, expected z-value and lower critical value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Look {
    pub variance: f64,
    pub mean: f64,
    pub critical: f64,
}

impl Look {
    pub fn null(variance: f64, critical: f64) -> Self {
        Self {
            variance,
            mean: 0.0,
            critical,
        }
    }
}

/// Grid settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    /// Grid points per stage on the first pass (forced odd).
    pub points: usize,
    /// Doubling stops once successive results differ by less than this.
    pub tolerance: f64,
    pub max_points: usize,
    pub adaptive: bool,
    /// Grid half-width in marginal standard deviations.
    pub span_sd: f64,
    /// Largest grid spacing as a fraction of the following increment's sd.
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    m: usize,
    max_points: usize,
    span_sd: f64,
    spacing: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Self::precise()
    }
}

impl Integrator {
    /// 2001 points per stage, doubled until results are stable to 1e-8.
    pub fn precise() -> Self {
        Self {
            points: 2001,
            tolerance: 1e-8,
            max_points: 32_001,
            adaptive: true,
            span_sd: SPAN_SD,
            spacing: SPACING_PER_INCREMENT_SD,
        }
    }

    /// Fixed grid without refinement.
    pub fn fast(points: usize) -> Self {
        Self {
            points,
            tolerance: 1e-8,
            max_points: points.max(20_001),
            adaptive: false,
            span_sd: SPAN_SD,
            spacing: SPACING_PER_INCREMENT_SD,
        }
    }

    /// Coarse fixed grid for Monte-Carlo inner loops: probabilities agree with
    /// [`Integrator::precise`] to a few times 1e-6.
    pub fn coarse() -> Self {
        Self {
            points: 31,
            tolerance: 1e-8,
            max_points: 2_001,
            adaptive: false,
            span_sd: 7.0,
            spacing: 0.25,
        }
    }

    fn grid(&self, m: usize) -> Grid {
        Grid {
            m,
            max_points: self.max_points,
            span_sd: self.span_sd,
            spacing: self.spacing,
        }
    }

    /// `P(Z_l > c_l for all l <= k)` for every `k`.
    pub fn continuation_probs(&self, looks: &[Look]) -> Result<Vec<f64>> {
        validate(looks)?;
        let mut m = odd(self.points);
        let mut current = continuation_with(looks, self.grid(m));
        if !self.adaptive {
            return Ok(current);
        }
        loop {
            let finer_m = 2 * m - 1;
            if finer_m > self.max_points {
                return Ok(current);
            }
            let finer = continuation_with(looks, self.grid(finer_m));
            let diff = current
                .iter()
                .zip(&finer)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if diff < self.tolerance {
                return Ok(finer);
            }
            current = finer;
            m = finer_m;
        }
    }

    /// Critical value for the last look such that the probability of
    /// continuing through all looks equals `1 - cum_alpha`. The criticals of
    /// earlier looks are taken from `prior`; the `critical` field of `last`
    /// is ignored. Returns `-inf` when nothing is left to spend.
    pub fn solve_critical(&self, prior: &[Look], last: Look, cum_alpha: f64) -> Result<f64> {
        let mut looks = prior.to_vec();
        looks.push(Look {
            critical: f64::NEG_INFINITY,
            ..last
        });
        validate(&looks)?;
        if !(cum_alpha > 0.0 && cum_alpha < 1.0) {
            return Err(Error::Domain(format!("cumulative alpha {cum_alpha} not in (0, 1)")));
        }
        let target = 1.0 - cum_alpha;
        let mut m = odd(self.points);
        loop {
            let stages = propagate(&looks[..looks.len() - 1], self.grid(m), &looks);
            let prev_continue = stages.last().map_or(1.0, Stage::mass);
            if prev_continue - target <= NOTHING_TO_SPEND {
                return Ok(f64::NEG_INFINITY);
            }
            let last_look = looks[looks.len() - 1];
            let c = if stages.last().is_some_and(|p| increment_sd(p.variance, last_look.variance) == 0.0) {
                let prob = |c: f64| continue_prob(&stages, &looks, last_look, c, self.grid(m));
                bisect(|c| target - prob(c), -10.0, 0.0)
            } else {
                newton(
                    |c| {
                        let (p, slope) = continue_prob_and_slope(&stages, last_look, c);
                        (target - p, -slope)
                    },
                    normal::quantile(cum_alpha),
                    -10.0,
                    0.0,
                )
            };
            if !self.adaptive {
                return Ok(c);
            }
            let finer_m = 2 * m - 1;
            if finer_m > self.max_points {
                return Ok(c);
            }
            let finer_stages = propagate(&looks[..looks.len() - 1], self.grid(finer_m), &looks);
            let check = continue_prob(&finer_stages, &looks, last_look, c, self.grid(finer_m));
            if (check - target).abs() < self.tolerance {
                return Ok(c);
            }
            m = finer_m;
        }
    }
}

fn odd(m: usize) -> usize {
    let m = m.max(3);
    if m.is_multiple_of(2) {
        m + 1
    } else {
        m
    }
}

fn validate(looks: &[Look]) -> Result<()> {
    if looks.is_empty() {
        return Err(Error::Domain("at least one look is required".into()));
    }
    let mut prev = 0.0;
    for l in looks {
        if !(l.variance.is_finite() && l.variance > 0.0) {
            return Err(Error::Domain(format!("variance {} must be positive", l.variance)));
        }
        if l.variance < prev {
            return Err(Error::Domain(
                "variances passed to the integrator must be non-decreasing".into(),
            ));
        }
        if l.critical.is_nan() || !l.mean.is_finite() {
            return Err(Error::Numerical("non-finite look parameters".into()));
        }
        prev = l.variance;
    }
    Ok(())
}

/// Sub-density of the score on the continuation region after one look,
/// stored as Simpson-weighted point masses.
#[derive(Debug, Clone)]
struct Stage {
    xs: Vec<f64>,
    /// Simpson weight times sub-density at `xs`.
    ws: Vec<f64>,
    variance: f64,
    mean_score: f64,
    /// Lower end of the support.
    floor: f64,
    /// Index of the stage whose unrestricted density this stage shares
    /// (itself unless reached through zero-variance increments).
    root: usize,
}

impl Stage {
    fn mass(&self) -> f64 {
        self.ws.iter().sum()
    }

    /// Sub-density of the next score at `y` given an increment with the
    /// stated mean and sd.
    #[inline]
    fn convolve_at(&self, y: f64, shift: f64, sd: f64) -> f64 {
        let inv = 1.0 / sd;
        let r = self.window(y - shift, KERNEL_SD * sd);
        self.xs[r.clone()]
            .iter()
            .zip(&self.ws[r])
            .map(|(&x, &w)| w * normal::pdf((y - x - shift) * inv))
            .sum::<f64>()
            * inv
    }

    /// Indices of the (uniform) grid within `half` of `center`.
    #[inline]
    fn window(&self, center: f64, half: f64) -> std::ops::Range<usize> {
        let n = self.xs.len();
        if n < 2 {
            return 0..n;
        }
        let x0 = self.xs[0];
        let h = self.xs[1] - x0;
        let idx = |x: f64| ((x - x0) / h).clamp(0.0, n as f64);
        let i = idx(center - half).floor() as usize;
        let j = (idx(center + half).ceil() as usize + 1).min(n);
        i.min(j)..j
    }

    /// `sum w sf((y - x - shift) / sd)` and `sum w pdf(...)`, skipping
    /// terms that are numerically 0 or 1.
    #[inline]
    fn tail_sums(&self, y: f64, shift: f64, sd: f64) -> (f64, f64) {
        let inv = 1.0 / sd;
        let r = self.window(y - shift, KERNEL_SD * sd);
        let mut p: f64 = self.ws[r.end..].iter().sum();
        let mut d = 0.0;
        for (&x, &w) in self.xs[r.clone()].iter().zip(&self.ws[r]) {
            let u = (y - x - shift) * inv;
            p += w * normal::sf(u);
            d += w * normal::pdf(u);
        }
        (p, d)
    }
}

/// Unrestricted sub-density of the score at stage `root` (which entered
/// through a proper increment or is the first look).
fn root_density(stages: &[Stage], root: usize, y: f64) -> f64 {
    let s = &stages[root];
    if root == 0 {
        let sd = s.variance.sqrt();
        normal::pdf((y - s.mean_score) / sd) / sd
    } else {
        let p = &stages[root - 1];
        p.convolve_at(y, s.mean_score - p.mean_score, increment_sd(p.variance, s.variance))
    }
}

fn simpson_grid(lo: f64, hi: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / (m - 1) as f64;
    let xs = (0..m).map(|i| lo + h * i as f64).collect();
    let ws = (0..m)
        .map(|i| {
            let c = if i == 0 || i == m - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (xs, ws)
}

/// Points needed so that a grid over `span` resolves an increment of sd `next_sd`.
fn points_for(span: f64, next_sd: Option<f64>, g: Grid) -> usize {
    match next_sd {
        Some(sd) if sd > 0.0 => {
            let needed = (span / (g.spacing * sd)).ceil() as usize + 1;
            odd(needed.clamp(g.m, g.max_points.max(g.m)))
        }
        _ => g.m,
    }
}

fn increment_sd(prev_var: f64, var: f64) -> f64 {
    let d = var - prev_var;
    if d <= DEGENERATE_INCREMENT * var {
        0.0
    } else {
        d.sqrt()
    }
}

/// Propagates through `looks` (all with criticals applied). `all` is the
/// complete sequence, used to size each grid for the increment that follows.
fn propagate(looks: &[Look], g: Grid, all: &[Look]) -> Vec<Stage> {
    let mut stages: Vec<Stage> = Vec::with_capacity(looks.len());
    for (k, look) in looks.iter().enumerate() {
        let sd_marg = look.variance.sqrt();
        let mean_score = look.mean * sd_marg;
        let inc_sd = match stages.last() {
            Some(p) => increment_sd(p.variance, look.variance),
            None => sd_marg,
        };
        let degenerate = inc_sd == 0.0;
        let mut lo = (look.critical * sd_marg).max(mean_score - g.span_sd * sd_marg);
        let hi = mean_score + g.span_sd * sd_marg;
        let empty_prev = stages.last().is_some_and(|p| p.xs.is_empty());
        if degenerate {
            lo = lo.max(stages[k - 1].floor);
        }
        let root = if degenerate { stages[k - 1].root } else { k };
        if lo >= hi || empty_prev {
            stages.push(Stage {
                xs: Vec::new(),
                ws: Vec::new(),
                variance: look.variance,
                mean_score,
                floor: lo,
                root,
            });
            continue;
        }
        // resolve both this stage's own smoothing scale and the next kernel
        let next_sd = all
            .get(k + 1)
            .map(|n| increment_sd(look.variance, n.variance))
            .filter(|&sd| sd > 0.0);
        let scale = match (next_sd, degenerate) {
            (Some(n), false) => Some(n.min(inc_sd)),
            (Some(n), true) => Some(n),
            (None, false) => Some(inc_sd),
            (None, true) => None,
        };
        let n_points = points_for(hi - lo, scale, g);
        let (xs, simpson) = simpson_grid(lo, hi, n_points);
        let ws = if k == 0 {
            xs.iter()
                .zip(&simpson)
                .map(|(&x, &s)| s * normal::pdf((x - mean_score) / sd_marg) / sd_marg)
                .collect()
        } else if degenerate {
            xs.iter()
                .zip(&simpson)
                .map(|(&x, &s)| s * root_density(&stages, root, x))
                .collect()
        } else {
            let prev = &stages[k - 1];
            let shift = mean_score - prev.mean_score;
            xs.iter()
                .zip(&simpson)
                .map(|(&x, &s)| s * prev.convolve_at(x, shift, inc_sd))
                .collect()
        };
        stages.push(Stage {
            xs,
            ws,
            variance: look.variance,
            mean_score,
            floor: lo,
            root,
        });
    }
    stages
}

/// Probability of continuing through `last` with critical `c`, given the
/// stages for all earlier looks.
fn continue_prob(stages: &[Stage], looks: &[Look], last: Look, c: f64, g: Grid) -> f64 {
    let sd_marg = last.variance.sqrt();
    let mean_score = last.mean * sd_marg;
    let y = c * sd_marg;
    let Some(prev) = stages.last() else {
        return normal::sf((y - mean_score) / sd_marg);
    };
    let inc_sd = increment_sd(prev.variance, last.variance);
    if inc_sd > 0.0 {
        return prev.tail_sums(y, mean_score - prev.mean_score, inc_sd).0;
    }
    if c == f64::NEG_INFINITY {
        return prev.mass();
    }
    // Degenerate final increment: integrate the previous density over [y, inf).
    let mut restricted = looks[..stages.len()].to_vec();
    let k = restricted.len() - 1;
    let prev_sd = restricted[k].variance.sqrt();
    restricted.push(Look {
        variance: restricted[k].variance,
        mean: restricted[k].mean,
        critical: (y / prev_sd).max(restricted[k].critical),
    });
    let s = propagate(&restricted, g, &restricted);
    s.last().map_or(0.0, Stage::mass)
}

fn continuation_with(looks: &[Look], g: Grid) -> Vec<f64> {
    let mut out = Vec::with_capacity(looks.len());
    let stages = propagate(&looks[..looks.len() - 1], g, looks);
    for k in 0..looks.len() {
        out.push(continue_prob(&stages[..k], looks, looks[k], looks[k].critical, g));
    }
    out
}

/// Continuation probability through `last` at critical `c` and its
/// derivative in `c`, for a proper final increment.
fn continue_prob_and_slope(stages: &[Stage], last: Look, c: f64) -> (f64, f64) {
    let sd_marg = last.variance.sqrt();
    let mean_score = last.mean * sd_marg;
    let y = c * sd_marg;
    let Some(prev) = stages.last() else {
        let u = (y - mean_score) / sd_marg;
        return (normal::sf(u), -normal::pdf(u));
    };
    let inc_sd = increment_sd(prev.variance, last.variance);
    let (p, d) = prev.tail_sums(y, mean_score - prev.mean_score, inc_sd);
    (p, -d * sd_marg / inc_sd)
}

/// Root of an increasing function on `[lo, hi]` by Newton steps kept inside
/// a shrinking bracket, with bisection whenever a step leaves it.
fn newton(f: impl Fn(f64) -> (f64, f64), start: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = start.clamp(lo, hi);
    for _ in 0..100 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = fx / dfx;
        let mut next = x - step;
        if !(dfx > 0.0) || !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-13 || hi - lo < 1e-12 {
            return next;
        }
        x = next;
    }
    x
}

/// Root of an increasing function on `[lo, hi]`; clamps to the bracket ends.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    if f_lo >= 0.0 {
        return lo;
    }
    if f(hi) <= 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}
