//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wlrgs::counting::Observation;
use wlrgs::survival::Arm;
use wlrgs::wlrt::WeightScheme;

/// Weighted log-rank `(U, V)` from one 2x2 table per distinct event time,
/// with every count taken by scanning the raw observations.
pub fn brute_force_wlr(obs: &[Observation], scheme: &WeightScheme) -> (f64, f64) {
    let mut times: Vec<f64> = obs.iter().filter(|o| o.event).map(|o| o.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let count = |pred: &dyn Fn(&Observation) -> bool| obs.iter().filter(|o| pred(o)).count() as f64;
    let at_risk = |t: f64, arm: Arm| count(&|o| o.arm == arm && o.time >= t);
    let deaths = |t: f64, arm: Arm| count(&|o| o.arm == arm && o.event && o.time == t);

    // pooled product-limit value over event times satisfying `keep`
    let pooled = |keep: &dyn Fn(f64) -> bool| {
        times
            .iter()
            .filter(|&&s| keep(s))
            .map(|&s| {
                let n = at_risk(s, Arm::Control) + at_risk(s, Arm::Experimental);
                let d = deaths(s, Arm::Control) + deaths(s, Arm::Experimental);
                1.0 - d / n
            })
            .product::<f64>()
    };

    let (mut u, mut v) = (0.0, 0.0);
    for &t in &times {
        let n0 = at_risk(t, Arm::Control);
        let n1 = at_risk(t, Arm::Experimental);
        let d1 = deaths(t, Arm::Experimental);
        let d = deaths(t, Arm::Control) + d1;
        let n = n0 + n1;
        let s_left = pooled(&|s| s < t);
        let w = match *scheme {
            WeightScheme::LogRank => 1.0,
            WeightScheme::FlemingHarrington01 => 1.0 - s_left,
            WeightScheme::ModestWeight { t_star } => {
                let s_star = pooled(&|s| s <= t_star);
                1.0 / s_left.max(s_star)
            }
        };
        u += w * (d1 - n1 * d / n);
        if n > 1.0 {
            v += w * w * n0 * n1 * d * (n - d) / (n * n * (n - 1.0));
        }
    }
    (u, v)
}

/// Random small dataset with ties on a coarse time grid.
pub fn random_dataset(rng: &mut ChaCha8Rng, max_n: usize) -> Vec<Observation> {
    loop {
        let n = rng.random_range(2..=max_n);
        let obs: Vec<Observation> = (0..n)
            .map(|_| Observation {
                time: rng.random_range(1..=12) as f64 * 0.5,
                event: rng.random_bool(0.7),
                arm: if rng.random_bool(0.5) { Arm::Experimental } else { Arm::Control },
            })
            .collect();
        let has = |a: Arm| obs.iter().any(|o| o.arm == a);
        if has(Arm::Control) && has(Arm::Experimental) && obs.iter().any(|o| o.event) {
            return obs;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre rule on `[a, b]`.
pub fn integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, panels: usize, rule: &[(f64, f64)]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for &(x, w) in rule {
            total += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * total
}

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper normal tail via the complementary error function.
pub fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `P(Z_1 > c_1, ..., Z_K > c_K)` for `K` in {1, 2, 3} where `Z_k = S_k / sqrt(v_k)`,
/// `S` has independent Gaussian increments, and `E[Z_k] = theta_k`.
/// Integrates the score density directly with tensor Gauss-Legendre rules.
pub fn mvn_continue(v: &[f64], theta: &[f64], c: &[f64]) -> f64 {
    let rule = gauss_legendre(20);
    let k = v.len();
    let m: Vec<f64> = theta.iter().zip(v).map(|(t, v)| t * v.sqrt()).collect();
    let b: Vec<f64> = c.iter().zip(v).map(|(c, v)| c * v.sqrt()).collect();
    let sd1 = v[0].sqrt();
    let span = 10.0;
    let density = |x: f64, mean: f64, sd: f64| phi((x - mean) / sd) / sd;
    match k {
        1 => upper_tail((b[0] - m[0]) / sd1),
        2 => {
            let sd2 = (v[1] - v[0]).sqrt();
            let hi = m[0] + span * sd1;
            let lo = b[0].max(m[0] - span * sd1);
            integrate(
                &mut |s1| density(s1, m[0], sd1) * upper_tail((b[1] - s1 - (m[1] - m[0])) / sd2),
                lo,
                hi,
                400,
                &rule,
            )
        }
        3 => {
            let sd2 = (v[1] - v[0]).sqrt();
            let sd3 = (v[2] - v[1]).sqrt();
            let hi1 = m[0] + span * sd1;
            let lo1 = b[0].max(m[0] - span * sd1);
            integrate(
                &mut |s1| {
                    let centre = s1 + m[1] - m[0];
                    let lo2 = b[1].max(centre - span * sd2);
                    let hi2 = centre + span * sd2;
                    density(s1, m[0], sd1)
                        * integrate(
                            &mut |s2| {
                                density(s2, centre, sd2) * upper_tail((b[2] - s2 - (m[2] - m[1])) / sd3)
                            },
                            lo2,
                            hi2,
                            80,
                            &rule,
                        )
                },
                lo1,
                hi1,
                80,
                &rule,
            )
        }
        _ => panic!("oracle supports up to three looks"),
    }
}

/// Standard normal draw by Box-Muller.
pub fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
