//! Beta distributions truncated to an upper interval `[lower, 1]`.
//!
//! Sampling is by inverse CDF on the regularized incomplete beta function.
//! The work is done on the reflected variable `y = 1 - x ~ Beta(b, a)`
//! restricted to `[0, 1 - lower]`, so the retained mass is a lower tail and
//! never suffers cancellation. When that mass is below [`TINY_MASS`] the CDF
//! is rebuilt in log space on a fine grid with log-linear cells.

use rand::Rng;
use statrs::function::beta::{beta_reg, ln_beta};

/// Below this retained mass the log-space grid replaces `beta_reg`.
pub const TINY_MASS: f64 = 1e-250;

const GRID_CELLS: usize = 8192;

/// `ln` of the Beta(a, b) density at `x`.
pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    xlogy(a - 1.0, x) + xlogy(b - 1.0, 1.0 - x) - ln_beta(a, b)
}

/// `c * ln(y)` with the convention `0 * ln(0) = 0`.
fn xlogy(c: f64, y: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * y.ln()
    }
}

/// `ln P(X >= lower)` for `X ~ Beta(a, b)`.
pub fn ln_upper_mass(a: f64, b: f64, lower: f64) -> f64 {
    if lower <= 0.0 {
        return 0.0;
    }
    if lower >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let c = 1.0 - lower;
    let mass = beta_reg(b, a, c);
    if mass > TINY_MASS {
        mass.ln()
    } else {
        LogGrid::new(b, a, c).ln_total
    }
}

/// Draws `X ~ Beta(a, b)` conditioned on `X >= lower`.
pub fn sample_truncated_beta<R: Rng + ?Sized>(a: f64, b: f64, lower: f64, rng: &mut R) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    let lower = lower.clamp(0.0, 1.0);
    if lower >= 1.0 {
        return 1.0;
    }
    let c = 1.0 - lower;
    let u: f64 = rng.random();
    let mass = beta_reg(b, a, c);
    let y = if mass > TINY_MASS {
        invert_lower_tail(b, a, c, u * mass)
    } else {
        LogGrid::new(b, a, c).invert(u)
    };
    (1.0 - y).clamp(lower, 1.0)
}

/// Solves `I_y(a, b) = target` for `y` in `[0, hi]` by safeguarded Newton.
fn invert_lower_tail(a: f64, b: f64, hi: f64, target: f64) -> f64 {
    let (mut lo, mut up) = (0.0f64, hi);
    let lnb = ln_beta(a, b);
    let mut y = 0.5 * hi;
    for _ in 0..200 {
        let f = beta_reg(a, b, y) - target;
        if f == 0.0 {
            return y;
        }
        if f < 0.0 {
            lo = y;
        } else {
            up = y;
        }
        if up - lo <= 4.0 * f64::EPSILON * up.max(f64::MIN_POSITIVE) {
            break;
        }
        let dens = ((a - 1.0) * y.ln() + (b - 1.0) * (-y).ln_1p() - lnb).exp();
        let mut next = if dens.is_finite() && dens > 0.0 {
            y - f / dens
        } else {
            f64::NAN
        };
        if !(next > lo && next < up) {
            next = 0.5 * (lo + up);
        }
        if (next - y).abs() <= 2.0 * f64::EPSILON * y {
            return next;
        }
        y = next;
    }
    0.5 * (lo + up)
}

/// Piecewise log-linear approximation of the Beta(a, b) density on `[0, hi]`.
struct LogGrid {
    hi: f64,
    /// Log density at each grid node.
    nodes: Vec<f64>,
    /// Log cumulative mass at the right end of each cell.
    ln_cum: Vec<f64>,
    ln_total: f64,
}

fn ln_cell_mass(h: f64, g0: f64, g1: f64) -> f64 {
    let d = g1 - g0;
    let shape = if d.abs() < 1e-10 {
        (0.5 * d).ln_1p()
    } else if d > 0.0 {
        d + (-(-d).exp_m1()).ln() - d.ln()
    } else {
        (-d.exp_m1()).ln() - (-d).ln()
    };
    h.ln() + g0 + shape
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl LogGrid {
    fn new(a: f64, b: f64, hi: f64) -> Self {
        let h = hi / GRID_CELLS as f64;
        let lnb = ln_beta(a, b);
        let g = |y: f64| (a - 1.0) * y.ln() + (b - 1.0) * (-y).ln_1p() - lnb;
        let nodes: Vec<f64> = (0..=GRID_CELLS)
            .map(|k| {
                let y = if k == 0 { h * 1e-9 } else { h * k as f64 };
                g(y.min(hi))
            })
            .collect();
        let mut ln_cum = Vec::with_capacity(GRID_CELLS);
        let mut acc = f64::NEG_INFINITY;
        for k in 0..GRID_CELLS {
            acc = ln_add(acc, ln_cell_mass(h, nodes[k], nodes[k + 1]));
            ln_cum.push(acc);
        }
        LogGrid {
            hi,
            nodes,
            ln_total: acc,
            ln_cum,
        }
    }

    fn invert(&self, u: f64) -> f64 {
        let h = self.hi / GRID_CELLS as f64;
        let ln_target = u.ln() + self.ln_total;
        let k = self.ln_cum.partition_point(|&c| c < ln_target).min(GRID_CELLS - 1);
        let ln_before = if k == 0 {
            f64::NEG_INFINITY
        } else {
            self.ln_cum[k - 1]
        };
        let ln_cell = ln_cell_mass(h, self.nodes[k], self.nodes[k + 1]);
        // fraction of this cell's mass that lies below the target
        let v = if ln_before == f64::NEG_INFINITY {
            (ln_target - ln_cell).exp()
        } else {
            let rem = ln_target + (-(ln_before - ln_target).exp()).ln_1p();
            (rem - ln_cell).exp()
        }
        .clamp(0.0, 1.0);
        let d = self.nodes[k + 1] - self.nodes[k];
        let s = if d.abs() < 1e-10 {
            v * h
        } else if d > 0.0 {
            h * (1.0 + (v + (1.0 - v) * (-d).exp()).ln() / d)
        } else {
            h * (v * d.exp_m1()).ln_1p() / d
        };
        (k as f64 * h + s.clamp(0.0, h)).min(self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Composite Simpson quadrature of `f` on `[lo, hi]`.
    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for k in 1..n {
            let x = lo + h * k as f64;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    /// Mean and variance of Beta(a, b) on [lower, 1] by quadrature.
    fn truncated_moments(a: f64, b: f64, lower: f64) -> (f64, f64) {
        let dens = |x: f64| x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0);
        let z = simpson(dens, lower, 1.0, 20_000);
        let m1 = simpson(|x| x * dens(x), lower, 1.0, 20_000) / z;
        let m2 = simpson(|x| x * x * dens(x), lower, 1.0, 20_000) / z;
        (m1, m2 - m1 * m1)
    }

    #[test]
    fn truncated_mean_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (a, b, lower) = (6.0, 6.0, 0.5);
        let (mean, var) = truncated_moments(a, b, lower);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_truncated_beta(a, b, lower, &mut rng)).collect();
        assert!(draws.iter().all(|&x| (lower..=1.0).contains(&x)));
        let m = draws.iter().sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        assert!((m - mean).abs() < 3.0 * se, "mean {m} vs {mean} (se {se})");
    }

    #[test]
    fn untruncated_and_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Beta(4, 1) has mean 0.8
        let n = 50_000;
        let m = (0..n).map(|_| sample_truncated_beta(4.0, 1.0, 0.0, &mut rng)).sum::<f64>() / n as f64;
        let se = (4.0 / (25.0 * 6.0) / n as f64).sqrt();
        assert!((m - 0.8).abs() < 3.0 * se);
        assert_eq!(sample_truncated_beta(2.0, 2.0, 1.0, &mut rng), 1.0);
        assert_eq!(ln_upper_mass(2.0, 3.0, 0.0), 0.0);
    }

    #[test]
    fn near_one_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = sample_truncated_beta(1.0, 1.0, 0.999_999, &mut rng);
            assert!((0.999_999..=1.0).contains(&x));
        }
    }

    #[test]
    fn tiny_mass_uses_log_grid() {
        // Beta(2, 2001) keeps ~1e-600 of its mass above 0.5
        let (a, b, lower) = (2.0, 2001.0, 0.5);
        assert!(beta_reg(b, a, 1.0 - lower) < TINY_MASS);
        let ln_m = ln_upper_mass(a, b, lower);
        // Leading-order tail: density at `lower` over the log-slope there.
        let slope = (b - 1.0) / (1.0 - lower) - (a - 1.0) / lower;
        let approx = ln_beta_pdf(lower, a, b) - slope.ln();
        assert!((ln_m - approx).abs() < 1e-2, "{ln_m} vs {approx}");

        // The conditional law above `lower` is close to lower + Exp(slope).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let excess: Vec<f64> = (0..n)
            .map(|_| sample_truncated_beta(a, b, lower, &mut rng) - lower)
            .collect();
        assert!(excess.iter().all(|&e| e >= 0.0));
        let m = excess.iter().sum::<f64>() / n as f64;
        let expected = 1.0 / slope;
        assert!((m - expected).abs() < 0.05 * expected, "{m} vs {expected}");
    }

    #[test]
    fn ln_mass_agrees_with_quadrature() {
        for &(a, b, lower) in &[(3.0, 2.0, 0.7), (1.0, 1.0, 0.95), (10.0, 40.0, 0.3)] {
            let q = simpson(|x| ln_beta_pdf(x, a, b).exp(), lower, 1.0, 20_000).ln();
            assert!((ln_upper_mass(a, b, lower) - q).abs() < 1e-8, "{a} {b} {lower}: {} vs {q}", ln_upper_mass(a, b, lower));
        }
    }
}
