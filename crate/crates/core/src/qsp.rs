//! Quantum signal processing: phase-factor sequences whose 2x2 products
//! realize polynomial transforms of a scalar signal, plus an optimizer
//! that finds phases approximating the sign function on [x_min, 1].
//!
//! Convention: U(x) = e^{i phi_0 Z} prod_k [ W(x) e^{i phi_k Z} ] with
//! W(x) = [[x, i sqrt(1-x^2)], [i sqrt(1-x^2), x]]. All-zero phases of
//! length d+1 give <0|U|0> = T_d(x), the Chebyshev polynomial.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type M2 = [[Complex64; 2]; 2];

const M2_IDENTITY: M2 = [
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
];

fn m2_mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[Complex64::ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

fn signal_matrix(x: f64) -> M2 {
    let s = (1.0 - x * x).max(0.0).sqrt();
    [
        [Complex64::new(x, 0.0), Complex64::new(0.0, s)],
        [Complex64::new(0.0, s), Complex64::new(x, 0.0)],
    ]
}

fn z_rotation(phi: f64) -> M2 {
    [
        [Complex64::from_polar(1.0, phi), Complex64::ZERO],
        [Complex64::ZERO, Complex64::from_polar(1.0, -phi)],
    ]
}

/// Full 2x2 signal-processing unitary for the given phases at signal x.
pub fn qsp_unitary(phases: &[f64], x: f64) -> M2 {
    assert!(!phases.is_empty(), "need at least one phase");
    let w = signal_matrix(x);
    let mut u = z_rotation(phases[0]);
    for &phi in &phases[1..] {
        u = m2_mul(&u, &w);
        u = m2_mul(&u, &z_rotation(phi));
    }
    u
}

/// The polynomial value <0|U|0> realized by the phases at signal x.
pub fn qsp_value(phases: &[f64], x: f64) -> Complex64 {
    qsp_unitary(phases, x)[0][0]
}

/// Chebyshev polynomial of the first kind via the three-term recurrence.
pub fn chebyshev_t(degree: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    let mut cur = x;
    if degree == 0 {
        return prev;
    }
    for _ in 1..degree {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Base quintic of the recursive sign family: odd, monotone on [0, 1],
/// fixes 1 with zero slope, so composition sharpens it toward sign(x).
pub fn sign_quintic(x: f64) -> f64 {
    x * (15.0 - x * x * (10.0 - 3.0 * x * x)) / 8.0
}

/// r-fold composition of the base quintic (degree 5^r).
pub fn sign_poly_recursive(order: usize, x: f64) -> f64 {
    let mut y = x;
    for _ in 0..order {
        y = sign_quintic(y);
    }
    y
}

pub const MAX_RECURSIVE_ORDER: usize = 4;

/// A converged (or best-effort) phase sequence approximating sign(x).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleSet {
    pub phases: Vec<f64>,
    pub degree: usize,
    /// Left edge of the plateau the phases were optimized for.
    pub x_min: f64,
    /// Requested plateau tolerance.
    pub eps_target: f64,
    /// Measured max |P(x) - 1| over a dense validation grid on [x_min, 1].
    pub sup_error: f64,
    pub converged: bool,
}

impl AngleSet {
    pub fn value(&self, x: f64) -> Complex64 {
        qsp_value(&self.phases, x)
    }
}

#[derive(Debug, Clone)]
pub struct AngleSearchConfig {
    pub x_min: f64,
    pub eps: f64,
    /// Forces a degree instead of the automatic schedule (made odd).
    pub degree: Option<usize>,
    pub seed: u64,
}

impl AngleSearchConfig {
    pub fn new(x_min: f64, eps: f64, seed: u64) -> AngleSearchConfig {
        AngleSearchConfig { x_min, eps, degree: None, seed }
    }
}

const MAX_DEGREE: usize = 1401;
const RESTARTS_PER_DEGREE: usize = 3;
const MAX_ESCALATIONS: usize = 6;

/// Starting degree for a plateau edge delta and tolerance eps; the
/// erf-based sign constructions need d on the order of
/// (1/delta) log(1/(eps delta)).
fn suggested_degree(delta: f64, eps: f64) -> usize {
    let d = (1.0 / delta) * (2.0 / (eps * delta)).ln();
    let d = d.ceil().max(3.0) as usize;
    d | 1
}

/// Optimizes symmetric phase factors so that <0|U|0> tracks 1 on
/// [x_min, 1] (and -1 on the mirror interval, by odd parity). Escalates
/// the degree until the measured plateau error meets eps or the attempt
/// budget runs out; the returned set carries `converged` accordingly.
pub fn find_sign_angles(cfg: &AngleSearchConfig) -> Result<AngleSet> {
    if !(cfg.x_min > 0.0 && cfg.x_min < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "plateau edge must lie in (0, 1), got {}",
            cfg.x_min
        )));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must lie in (0, 1), got {}",
            cfg.eps
        )));
    }

    let mut degree = match cfg.degree {
        Some(d) => {
            if d < 1 {
                return Err(Error::InvalidArgument("degree must be positive".into()));
            }
            d | 1
        }
        None => suggested_degree(cfg.x_min, cfg.eps),
    };

    let mut best: Option<AngleSet> = None;
    for escalation in 0..=MAX_ESCALATIONS {
        if degree > MAX_DEGREE {
            break;
        }
        for restart in 0..RESTARTS_PER_DEGREE {
            let noise_seed = cfg
                .seed
                .wrapping_add(escalation as u64 * 1000 + restart as u64);
            let phases = optimize_symmetric(degree, cfg.x_min, cfg.eps, restart, noise_seed);
            let sup = plateau_error(&phases, cfg.x_min);
            let candidate = AngleSet {
                phases,
                degree,
                x_min: cfg.x_min,
                eps_target: cfg.eps,
                sup_error: sup,
                converged: sup <= cfg.eps,
            };
            let better = best.as_ref().map_or(true, |b| candidate.sup_error < b.sup_error);
            if better {
                best = Some(candidate);
            }
            if best.as_ref().is_some_and(|b| b.converged) {
                return Ok(best.unwrap());
            }
        }
        if cfg.degree.is_some() {
            break;
        }
        degree = (degree * 13 / 10 + 2) | 1;
    }
    let best = best.expect("at least one optimization attempt ran");
    eprintln!(
        "warning: sign-phase search stopped at degree {} with plateau error {:.3e} (target {:.1e})",
        best.degree, best.sup_error, best.eps_target
    );
    Ok(best)
}

/// Max |P(x) - 1| over a dense grid on [x_min, 1], endpoints included.
fn plateau_error(phases: &[f64], x_min: f64) -> f64 {
    let degree = phases.len() - 1;
    let samples = (degree * 4).max(200);
    let mut worst = 0.0f64;
    for i in 0..=samples {
        let x = x_min + (1.0 - x_min) * i as f64 / samples as f64;
        let err = (qsp_value(phases, x) - Complex64::ONE).norm();
        worst = worst.max(err);
    }
    worst
}

/// Objective and gradient of F = mean_j |P(x_j) - t|^2 over the free
/// half of a symmetric phase vector, with t slightly inside the unit
/// disk so the |P| <= 1 ceiling does not pin the optimum to a boundary.
/// Prefix/suffix 2x2 products give the exact gradient in
/// O(grid * degree).
struct SignObjective {
    grid: Vec<f64>,
    degree: usize,
    target: Complex64,
}

impl SignObjective {
    fn new(degree: usize, x_min: f64, slack: f64) -> SignObjective {
        let free = (degree + 1) / 2;
        // The polynomial is a trig polynomial in theta = arccos x, so a
        // theta-uniform grid keeps the Jacobian well conditioned.
        let theta_max = x_min.clamp(-1.0, 1.0).acos();
        let nyquist = (1.5 * degree as f64 * theta_max / std::f64::consts::PI).ceil() as usize;
        let count = (free + 8).max(nyquist).max(24);
        let grid = (0..count)
            .map(|j| {
                let theta = theta_max * (j as f64 + 0.5) / count as f64;
                theta.cos()
            })
            .collect();
        SignObjective { grid, degree, target: Complex64::new(1.0 - slack, 0.0) }
    }

    fn expand(&self, free: &[f64]) -> Vec<f64> {
        let d = self.degree;
        let mut phases = vec![0.0; d + 1];
        for (i, &v) in free.iter().enumerate() {
            phases[i] = v;
            phases[d - i] = v;
        }
        phases
    }

    fn eval(&self, free: &[f64]) -> (f64, Vec<f64>) {
        let phases = self.expand(free);
        let d = self.degree;
        let mut value = 0.0;
        let mut grad_full = vec![0.0; d + 1];
        let mut prefix: Vec<M2> = Vec::with_capacity(d + 1);
        let mut suffix: Vec<M2> = vec![M2_IDENTITY; d + 1];

        for &x in &self.grid {
            let w = signal_matrix(x);
            prefix.clear();
            prefix.push(z_rotation(phases[0]));
            for &phi in &phases[1..] {
                let m = m2_mul(prefix.last().unwrap(), &w);
                prefix.push(m2_mul(&m, &z_rotation(phi)));
            }
            suffix[d] = M2_IDENTITY;
            for k in (0..d).rev() {
                let m = m2_mul(&w, &z_rotation(phases[k + 1]));
                suffix[k] = m2_mul(&m, &suffix[k + 1]);
            }
            let p = prefix[d][0][0];
            let residual = p - self.target;
            value += residual.norm_sqr();
            for k in 0..=d {
                // dP/dphi_k = i (A_k[0][0] B_k[0][0] - A_k[0][1] B_k[1][0])
                let dp = Complex64::new(0.0, 1.0)
                    * (prefix[k][0][0] * suffix[k][0][0] - prefix[k][0][1] * suffix[k][1][0]);
                grad_full[k] += 2.0 * (residual.conj() * dp).re;
            }
        }
        let scale = 1.0 / self.grid.len() as f64;
        value *= scale;
        let free_len = free.len();
        let mut grad = vec![0.0; free_len];
        for k in 0..=d {
            grad[k.min(d - k)] += grad_full[k] * scale;
        }
        (value, grad)
    }
}

/// Optimizes the free symmetric phases for a plateau edge `x_min`. For
/// narrow plateaus a direct run from the standard start stalls, so this
/// walks a homotopy: solve on a wide plateau first, then shrink the
/// edge geometrically at fixed degree, warm-starting each stage.
fn optimize_symmetric(degree: usize, x_min: f64, eps: f64, restart: usize, seed: u64) -> Vec<f64> {
    let free_len = (degree + 1) / 2;

    // Known-good start: pi/4 at both ends, zero inside. Restarts jitter it.
    let mut free = vec![0.0; free_len];
    free[0] = std::f64::consts::FRAC_PI_4;
    if restart > 0 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let scale = 0.01 * restart as f64;
        for v in free.iter_mut() {
            *v += scale * (rng.random::<f64>() - 0.5);
        }
    }

    let mut edges = vec![x_min];
    let mut edge = x_min;
    while edge < 0.25 {
        edge /= 0.8;
        edges.push(edge.min(0.3));
    }
    edges.reverse();

    let slack = (0.3 * eps).min(1e-3);
    let last = edges.len() - 1;
    for (i, &e) in edges.iter().enumerate() {
        let objective = SignObjective::new(degree, e, slack);
        let iters = if i == last { (4 * degree).max(600) } else { 150 };
        free = lbfgs(&objective, free, iters);
    }
    SignObjective::new(degree, x_min, slack).expand(&free)
}

/// L-BFGS with Armijo backtracking, returning the improved free phases.
fn lbfgs(objective: &SignObjective, start: Vec<f64>, max_iters: usize) -> Vec<f64> {
    let memory = 10usize;
    let mut x = start;
    let (mut f, mut g) = objective.eval(&x);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    for _ in 0..max_iters {
        let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-13 || f < 1e-26 {
            break;
        }
        // Two-loop recursion for the search direction.
        let mut q = g.clone();
        let mut alphas = vec![0.0; s_hist.len()];
        for i in (0..s_hist.len()).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &q);
            alphas[i] = a;
            axpy(&mut q, -a, &y_hist[i]);
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, y) / dot(y, y).max(1e-300);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..s_hist.len() {
            let b = rho_hist[i] * dot(&y_hist[i], &q);
            axpy(&mut q, alphas[i] - b, &s_hist[i]);
        }
        let dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        let dir = if slope >= 0.0 {
            // Fall back to steepest descent if curvature info went bad.
            slope = -gnorm * gnorm;
            g.iter().map(|v| -v).collect()
        } else {
            dir
        };

        // Armijo backtracking.
        let mut step = 1.0f64;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x
                .iter()
                .zip(&dir)
                .map(|(xv, dv)| xv + step * dv)
                .collect();
            let (ft, gt) = objective.eval(&trial);
            if ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else { break };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if s_hist.len() == memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(y);
        }
        x = xn;
        f = fn_;
        g = gn;
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

/// Where the sign values come from for building the filtered spectrum.
#[derive(Debug, Clone)]
pub enum SignApproximant {
    /// Phase factors; usable by both the circuit and the closed-form paths.
    Angles(Arc<AngleSet>),
    /// Composed quintic of the given order; closed-form path only, since
    /// it has no phase-factor realization here.
    Recursive { order: usize },
    /// Infinitely sharp sign; closed-form path, or circuit path with the
    /// ideal spectrum substituted directly.
    Exact,
}

impl SignApproximant {
    pub fn recursive(order: usize) -> Result<SignApproximant> {
        if order < 1 || order > MAX_RECURSIVE_ORDER {
            return Err(Error::InvalidArgument(format!(
                "recursive order must be 1..={MAX_RECURSIVE_ORDER}, got {order}"
            )));
        }
        Ok(SignApproximant::Recursive { order })
    }

    /// Value applied to a (scaled) spectral entry. Complex because the
    /// phase-factor polynomial is complex-valued in general.
    pub fn apply(&self, x: f64) -> Complex64 {
        match self {
            SignApproximant::Angles(set) => set.value(x),
            SignApproximant::Recursive { order } => {
                Complex64::new(sign_poly_recursive(*order, x), 0.0)
            }
            SignApproximant::Exact => {
                let s = if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                Complex64::new(s, 0.0)
            }
        }
    }

    pub fn circuit_capable(&self) -> bool {
        matches!(self, SignApproximant::Angles(_) | SignApproximant::Exact)
    }
}

/// Cache of optimized angle sets keyed by bucketed plateau edge, so many
/// detection instances with similar spectra share one optimization.
#[derive(Default)]
pub struct AngleCache {
    entries: Mutex<HashMap<(i32, u64), Arc<AngleSet>>>,
}

impl AngleCache {
    pub fn new() -> AngleCache {
        AngleCache::default()
    }

    /// Rounds x_min DOWN onto a geometric grid so a cached set's plateau
    /// always covers the requested one.
    fn bucket(x_min: f64) -> (i32, f64) {
        // Grid: 2^(-i/4), i >= 0; clamp to a sane floor.
        let i = (-4.0 * x_min.log2()).ceil().max(0.0) as i32;
        (i, (2.0f64).powf(-f64::from(i) / 4.0).min(1.0 - 1e-9))
    }

    pub fn get_or_find(&self, x_min: f64, eps: f64, seed: u64) -> Result<Arc<AngleSet>> {
        let (key, edge) = Self::bucket(x_min);
        let eps_key = eps.to_bits();
        if let Some(hit) = self.entries.lock().unwrap().get(&(key, eps_key)) {
            return Ok(hit.clone());
        }
        let cfg = AngleSearchConfig::new(edge.min(x_min), eps, seed);
        let set = Arc::new(find_sign_angles(&cfg)?);
        self.entries
            .lock()
            .unwrap()
            .insert((key, eps_key), set.clone());
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_phases_give_chebyshev() {
        for d in [1usize, 2, 5, 8, 13] {
            let phases = vec![0.0; d + 1];
            for i in 0..=100 {
                let x = -1.0 + 2.0 * i as f64 / 100.0;
                let p = qsp_value(&phases, x);
                assert_abs_diff_eq!(p.re, chebyshev_t(d, x), epsilon = 1e-10);
                assert_abs_diff_eq!(p.im, 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn qsp_unitary_is_unitary_and_has_parity() {
        let phases = [0.3, -0.7, 0.1, 0.4, -0.2, 0.3];
        for i in 0..=20 {
            let x = -1.0 + 2.0 * i as f64 / 20.0;
            let u = qsp_unitary(&phases, x);
            // Unitarity of the product.
            let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
            assert_abs_diff_eq!(det.norm(), 1.0, epsilon = 1e-12);
            let row0 = u[0][0].norm_sqr() + u[0][1].norm_sqr();
            assert_abs_diff_eq!(row0, 1.0, epsilon = 1e-12);
            // Odd parity: d = 5 phases-1, so P(-x) = -P(x).
            let p_neg = qsp_value(&phases, -x);
            let p_pos = qsp_value(&phases, x);
            assert!((p_neg + p_pos).norm() < 1e-12);
        }
    }

    #[test]
    fn quintic_fixes_one_and_is_odd_monotone() {
        assert_abs_diff_eq!(sign_quintic(1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sign_quintic(-1.0), -1.0, epsilon = 1e-15);
        // Derivative at 1 vanishes: (15 - 30x^2 + 15x^4)/8 at x=1.
        let h = 1e-6;
        let slope = (sign_quintic(1.0) - sign_quintic(1.0 - h)) / h;
        assert!(slope.abs() < 1e-4);
        let mut prev = 0.0;
        for i in 1..=100 {
            let x = i as f64 / 100.0;
            let y = sign_quintic(x);
            assert!(y > prev, "quintic must increase on [0,1]");
            assert_abs_diff_eq!(sign_quintic(-x), -y, epsilon = 1e-15);
            prev = y;
        }
    }

    #[test]
    fn recursive_orders_sharpen_strictly() {
        // Sup error over [0.1, 1]; monotone composition attains it at 0.1.
        let mut errors = Vec::new();
        for order in 1..=MAX_RECURSIVE_ORDER {
            let mut sup = 0.0f64;
            for i in 0..=400 {
                let x = 0.1 + 0.9 * i as f64 / 400.0;
                sup = sup.max((sign_poly_recursive(order, x) - 1.0).abs());
            }
            errors.push(sup);
        }
        for pair in errors.windows(2) {
            assert!(
                pair[1] < pair[0],
                "composition must sharpen: {:?}",
                errors
            );
        }
        // Frozen hand-computed value: one application at x = 0.1.
        assert_abs_diff_eq!(sign_poly_recursive(1, 0.1), 0.1490037 / 0.8, epsilon = 1e-6);
    }

    #[test]
    fn optimizer_finds_low_error_phases_on_wide_plateau() {
        let cfg = AngleSearchConfig::new(0.3, 1e-3, 11);
        let set = find_sign_angles(&cfg).unwrap();
        assert!(set.converged, "plateau error {}", set.sup_error);
        assert!(set.sup_error <= 1e-3);
        assert_eq!(set.degree % 2, 1);
        // Odd polynomial: mirror plateau tracks -1.
        for i in 0..=50 {
            let x = 0.3 + 0.7 * i as f64 / 50.0;
            let err = (set.value(-x) + Complex64::ONE).norm();
            assert!(err <= 1.1 * set.sup_error + 1e-12);
        }
        // Symmetry of the phase vector.
        let d = set.degree;
        for k in 0..=d {
            assert_abs_diff_eq!(set.phases[k], set.phases[d - k], epsilon = 1e-12);
        }
    }

    #[test]
    fn optimizer_is_deterministic_per_seed() {
        let cfg = AngleSearchConfig::new(0.25, 1e-2, 5);
        let a = find_sign_angles(&cfg).unwrap();
        let b = find_sign_angles(&cfg).unwrap();
        assert_eq!(a.phases, b.phases);
        assert_eq!(a.degree, b.degree);
    }

    #[test]
    fn forced_degree_is_respected() {
        let mut cfg = AngleSearchConfig::new(0.3, 1e-2, 3);
        cfg.degree = Some(29);
        let set = find_sign_angles(&cfg).unwrap();
        assert_eq!(set.degree, 29);
        assert_eq!(set.phases.len(), 30);
    }

    #[test]
    fn bad_arguments_are_rejected() {
        assert!(find_sign_angles(&AngleSearchConfig::new(0.0, 1e-2, 1)).is_err());
        assert!(find_sign_angles(&AngleSearchConfig::new(1.0, 1e-2, 1)).is_err());
        assert!(find_sign_angles(&AngleSearchConfig::new(0.3, 0.0, 1)).is_err());
        assert!(SignApproximant::recursive(0).is_err());
        assert!(SignApproximant::recursive(5).is_err());
    }

    #[test]
    fn angle_cache_reuses_buckets_and_covers_requests() {
        let cache = AngleCache::new();
        let a = cache.get_or_find(0.43, 1e-2, 7).unwrap();
        let b = cache.get_or_find(0.45, 1e-2, 7).unwrap();
        // Same bucket: 0.43 and 0.45 both round down to 2^(-5/4)~0.4204.
        assert!(Arc::ptr_eq(&a, &b));
        assert!(a.x_min <= 0.43 + 1e-12);
        let c = cache.get_or_find(0.2, 1e-2, 7).unwrap();
        assert!(!Arc::ptr_eq(&a, &c));
        assert!(c.x_min <= 0.2);
    }

    #[test]
    fn angle_set_roundtrips_through_json() {
        let cfg = AngleSearchConfig::new(0.35, 1e-2, 9);
        let set = find_sign_angles(&cfg).unwrap();
        let text = serde_json::to_string(&set).unwrap();
        let back: AngleSet = serde_json::from_str(&text).unwrap();
        assert_eq!(set.degree, back.degree);
        // The JSON float path can round at the final ulp; that shifts a
        // polynomial value by ~1e-16, far below any tolerance in use.
        assert_eq!(set.phases.len(), back.phases.len());
        for (a, b) in set.phases.iter().zip(&back.phases) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn exact_approximant_signs_and_zeroes() {
        let e = SignApproximant::Exact;
        assert_eq!(e.apply(0.4).re, 1.0);
        assert_eq!(e.apply(-0.4).re, -1.0);
        assert_eq!(e.apply(0.0).re, 0.0);
        assert!(e.circuit_capable());
        assert!(!SignApproximant::recursive(2).unwrap().circuit_capable());
    }
}
