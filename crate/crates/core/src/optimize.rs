//! Derivative-free optimizers: golden-section search for the per-pixel
//! likelihood and Nelder-Mead simplex descent for the calibration fit.

use alloc::vec;
use alloc::vec::Vec;

/// 1/phi, the fraction by which golden-section search shrinks its interval.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenSection {
    /// Stop when the bracket width is below `rel_tol * |x|`.
    pub rel_tol: f64,
    /// Absolute floor on the bracket width, needed when the maximizer is 0.
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for GoldenSection {
    fn default() -> Self {
        GoldenSection { rel_tol: 1e-6, abs_tol: 1e-12, max_iter: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

impl GoldenSection {
    /// Maximizes a unimodal `f` over `[lo, hi]`. The end points are candidates
    /// too, so a maximum on the boundary is found exactly.
    pub fn maximize<F: FnMut(f64) -> f64>(&self, mut f: F, lo: f64, hi: f64) -> Maximum {
        let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let f_lo = f(a);
        let f_hi = f(b);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = f(c);
        let mut fd = f(d);
        let mut iterations = 0;
        while iterations < self.max_iter {
            let mid = 0.5 * (a + b);
            if b - a <= (self.rel_tol * mid.abs()).max(self.abs_tol) {
                break;
            }
            if fc >= fd || fd.is_nan() {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = f(d);
            }
            iterations += 1;
        }
        let mut best = if fc >= fd { Maximum { x: c, value: fc, iterations } } else { Maximum { x: d, value: fd, iterations } };
        if f_lo > best.value {
            best = Maximum { x: lo.min(hi), value: f_lo, iterations };
        }
        if f_hi > best.value {
            best = Maximum { x: lo.max(hi), value: f_hi, iterations };
        }
        best
    }
}

/// Nelder-Mead simplex minimizer with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2) and the
/// ordering and acceptance rules of Lagarias et al.
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMead {
    /// Initial simplex edge along each coordinate.
    pub initial_step: f64,
    /// Convergence requires the spread of function values to be below this...
    pub f_tol: f64,
    /// ...and every vertex to be within this distance (max norm) of the best.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { initial_step: 0.1, f_tol: 1e-12, x_tol: 1e-8, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        if n == 0 {
            let value = f(x0);
            return Minimum { x: Vec::new(), value, iterations: 0, evaluations: 1, converged: true };
        }
        let mut evaluations = 0usize;
        let mut eval = |x: &[f64], evaluations: &mut usize| {
            *evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] += self.initial_step;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();
        let mut order: Vec<usize> = (0..=n).collect();

        let mut centroid = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut trial2 = vec![0.0; n];
        let mut iterations = 0;
        let mut converged = false;

        loop {
            // stable sort keeps earlier (older) vertices first on ties
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let best = order[0];
            let worst = order[n];
            let second_worst = order[n - 1];

            let f_spread = order.iter().map(|&i| (values[i] - values[best]).abs()).fold(0.0, f64::max);
            let x_spread = order
                .iter()
                .flat_map(|&i| simplex[i].iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if f_spread <= self.f_tol && x_spread <= self.x_tol {
                converged = true;
                break;
            }
            if iterations >= self.max_iter {
                break;
            }
            iterations += 1;

            centroid.iter_mut().for_each(|c| *c = 0.0);
            for &i in &order[..n] {
                for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                    *c += v;
                }
            }
            centroid.iter_mut().for_each(|c| *c /= n as f64);

            let along = |out: &mut [f64], centroid: &[f64], from: &[f64], coef: f64| {
                for ((o, c), w) in out.iter_mut().zip(centroid).zip(from) {
                    *o = c + coef * (c - w);
                }
            };

            along(&mut trial, &centroid, &simplex[worst], 1.0);
            let f_reflect = eval(&trial, &mut evaluations);

            if f_reflect < values[best] {
                along(&mut trial2, &centroid, &simplex[worst], 2.0);
                let f_expand = eval(&trial2, &mut evaluations);
                if f_expand < f_reflect {
                    simplex[worst].copy_from_slice(&trial2);
                    values[worst] = f_expand;
                } else {
                    simplex[worst].copy_from_slice(&trial);
                    values[worst] = f_reflect;
                }
                continue;
            }
            if f_reflect < values[second_worst] {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = f_reflect;
                continue;
            }
            if f_reflect < values[worst] {
                // outside contraction
                along(&mut trial2, &centroid, &simplex[worst], 0.5);
                let f_contract = eval(&trial2, &mut evaluations);
                if f_contract <= f_reflect {
                    simplex[worst].copy_from_slice(&trial2);
                    values[worst] = f_contract;
                    continue;
                }
            } else {
                // inside contraction
                along(&mut trial2, &centroid, &simplex[worst], -0.5);
                let f_contract = eval(&trial2, &mut evaluations);
                if f_contract < values[worst] {
                    simplex[worst].copy_from_slice(&trial2);
                    values[worst] = f_contract;
                    continue;
                }
            }
            // shrink towards the best vertex
            let anchor = simplex[best].clone();
            for &i in &order[1..] {
                for (v, a) in simplex[i].iter_mut().zip(&anchor) {
                    *v = a + 0.5 * (*v - a);
                }
                values[i] = eval(&simplex[i], &mut evaluations);
            }
        }

        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        Minimum { x: simplex[best].clone(), value: values[best], iterations, evaluations, converged }
    }

    /// Runs [`minimize`](Self::minimize) repeatedly from the previous optimum
    /// until a restart no longer improves the objective. Guards against
    /// collapsed simplices.
    pub fn minimize_with_restarts<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64], max_restarts: usize) -> Minimum {
        let mut best = self.minimize(&mut f, x0);
        for _ in 0..max_restarts {
            let next = self.minimize(&mut f, &best.x);
            let improved = next.value < best.value - self.f_tol;
            let evaluations = best.evaluations + next.evaluations;
            let iterations = best.iterations + next.iterations;
            if next.value <= best.value {
                best = Minimum { evaluations, iterations, ..next };
            } else {
                best.evaluations = evaluations;
                best.iterations = iterations;
            }
            if !improved {
                break;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn golden_finds_interior_maximum() {
        let m = GoldenSection::default().maximize(|x| -(x - 2.5) * (x - 2.5), 0.0, 10.0);
        assert_abs_diff_eq!(m.x, 2.5, epsilon = 1e-5);
    }

    #[test]
    fn golden_finds_boundary_maximum() {
        let m = GoldenSection::default().maximize(|x| -x, 0.0, 4.0);
        assert_eq!(m.x, 0.0);
        let m = GoldenSection::default().maximize(|x| x, 0.0, 4.0);
        assert_eq!(m.x, 4.0);
    }

    #[test]
    fn golden_tolerates_infinite_values() {
        // log-likelihood that is -inf at the left end
        let m = GoldenSection::default().maximize(|x| if x <= 0.0 { f64::NEG_INFINITY } else { x.ln() - x }, 0.0, 5.0);
        assert_abs_diff_eq!(m.x, 1.0, epsilon = 1e-5);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let nm = NelderMead { initial_step: 0.5, ..Default::default() };
        let m = nm.minimize(rosen, &[-1.2, 1.0]);
        assert!(m.converged);
        assert_abs_diff_eq!(m.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(m.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn nelder_mead_quadratic_5d() {
        let target = [0.3, -1.0, 2.0, 0.0, 5.0];
        let f = |x: &[f64]| x.iter().zip(&target).enumerate().map(|(i, (a, b))| (i as f64 + 1.0) * (a - b).powi(2)).sum::<f64>();
        let m = NelderMead::default().minimize_with_restarts(f, &[0.0; 5], 3);
        for (a, b) in m.x.iter().zip(&target) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn nelder_mead_reports_iteration_cap() {
        let nm = NelderMead { max_iter: 5, ..Default::default() };
        let m = nm.minimize(|x: &[f64]| x[0] * x[0] + x[1] * x[1], &[3.0, 4.0]);
        assert!(!m.converged);
        assert!(m.value <= 25.0);
    }
}
