//! Derivative-free simplex search (reflect / expand / contract / shrink) inside a box.
//!
//! Trial points are clamped onto the box, so the objective is only ever evaluated at
//! feasible points.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Stop once the best objective value is at or below this.
    pub objective_tolerance: f64,
    /// Stop once every vertex is within this fraction of the box width of the best vertex.
    pub diameter_tolerance: f64,
    /// Initial edge length as a fraction of the box width.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            objective_tolerance: 1e-12,
            diameter_tolerance: 1e-6,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ObjectiveTolerance,
    SimplexCollapsed,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    fn width(&self) -> f64 {
        self.upper - self.lower
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` over the box starting from `x0` (clamped into the box).
pub fn minimize<F>(
    mut f: F,
    x0: &[f64],
    bounds: &[Bounds],
    options: &SimplexOptions,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), bounds.len(), "one bound per coordinate");
    let n = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for (xi, b) in x.iter_mut().zip(bounds) {
            *xi = b.clamp(*xi);
        }
    };
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    clamp(&mut start);
    let start_value = eval(&start);
    if start_value <= options.objective_tolerance {
        return SimplexResult {
            x: start,
            value: start_value,
            iterations: 0,
            evaluations,
            reason: StopReason::ObjectiveTolerance,
        };
    }

    let mut vertices: Vec<(Vec<f64>, f64)> = vec![(start.clone(), start_value)];
    for (i, b) in bounds.iter().enumerate() {
        let mut v = start.clone();
        let step = options.initial_step * b.width();
        v[i] = if v[i] + step <= b.upper {
            v[i] + step
        } else {
            v[i] - step
        };
        clamp(&mut v);
        let fv = eval(&v);
        vertices.push((v, fv));
    }

    let mut iterations = 0;
    let reason = loop {
        vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
        if vertices[0].1 <= options.objective_tolerance {
            break StopReason::ObjectiveTolerance;
        }
        let collapsed = vertices[1..].iter().all(|(v, _)| {
            v.iter()
                .zip(&vertices[0].0)
                .zip(bounds)
                .all(|((a, b), bd)| (a - b).abs() <= options.diameter_tolerance * bd.width())
        });
        if collapsed {
            break StopReason::SimplexCollapsed;
        }
        if iterations >= options.max_iterations {
            break StopReason::MaxIterations;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| vertices[..n].iter().map(|(v, _)| v[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = vertices[n].clone();
        let along = |t: f64| {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clamp(&mut p);
            p
        };

        let reflected = along(REFLECT);
        let fr = eval(&reflected);
        if fr < vertices[0].1 {
            let expanded = along(EXPAND);
            let fe = eval(&expanded);
            vertices[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < vertices[n - 1].1 {
            vertices[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst.1 {
            let c = along(CONTRACT);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = along(-CONTRACT);
            let fc = eval(&c);
            (c, fc)
        };
        if fc < worst.1.min(fr) {
            vertices[n] = (contracted, fc);
            continue;
        }
        let best = vertices[0].0.clone();
        for vertex in vertices.iter_mut().skip(1) {
            let mut p: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + SHRINK * (v - b))
                .collect();
            clamp(&mut p);
            let fp = eval(&p);
            *vertex = (p, fp);
        }
    };

    let (x, value) = vertices.swap_remove(0);
    SimplexResult {
        x,
        value,
        iterations,
        evaluations,
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize, lo: f64, hi: f64) -> Vec<Bounds> {
        vec![
            Bounds {
                lower: lo,
                upper: hi
            };
            n
        ]
    }

    #[test]
    fn finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + 10.0 * (x[1] + 0.5).powi(2);
        let r = minimize(
            f,
            &[4.0, 3.0],
            &unit_box(2, -5.0, 5.0),
            &SimplexOptions::default(),
        );
        assert!((r.x[0] - 1.5).abs() < 1e-5, "{r:?}");
        assert!((r.x[1] + 0.5).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn one_dimensional() {
        let f = |x: &[f64]| ((x[0] - 12.3) / 12.3).powi(2);
        let r = minimize(
            f,
            &[20.0],
            &unit_box(1, 1.0, 50.0),
            &SimplexOptions::default(),
        );
        assert!((r.x[0] - 12.3).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            max_iterations: 2000,
            ..Default::default()
        };
        let r = minimize(f, &[-1.2, 1.0], &unit_box(2, -2.0, 2.0), &opts);
        assert!(
            (r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3,
            "{r:?}"
        );
    }

    #[test]
    fn respects_box() {
        let f = |x: &[f64]| (x[0] - 10.0).powi(2) + x[1].powi(2);
        let r = minimize(
            f,
            &[0.0, 0.5],
            &unit_box(2, -1.0, 1.0),
            &SimplexOptions::default(),
        );
        assert!((r.x[0] - 1.0).abs() < 1e-6);
        assert!(r.x.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn already_optimal_start_is_untouched() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2);
        let r = minimize(
            f,
            &[3.0],
            &unit_box(1, 0.0, 10.0),
            &SimplexOptions::default(),
        );
        assert_eq!(r.iterations, 0);
        assert_eq!(r.x, vec![3.0]);
        assert_eq!(r.reason, StopReason::ObjectiveTolerance);
    }

    #[test]
    fn iteration_cap() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            max_iterations: 5,
            ..Default::default()
        };
        let r = minimize(f, &[-1.2, 1.0], &unit_box(2, -2.0, 2.0), &opts);
        assert_eq!(r.reason, StopReason::MaxIterations);
        assert_eq!(r.iterations, 5);
    }
}
