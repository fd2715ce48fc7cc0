/// Outcome of a Nelder–Mead minimization.
#[derive(Clone, Debug)]
pub struct Simplex {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

/// Derivative-free Nelder–Mead minimization started from an axis-aligned
/// simplex of edge `step` around `x0`. Non-finite objective values are
/// treated as `+inf`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, max_evals: usize, ftol: f64, xtol: f64) -> Simplex {
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let n = x0.len();
    let mut evaluations = 1;
    if n == 0 {
        let value = eval(x0);
        return Simplex { x: Vec::new(), value, evaluations, converged: true, history: vec![value] };
    }
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut vals = vec![eval(x0)];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        vals.push(eval(&p));
        pts.push(p);
        evaluations += 1;
    }
    let mut history = Vec::new();
    let mut converged = false;
    while evaluations < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        history.push(vals[0]);

        let fspread = vals[n] - vals[0];
        let xspread = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if vals[0].is_finite() && fspread <= ftol * (vals[0].abs() + ftol) && xspread <= xtol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (w - c)).collect() };

        let xr = along(-1.0);
        let fr = eval(&xr);
        evaluations += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            evaluations += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        evaluations += 1;
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = pts[i].iter().zip(&pts[0]).map(|(p, b)| b + 0.5 * (p - b)).collect();
            vals[i] = eval(&shrunk);
            pts[i] = shrunk;
            evaluations += 1;
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    history.push(vals[best]);
    Simplex { x: pts[best].clone(), value: vals[best], evaluations, converged, history }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(rosen, &[-1.2, 1.0], 0.5, 20_000, 1e-14, 1e-10);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn history_never_increases() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.3).powi(2)).sum::<f64>() + x[0].sin();
        let r = nelder_mead(f, &[2.0, -1.0, 0.5], 0.7, 5000, 1e-12, 1e-9);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_dimensional() {
        let r = nelder_mead(|_| 4.0, &[], 1.0, 10, 1e-12, 1e-12);
        assert_eq!(r.value, 4.0);
        assert!(r.converged);
    }
}
