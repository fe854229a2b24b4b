//! Box-constrained L-BFGS (projected two-loop recursion with an Armijo
//! backtracking line search). Bounds may be infinite.

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the projected gradient max-norm drops below this.
    pub gtol: f64,
    /// Stop when the objective drops below this.
    pub f_target: f64,
    /// Stop after this many iterations without relative improvement > ftol.
    pub ftol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { memory: 10, max_iter: 400, gtol: 1e-10, f_target: f64::NEG_INFINITY, ftol: 1e-13 }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Zeroes gradient components that push against an active bound.
fn free_mask(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<bool> {
    (0..x.len())
        .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
        .collect()
}

/// Minimizes `f` starting from `x0`; `fg` returns (value, gradient).
pub fn minimize<F>(mut fg: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut f, mut g) = fg(&x);
    let mut evals = 1;
    let mut s_hist: Vec<Vec<f64>> = vec![];
    let mut y_hist: Vec<Vec<f64>> = vec![];
    let mut stall = 0;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        if f <= opts.f_target {
            break;
        }
        let mask = free_mask(&x, &g, lo, hi);
        let pg: Vec<f64> = g.iter().zip(&mask).map(|(g, &m)| if m { *g } else { 0.0 }).collect();
        if pg.iter().fold(0.0f64, |a, v| a.max(v.abs())) < opts.gtol {
            break;
        }
        // two-loop recursion on the free variables
        let mut q = pg.clone();
        let mut alphas = vec![0.0; s_hist.len()];
        for k in (0..s_hist.len()).rev() {
            let rho = 1.0 / dot(&y_hist[k], &s_hist[k]);
            alphas[k] = rho * dot(&s_hist[k], &q);
            for i in 0..n {
                q[i] -= alphas[k] * y_hist[k][i];
            }
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let gn = dot(&pg, &pg).sqrt();
            q.iter_mut().for_each(|v| *v /= gn.max(1.0));
        }
        for k in 0..s_hist.len() {
            let rho = 1.0 / dot(&y_hist[k], &s_hist[k]);
            let b = rho * dot(&y_hist[k], &q);
            for i in 0..n {
                q[i] += s_hist[k][i] * (alphas[k] - b);
            }
        }
        let mut d: Vec<f64> = q.iter().zip(&mask).map(|(v, &m)| if m { -v } else { 0.0 }).collect();
        if dot(&d, &pg) >= 0.0 {
            // not a descent direction: restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            let gn = dot(&pg, &pg).sqrt().max(1.0);
            d = pg.iter().map(|v| -v / gn).collect();
        }
        let slope = dot(&d, &pg);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            project(&mut xn, lo, hi);
            let (fnew, gnew) = fg(&xn);
            evals += 1;
            if fnew.is_finite() && fnew <= f + 1e-4 * step * slope {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        if (f - fnew).abs() <= opts.ftol * f.abs().max(1e-300) {
            stall += 1;
            if stall >= 3 {
                x = xn;
                f = fnew;
                break;
            }
        } else {
            stall = 0;
        }
        x = xn;
        f = fnew;
        g = gnew;
    }
    LbfgsResult { x, f, iterations: it, evaluations: evals }
}
