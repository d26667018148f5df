//! Small dense linear-algebra helpers shared by the geometry modules.

use nalgebra::{DMatrix, DVector};

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Pad so the SVD returns a full set of right singular vectors.
    let mut padded = DMatrix::zeros(m.nrows().max(cols), cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let scale = svd.singular_values.max().max(1.0);
    let basis: Vec<DVector<f64>> = (0..cols)
        .filter(|&i| svd.singular_values[i] <= tol * scale)
        .map(|i| v_t.row(i).transpose())
        .collect();
    columns(&basis, cols)
}

/// Numerical rank.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let scale = s.max().max(1e-300);
    s.iter().filter(|&&x| x > tol * scale).count()
}

/// Stacks column vectors into a matrix with `dim` rows (allowing zero columns).
pub fn columns(vs: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, vs.len());
    for (j, v) in vs.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Gram–Schmidt on the columns of `m`, dropping dependent ones.
pub fn orthonormalize(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for j in 0..m.ncols() {
        let mut v = m.column(j).into_owned();
        for _ in 0..2 {
            for q in &out {
                let p = q.dot(&v);
                v -= q * p;
            }
        }
        let n = v.norm();
        if n > tol * m.column(j).norm().max(1e-300) {
            out.push(v / n);
        }
    }
    columns(&out, m.nrows())
}

/// Minimum-norm solution of `a x = b` via the pseudo-inverse.
pub fn min_norm_solution(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-12).ok()
}

/// Ordinary least squares for `y ≈ intercept + slope·x`; returns
/// `(slope, intercept, residuals)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, Vec<f64>)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    Some((slope, intercept, residuals))
}

/// Nonnegative least squares `min ‖A x − b‖, x ≥ 0` (Lawson–Hanson).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm().max(1.0) * b.norm().max(1.0);
    for _outer in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        for _inner in 0..(3 * n + 10) {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = a.select_columns(idx.iter());
            let z_sub = match min_norm_solution(&sub, b) {
                Some(z) => z,
                None => break,
            };
            if z_sub.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (p, &k) in idx.iter().enumerate() {
                    x[k] = z_sub[p];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (p, &k) in idx.iter().enumerate() {
                if z_sub[p] <= 0.0 {
                    let denom = x[k] - z_sub[p];
                    if denom > 0.0 {
                        alpha = alpha.min(x[k] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (p, &k) in idx.iter().enumerate() {
                x[k] += alpha * (z_sub[p] - x[k]);
                if x[k] <= 1e-15 {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    x
}

/// Point of minimum Euclidean norm in the convex hull of `points`
/// (Wolfe's algorithm); returns the point.
pub fn min_norm_in_hull(points: &[DVector<f64>]) -> DVector<f64> {
    assert!(!points.is_empty());
    let dim = points[0].len();
    let eps = 1e-12;
    let mut start = 0;
    for (i, p) in points.iter().enumerate() {
        if p.norm_squared() < points[start].norm_squared() {
            start = i;
        }
    }
    let mut active = vec![start];
    let mut weights = vec![1.0];
    let mut x = points[start].clone();
    for _ in 0..(50 * points.len() + 100) {
        let (j, best) = points
            .iter()
            .enumerate()
            .map(|(j, p)| (j, x.dot(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if x.norm_squared() - best <= eps * x.norm_squared().max(eps) || active.contains(&j) {
            break;
        }
        active.push(j);
        weights.push(0.0);
        loop {
            // Affine minimizer over the active set.
            let m = active.len();
            let mut sys = DMatrix::zeros(m + 1, m + 1);
            let mut rhs = DVector::zeros(m + 1);
            for a in 0..m {
                for b in 0..m {
                    sys[(a, b)] = points[active[a]].dot(&points[active[b]]);
                }
                sys[(a, m)] = 1.0;
                sys[(m, a)] = 1.0;
            }
            rhs[m] = 1.0;
            let sol = match sys.clone().lu().solve(&rhs) {
                Some(s) => s,
                None => match min_norm_solution(&sys, &rhs) {
                    Some(s) => s,
                    None => break,
                },
            };
            let alpha: Vec<f64> = (0..m).map(|a| sol[a]).collect();
            if alpha.iter().all(|&a| a > eps) {
                weights = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for a in 0..m {
                if alpha[a] <= eps {
                    let d = weights[a] - alpha[a];
                    if d > 0.0 {
                        theta = theta.min(weights[a] / d);
                    }
                }
            }
            for a in 0..m {
                weights[a] = theta * alpha[a] + (1.0 - theta) * weights[a];
            }
            let mut k = 0;
            while k < active.len() {
                if weights[k] <= eps {
                    active.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            if active.is_empty() {
                break;
            }
        }
        let total: f64 = weights.iter().sum();
        x = DVector::zeros(dim);
        for (a, &k) in active.iter().enumerate() {
            x += &points[k] * (weights[a] / total);
        }
    }
    x
}
