use super::{sigmoid, ClassifierSpec, Fitted};

const MAX_ITER: usize = 10_000;
const TOL: f64 = 1e-8;

/// L2-penalized logistic regression fitted by damped Newton steps on
/// standardized features. The intercept is not penalized.
pub(super) fn fit(spec: &ClassifierSpec, columns: &[Vec<f64>], targets: &[f64], weights: &[f64]) -> Fitted {
    let n = targets.len();
    let p = columns.len();
    let mut means = vec![0.0; p];
    let mut scales = vec![1.0; p];
    for (j, col) in columns.iter().enumerate() {
        let m = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        means[j] = m;
        if var > 0.0 {
            scales[j] = var.sqrt();
        }
    }
    // design with a leading intercept column
    let x: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            std::iter::once(1.0)
                .chain((0..p).map(|j| (columns[j][i] - means[j]) / scales[j]))
                .collect()
        })
        .collect();
    let dim = p + 1;
    let lambda = spec.l2_penalty;
    let objective = |beta: &[f64]| -> f64 {
        let mut loss = 0.0;
        for i in 0..n {
            let z: f64 = dot(&x[i], beta);
            // log(1 + e^z) - y z, computed stably
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            loss += weights[i] * (softplus - targets[i] * z);
        }
        loss + 0.5 * lambda * beta[1..].iter().map(|b| b * b).sum::<f64>()
    };

    let mut beta = vec![0.0; dim];
    let mut current = objective(&beta);
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let mut grad = vec![0.0; dim];
        let mut hess = vec![vec![0.0; dim]; dim];
        for i in 0..n {
            let prob = sigmoid(dot(&x[i], &beta));
            let g = weights[i] * (prob - targets[i]);
            let h = weights[i] * prob * (1.0 - prob);
            for a in 0..dim {
                grad[a] += g * x[i][a];
                let hx = h * x[i][a];
                for b in 0..=a {
                    hess[a][b] += hx * x[i][b];
                }
            }
        }
        for a in 1..dim {
            grad[a] += lambda * beta[a];
            hess[a][a] += lambda;
        }
        for a in 0..dim {
            hess[a][a] += 1e-10;
            for b in 0..a {
                hess[b][a] = hess[a][b];
            }
        }
        let Some(step) = cholesky_solve(&hess, &grad) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b - t * s).collect();
            let value = objective(&trial);
            if value <= current {
                accepted = Some((trial, value));
                break;
            }
            t *= 0.5;
        }
        let Some((next, value)) = accepted else {
            break;
        };
        let max_step = step.iter().map(|s| (t * s).abs()).fold(0.0, f64::max);
        let improvement = current - value;
        beta = next;
        current = value;
        if max_step < TOL || improvement <= 1e-15 * (1.0 + current.abs()) {
            break;
        }
    }

    let coefficients: Vec<f64> = (0..p).map(|j| beta[j + 1] / scales[j]).collect();
    let intercept = beta[0] - coefficients.iter().zip(&means).map(|(c, m)| c * m).sum::<f64>();
    Fitted::Linear {
        intercept,
        coefficients,
        iterations,
    }
}

pub(super) fn score(intercept: f64, coefficients: &[f64], row: &[f64]) -> f64 {
    sigmoid(intercept + dot(coefficients, row))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A`.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_small_system() {
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let x = cholesky_solve(&a, &[2.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1].abs() < 1e-12);
        assert!(cholesky_solve(&[vec![-1.0]], &[1.0]).is_none());
    }

    #[test]
    fn converges_well_before_iteration_cap() {
        let cols = vec![vec![-2.0, -1.0, 0.5, 1.0, 2.0, 0.0]];
        let y = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let spec = ClassifierSpec::linear();
        match fit(&spec, &cols, &y, &[1.0; 6]) {
            Fitted::Linear { iterations, coefficients, .. } => {
                assert!(iterations < 50);
                assert!(coefficients[0] > 0.0);
            }
            _ => unreachable!(),
        }
    }
}
