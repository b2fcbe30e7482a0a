//! Nelder-Mead simplex minimizer.
//!
//! Stops when the simplex diameter (largest vertex-to-vertex distance in
//! parameter space) drops below `tolerance`, or after `max_iter` iterations.

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl SimplexOptions {
    /// The fitting contract: diameter < 1e-8 or 500 iterations per dimension.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            tolerance: 1e-8,
            max_iter: 500 * dim.max(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub params: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub diameter: f64,
    pub converged: bool,
}

fn diameter(vertices: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            let d2: f64 = vertices[i]
                .iter()
                .zip(&vertices[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

/// Minimizes `f` from `initial`, building the starting simplex by stepping each
/// coordinate by `steps[i]`. Deterministic: identical inputs give identical
/// iterates.
pub fn minimize<F>(f: F, initial: &[f64], steps: &[f64], options: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(initial.len(), steps.len(), "one step per parameter");
    let n = initial.len();
    // NaN losses sort last so a blown-up vertex is always the one replaced.
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    if n == 0 {
        let value = eval(initial);
        return SimplexResult {
            params: Vec::new(),
            value,
            iterations: 0,
            diameter: 0.0,
            converged: true,
        };
    }

    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    vertices.push(initial.to_vec());
    for (i, step) in steps.iter().enumerate() {
        let mut v = initial.to_vec();
        v[i] += step;
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut diam = diameter(&vertices);
    let mut centroid = vec![0.0; n];

    while iterations < options.max_iter {
        // Stable sort keeps tie order deterministic.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        vertices = order.iter().map(|&i| vertices[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        diam = diameter(&vertices);
        if diam < options.tolerance {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &vertices[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&vertices[n])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = along(REFLECT);
        let f_r = eval(&reflected);
        if f_r < values[0] {
            let expanded = along(EXPAND);
            let f_e = eval(&expanded);
            if f_e < f_r {
                vertices[n] = expanded;
                values[n] = f_e;
            } else {
                vertices[n] = reflected;
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            vertices[n] = reflected;
            values[n] = f_r;
            continue;
        }
        // Outside contraction when the reflection beats the worst point,
        // inside contraction otherwise.
        let (candidate, f_c) = if f_r < values[n] {
            let c = along(REFLECT * CONTRACT);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = along(-CONTRACT);
            let fc = eval(&c);
            (c, fc)
        };
        if f_c < values[n].min(f_r) {
            vertices[n] = candidate;
            values[n] = f_c;
            continue;
        }
        let best = vertices[0].clone();
        for i in 1..=n {
            for (x, b) in vertices[i].iter_mut().zip(&best) {
                *x = b + SHRINK * (*x - b);
            }
            values[i] = eval(&vertices[i]);
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty simplex");
    SimplexResult {
        params: vertices[best].clone(),
        value: values[best],
        iterations,
        diameter: diam,
        converged: diam < options.tolerance,
    }
}
