//! Plain Nelder-Mead simplex search. Deterministic given the start and
//! scale; callers handle feasibility by projecting trial points inside the
//! objective closure.

pub struct NelderMeadConfig {
    pub max_fevals: usize,
    /// Simplex-diameter stopping tolerance.
    pub xatol: f64,
    /// Function-spread stopping tolerance.
    pub fatol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_fevals: 400,
            xatol: 1e-7,
            fatol: 1e-10,
        }
    }
}

pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub fevals: usize,
    /// Diameter of the final simplex.
    pub simplex_diameter: f64,
    pub converged: bool,
}

pub fn minimize<F>(f: F, x0: &[f64], scale: &[f64], cfg: &NelderMeadConfig) -> NelderMeadResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut fevals = 0;
    let eval = |p: &[f64], fevals: &mut usize| -> f64 {
        *fevals += 1;
        f(p)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        let step = if scale[i] != 0.0 { scale[i] } else { 0.05 };
        p[i] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut fevals)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    loop {
        // order ascending by value, index-stable for determinism
        let mut idx: Vec<usize> = (0..simplex.len()).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        let diameter = simplex
            .iter()
            .skip(1)
            .map(|p| crate::linalg::dist(p, &simplex[0]))
            .fold(0.0f64, f64::max);
        let spread = values[n] - values[0];
        if diameter <= cfg.xatol && spread.abs() <= cfg.fatol {
            return NelderMeadResult {
                x: simplex[0].clone(),
                fx: values[0],
                fevals,
                simplex_diameter: diameter,
                converged: true,
            };
        }
        if fevals >= cfg.max_fevals {
            return NelderMeadResult {
                x: simplex[0].clone(),
                fx: values[0],
                fevals,
                simplex_diameter: diameter,
                converged: false,
            };
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflect: Vec<f64> = (0..n)
            .map(|j| centroid[j] + alpha * (centroid[j] - worst[j]))
            .collect();
        let f_r = eval(&reflect, &mut fevals);

        if f_r < values[0] {
            let expand: Vec<f64> = (0..n)
                .map(|j| centroid[j] + gamma * (centroid[j] - worst[j]))
                .collect();
            let f_e = eval(&expand, &mut fevals);
            if f_e < f_r {
                simplex[n] = expand;
                values[n] = f_e;
            } else {
                simplex[n] = reflect;
                values[n] = f_r;
            }
        } else if f_r < values[n - 1] {
            simplex[n] = reflect;
            values[n] = f_r;
        } else {
            // contraction: outside if the reflection improved on the worst
            let (base, f_base) = if f_r < values[n] {
                (reflect.clone(), f_r)
            } else {
                (worst.clone(), values[n])
            };
            let contract: Vec<f64> = (0..n)
                .map(|j| centroid[j] + rho * (base[j] - centroid[j]))
                .collect();
            let f_c = eval(&contract, &mut fevals);
            if f_c < f_base {
                simplex[n] = contract;
                values[n] = f_c;
            } else {
                // shrink toward the best vertex
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = eval(&simplex[i].clone(), &mut fevals);
                }
            }
        }
    }
}
