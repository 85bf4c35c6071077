//! Small quadrature and search helpers shared across modules.

/// Six-point Gauss–Legendre nodes on [-1, 1].
const GL6_NODES: [f64; 6] = [
    -0.932_469_514_203_152_1,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152_1,
];
const GL6_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_3,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691_0,
    0.467_913_934_572_691_0,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_3,
];
const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Gauss–Legendre rule used for panels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaussRule {
    Four,
    Six,
}

impl GaussRule {
    fn table(self) -> (&'static [f64], &'static [f64]) {
        match self {
            GaussRule::Four => (&GL4_NODES, &GL4_WEIGHTS),
            GaussRule::Six => (&GL6_NODES, &GL6_WEIGHTS),
        }
    }

    /// Integrates `f` over `[a, b]` with a single panel.
    pub fn panel<F: FnMut(f64) -> f64>(self, a: f64, b: f64, mut f: F) -> f64 {
        let (nodes, weights) = self.table();
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        nodes
            .iter()
            .zip(weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// `n` points geometrically spaced from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (l, r) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (l + (r - l) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Mean of samples on a uniform periodic grid (the periodic trapezoid rule on [0, 1)).
pub fn periodic_mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(c, fc), (d, fd), (x, fx)].into_iter().fold(
        (x, fx),
        |best, cand| if cand.1 < best.1 { cand } else { best },
    )
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
