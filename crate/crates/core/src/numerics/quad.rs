//! Quadrature rules.

use nalgebra::DMatrix;

/// Composite Simpson rule for samples on an even number of uniform intervals.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    assert!(n >= 2 && n.is_multiple_of(2), "simpson needs an even number of intervals");
    let mut s = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Gauss-Lobatto nodes on [0, 1] together with the matrix S with
/// S[j][l] = integral from 0 to tau_j of the l-th Lagrange basis polynomial.
#[derive(Clone, Debug)]
pub struct Collocation {
    pub nodes: Vec<f64>,
    pub integration: Vec<Vec<f64>>,
}

impl Collocation {
    /// Five-point Lobatto rule; polynomial interpolation of degree 4.
    pub fn lobatto5() -> Self {
        let r = (3.0f64 / 7.0).sqrt();
        let nodes: Vec<f64> = [-1.0, -r, 0.0, r, 1.0].iter().map(|x| 0.5 * (x + 1.0)).collect();
        let n = nodes.len();
        let vander = DMatrix::from_fn(n, n, |j, p| nodes[j].powi(p as i32));
        let inv = vander.try_inverse().expect("lobatto nodes are distinct");
        // Column l of inv holds the monomial coefficients of the l-th Lagrange polynomial.
        let integration = (0..n)
            .map(|j| {
                (0..n)
                    .map(|l| (0..n).map(|p| inv[(p, l)] * nodes[j].powi(p as i32 + 1) / (p as f64 + 1.0)).sum())
                    .collect()
            })
            .collect();
        Self { nodes, integration }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubics() {
        let h = 0.1;
        let v: Vec<f64> = (0..=10).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&v, h) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn collocation_integrates_quartics() {
        let c = Collocation::lobatto5();
        let f: Vec<f64> = c.nodes.iter().map(|t| t.powi(4) - 2.0 * t).collect();
        for (j, &tj) in c.nodes.iter().enumerate() {
            let approx: f64 = c.integration[j].iter().zip(&f).map(|(s, v)| s * v).sum();
            let exact = tj.powi(5) / 5.0 - tj * tj;
            assert!((approx - exact).abs() < 1e-13);
        }
    }
}
