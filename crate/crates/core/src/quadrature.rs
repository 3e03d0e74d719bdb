//! Gauss-Legendre rules and the composite integrator used for cumulative hazards.

use std::sync::OnceLock;

/// Number of nodes per panel in cumulative-hazard integrals.
pub const PANEL_NODES: usize = 11;
/// Number of equal panels `[jt/n, (j+1)t/n]` over `[0, t]`.
pub const PANELS: usize = 20;

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// `∫_a^b f` with this rule mapped onto `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The shared 11-point rule.
pub fn panel_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_NODES))
}

/// Visits every quadrature node of the composite rule on `[0, t]` as
/// `(node, weight)`; weights already include the panel Jacobian.
pub fn for_each_node(t: f64, mut visit: impl FnMut(f64, f64)) {
    if t <= 0.0 {
        return;
    }
    let rule = panel_rule();
    let h = t / PANELS as f64;
    for j in 0..PANELS {
        let a = j as f64 * h;
        let mid = a + 0.5 * h;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            visit(mid + 0.5 * h * x, 0.5 * h * w);
        }
    }
}

/// `∫_0^t f` by 11-point Gauss-Legendre on 20 equal panels.
pub fn integrate_from_zero(t: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for_each_node(t, |s, w| acc += w * f(s));
    acc
}

/// Composite Gauss-Legendre on `panels` equal panels of `[a, b]`.
pub fn composite(rule: &GaussLegendre, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|j| rule.integrate(a + j as f64 * h, a + (j + 1) as f64 * h, &mut f))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_point_rule_matches_tabulated_values() {
        let rule = GaussLegendre::new(11);
        // largest node and its weight, Abramowitz & Stegun table 25.4
        assert!((rule.nodes[10] - 0.978_228_658_146_056_99).abs() < 1e-15);
        assert!((rule.weights[10] - 0.055_668_567_116_173_67).abs() < 1e-15);
        assert!((rule.weights[5] - 0.272_925_086_777_900_63).abs() < 1e-15);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_degree_21_polynomials() {
        let rule = GaussLegendre::new(11);
        let v = rule.integrate(0.0, 2.0, |x| x.powi(21));
        let exact = 2f64.powi(22) / 22.0;
        assert!((v - exact).abs() / exact < 1e-13);
    }

    #[test]
    fn composite_from_zero() {
        assert_eq!(integrate_from_zero(0.0, |_| 1.0), 0.0);
        let v = integrate_from_zero(3.0, |s| (-s).exp());
        assert!((v - (1.0 - (-3f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn large_rules_stay_accurate() {
        let rule = GaussLegendre::new(64);
        let v = rule.integrate(-1.0, 1.0, |x| x.cos());
        assert!((v - 2.0 * 1f64.sin()).abs() < 1e-14);
    }
}
