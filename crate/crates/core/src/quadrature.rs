//! Gauss-Legendre rules, panel decompositions and cumulative (Volterra-type)
//! integrals with exponential kernels.
//!
//! A panel set covers an interval `[start, end]` with panels that each carry
//! the same `p`-point Gauss-Legendre rule. Functions are represented by their
//! values at the panel nodes; inside a panel they are treated as the degree
//! `p - 1` interpolating polynomial.

use std::sync::Arc;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

/// Gauss-Legendre rule on the reference interval `[-1, 1]`, nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss rule needs at least one node");
        if n == 1 {
            return Self {
                nodes: vec![0.0],
                weights: vec![2.0],
            };
        }
        let rule = GaussLegendre::new(n.try_into().expect("n >= 2"));
        let mut pairs = rule.into_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }

    pub fn integrate<F>(&self, a: f64, b: f64, mut f: F) -> Complex64
    where
        F: FnMut(f64) -> Complex64,
    {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }

    /// Integrates along the straight segment from `a` to `b` in the complex plane.
    pub fn integrate_segment<F>(&self, a: Complex64, b: Complex64, mut f: F) -> Complex64
    where
        F: FnMut(Complex64) -> Complex64,
    {
        let mid = (a + b) * 0.5;
        let half = (b - a) * 0.5;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| f(mid + half * t) * w)
            .sum::<Complex64>()
            * half
    }
}

/// Reference data for one panel: Gauss nodes plus interpolation and
/// cumulative-integration matrices for the Lagrange basis on those nodes.
#[derive(Debug)]
pub struct PanelRule {
    pub rule: GaussRule,
    bary: Vec<f64>,
    /// `right[j][k] = ∫_{t_j}^{1} ℓ_k(t) dt`
    right: Vec<Vec<f64>>,
    /// `left[j][k] = ∫_{-1}^{t_j} ℓ_k(t) dt`
    left: Vec<Vec<f64>>,
}

impl PanelRule {
    pub fn new(p: usize) -> Self {
        let rule = GaussRule::new(p);
        let bary = barycentric_weights(&rule.nodes);
        let mut right = vec![vec![0.0; p]; p];
        let mut left = vec![vec![0.0; p]; p];
        for j in 0..p {
            let tj = rule.nodes[j];
            for (t, w) in rule.mapped(tj, 1.0) {
                let row = lagrange_row(&rule.nodes, &bary, t);
                for k in 0..p {
                    right[j][k] += w * row[k];
                }
            }
            for (t, w) in rule.mapped(-1.0, tj) {
                let row = lagrange_row(&rule.nodes, &bary, t);
                for k in 0..p {
                    left[j][k] += w * row[k];
                }
            }
        }
        Self {
            rule,
            bary,
            right,
            left,
        }
    }

    pub fn order(&self) -> usize {
        self.rule.len()
    }

    /// Values `ℓ_k(t)` of every Lagrange basis polynomial at reference point `t`.
    pub fn lagrange_at(&self, t: f64) -> Vec<f64> {
        lagrange_row(&self.rule.nodes, &self.bary, t)
    }

    pub fn interpolate(&self, values: &[Complex64], t: f64) -> Complex64 {
        self.lagrange_at(t)
            .iter()
            .zip(values)
            .map(|(&l, &v)| v * l)
            .sum()
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|j| {
            let prod: f64 = (0..n)
                .filter(|&k| k != j)
                .map(|k| nodes[j] - nodes[k])
                .product();
            1.0 / prod
        })
        .collect()
}

fn lagrange_row(nodes: &[f64], bary: &[f64], t: f64) -> Vec<f64> {
    if let Some(hit) = nodes.iter().position(|&x| x == t) {
        let mut row = vec![0.0; nodes.len()];
        row[hit] = 1.0;
        return row;
    }
    let terms: Vec<f64> = nodes
        .iter()
        .zip(bary)
        .map(|(&x, &b)| b / (t - x))
        .collect();
    let denom: f64 = terms.iter().sum();
    terms.into_iter().map(|v| v / denom).collect()
}

/// An interval split into panels sharing one reference rule.
#[derive(Debug, Clone)]
pub struct PanelSet {
    pub rule: Arc<PanelRule>,
    pub edges: Vec<f64>,
}

impl PanelSet {
    /// Builds panels on `[start, end]` that respect every cut point strictly
    /// inside the interval and have length at most `max_len`.
    pub fn new(rule: Arc<PanelRule>, start: f64, end: f64, cuts: &[f64], max_len: f64) -> Self {
        assert!(end > start);
        let mut fixed: Vec<f64> = vec![start];
        fixed.extend(cuts.iter().copied().filter(|&c| c > start && c < end));
        fixed.push(end);
        fixed.sort_by(f64::total_cmp);
        fixed.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
        let mut edges = vec![fixed[0]];
        for w in fixed.windows(2) {
            let len = w[1] - w[0];
            let n = if max_len.is_finite() && max_len > 0.0 {
                (len / max_len).ceil().max(1.0) as usize
            } else {
                1
            };
            for i in 1..=n {
                edges.push(if i == n {
                    w[1]
                } else {
                    w[0] + len * i as f64 / n as f64
                });
            }
        }
        Self { rule, edges }
    }

    /// Uniform panels on `[start, end]`.
    pub fn uniform(rule: Arc<PanelRule>, start: f64, end: f64, count: usize) -> Self {
        let count = count.max(1);
        let edges = (0..=count)
            .map(|i| start + (end - start) * i as f64 / count as f64)
            .collect();
        Self { rule, edges }
    }

    pub fn panel_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    pub fn node_count(&self) -> usize {
        self.panel_count() * self.order()
    }

    pub fn panel(&self, k: usize) -> (f64, f64) {
        (self.edges[k], self.edges[k + 1])
    }

    /// All nodes and weights, panel by panel, left to right.
    pub fn nodes_and_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(self.node_count());
        let mut ws = Vec::with_capacity(self.node_count());
        for k in 0..self.panel_count() {
            let (a, b) = self.panel(k);
            for (x, w) in self.rule.rule.mapped(a, b) {
                xs.push(x);
                ws.push(w);
            }
        }
        (xs, ws)
    }

    /// `∫_start^end f` for a function given at the nodes.
    pub fn integrate_nodes(&self, f: &[Complex64]) -> Complex64 {
        let (_, ws) = self.nodes_and_weights();
        f.iter().zip(ws).map(|(&v, w)| v * w).sum()
    }

    /// `V(t) = ∫_t^end e^{iω(s - t)} f(s) ds` at every node, plus the value at `start`.
    pub fn right_exp_cumulative(&self, f: &[Complex64], omega: Complex64) -> (Vec<Complex64>, Complex64) {
        let p = self.order();
        let m = self.panel_count();
        assert_eq!(f.len(), p * m);
        let i = Complex64::i();
        let rule = &self.rule;
        let mut out = vec![Complex64::new(0.0, 0.0); p * m];
        // value of V at the right end of the current panel
        let mut tail = Complex64::new(0.0, 0.0);
        let mut at_start = Complex64::new(0.0, 0.0);
        for k in (0..m).rev() {
            let (a, b) = self.panel(k);
            let half = 0.5 * (b - a);
            let nodes: Vec<f64> = rule.rule.nodes.iter().map(|t| 0.5 * (a + b) + half * t).collect();
            let g: Vec<Complex64> = (0..p)
                .map(|l| (i * omega * (nodes[l] - b)).exp() * f[k * p + l])
                .collect();
            for j in 0..p {
                let partial: Complex64 = (0..p).map(|l| g[l] * rule.right[j][l]).sum::<Complex64>() * half;
                out[k * p + j] = (i * omega * (b - nodes[j])).exp() * (partial + tail);
            }
            let full: Complex64 = (0..p).map(|l| g[l] * rule.rule.weights[l]).sum::<Complex64>() * half;
            tail = (i * omega * (b - a)).exp() * (full + tail);
            if k == 0 {
                at_start = tail;
            }
        }
        (out, at_start)
    }

    /// `V(t) = ∫_start^t e^{iω(t - s)} f(s) ds` at every node, plus the value at `end`.
    pub fn left_exp_cumulative(&self, f: &[Complex64], omega: Complex64) -> (Vec<Complex64>, Complex64) {
        let p = self.order();
        let m = self.panel_count();
        assert_eq!(f.len(), p * m);
        let i = Complex64::i();
        let rule = &self.rule;
        let mut out = vec![Complex64::new(0.0, 0.0); p * m];
        let mut head = Complex64::new(0.0, 0.0);
        for k in 0..m {
            let (a, b) = self.panel(k);
            let half = 0.5 * (b - a);
            let nodes: Vec<f64> = rule.rule.nodes.iter().map(|t| 0.5 * (a + b) + half * t).collect();
            let g: Vec<Complex64> = (0..p)
                .map(|l| (i * omega * (a - nodes[l])).exp() * f[k * p + l])
                .collect();
            for j in 0..p {
                let partial: Complex64 = (0..p).map(|l| g[l] * rule.left[j][l]).sum::<Complex64>() * half;
                out[k * p + j] = (i * omega * (nodes[j] - a)).exp() * (partial + head);
            }
            let full: Complex64 = (0..p).map(|l| g[l] * rule.rule.weights[l]).sum::<Complex64>() * half;
            head = (i * omega * (b - a)).exp() * (full + head);
        }
        (out, head)
    }

    /// Interpolates node data at an arbitrary point of the covered interval.
    pub fn interpolate(&self, values: &[Complex64], x: f64) -> Complex64 {
        let k = self.locate(x);
        let (a, b) = self.panel(k);
        let t = (2.0 * x - a - b) / (b - a);
        let p = self.order();
        self.rule.interpolate(&values[k * p..(k + 1) * p], t)
    }

    fn locate(&self, x: f64) -> usize {
        let m = self.panel_count();
        match self.edges[1..m].iter().position(|&e| x < e) {
            Some(k) => k,
            None => m - 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let rule = GaussRule::new(6);
        let v = rule.integrate(0.0, 2.0, |x| c(x.powi(11)));
        assert_abs_diff_eq!(v.re, 2f64.powi(12) / 12.0, epsilon = 1e-9);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cumulative_matrices_are_exact_for_low_degree() {
        let pr = PanelRule::new(8);
        for (j, &t) in pr.rule.nodes.iter().enumerate() {
            // f(t) = t^3 ; ∫_t^1 = (1 - t^4)/4
            let r: f64 = (0..8).map(|k| pr.right[j][k] * pr.rule.nodes[k].powi(3)).sum();
            assert_abs_diff_eq!(r, (1.0 - t.powi(4)) / 4.0, epsilon = 1e-14);
            let l: f64 = (0..8).map(|k| pr.left[j][k] * pr.rule.nodes[k].powi(3)).sum();
            assert_abs_diff_eq!(l, (t.powi(4) - 1.0) / 4.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn exponential_cumulatives_match_closed_form() {
        let rule = Arc::new(PanelRule::new(16));
        let set = PanelSet::new(rule, 0.0, 1.0, &[0.3], 0.25);
        let (xs, _) = set.nodes_and_weights();
        let omega = Complex64::new(6.0, -2.0);
        let i = Complex64::i();
        let ones = vec![c(1.0); xs.len()];
        let (right, at_start) = set.right_exp_cumulative(&ones, omega);
        let (left, at_end) = set.left_exp_cumulative(&ones, omega);
        let exact_right = |t: f64| ((i * omega * (1.0 - t)).exp() - 1.0) / (i * omega);
        let exact_left = |t: f64| ((i * omega * t).exp() - 1.0) / (i * omega);
        for (k, &x) in xs.iter().enumerate() {
            assert!((right[k] - exact_right(x)).norm() < 1e-12);
            assert!((left[k] - exact_left(x)).norm() < 1e-12);
        }
        assert!((at_start - exact_right(0.0)).norm() < 1e-12);
        assert!((at_end - exact_left(1.0)).norm() < 1e-12);
    }

    #[test]
    fn panel_set_respects_cuts() {
        let rule = Arc::new(PanelRule::new(4));
        let set = PanelSet::new(rule, 0.0, 1.0, &[0.3, 0.7, 1.5], 0.2);
        assert!(set.edges.contains(&0.3));
        assert!(set.edges.contains(&0.7));
        assert!(set.edges.windows(2).all(|w| w[1] - w[0] <= 0.2 + 1e-15));
        let (xs, _) = set.nodes_and_weights();
        let vals: Vec<Complex64> = xs.iter().map(|&x| c(x * x)).collect();
        assert_abs_diff_eq!(set.interpolate(&vals, 0.55).re, 0.3025, epsilon = 1e-13);
    }
}
