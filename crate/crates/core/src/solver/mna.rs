use crate::netlist::NodeId;

/// Dense modified-nodal system `G·x = rhs`.
///
/// Unknowns are node voltages 1..=node_count (row/column `node − 1`)
/// followed by one current per branch. Node rows express KCL as the sum of
/// currents *leaving* the node through devices.
#[derive(Debug, Clone, PartialEq)]
pub struct MnaSystem {
    dim: usize,
    node_count: usize,
    pub g: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl MnaSystem {
    pub fn new(node_count: usize, branch_count: usize) -> Self {
        let dim = node_count + branch_count;
        Self {
            dim,
            node_count,
            g: vec![0.0; dim * dim],
            rhs: vec![0.0; dim],
        }
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn clear(&mut self) {
        self.g.iter_mut().for_each(|v| *v = 0.0);
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.g[row * self.dim + col]
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        self.g[row * self.dim + col] += v;
    }

    fn row(&self, n: NodeId) -> Option<usize> {
        (!n.is_ground()).then(|| n.0 - 1)
    }

    pub fn branch_row(&self, branch: usize) -> usize {
        self.node_count + branch
    }

    /// Conductance `g` between `a` and `b`.
    pub fn conductance(&mut self, a: NodeId, b: NodeId, g: f64) {
        let (ra, rb) = (self.row(a), self.row(b));
        if let Some(i) = ra {
            self.add(i, i, g);
        }
        if let Some(j) = rb {
            self.add(j, j, g);
        }
        if let (Some(i), Some(j)) = (ra, rb) {
            self.add(i, j, -g);
            self.add(j, i, -g);
        }
    }

    /// Constant current `i` flowing from `a` through the device into `b`.
    pub fn current(&mut self, a: NodeId, b: NodeId, i: f64) {
        if let Some(r) = self.row(a) {
            self.rhs[r] -= i;
        }
        if let Some(r) = self.row(b) {
            self.rhs[r] += i;
        }
    }

    /// Current `gm·(v(cp) − v(cn))` flowing from `a` through the device into `b`.
    pub fn transconductance(&mut self, a: NodeId, b: NodeId, cp: NodeId, cn: NodeId, gm: f64) {
        for (out, sign) in [(a, 1.0), (b, -1.0)] {
            let Some(r) = self.row(out) else { continue };
            if let Some(c) = self.row(cp) {
                self.add(r, c, sign * gm);
            }
            if let Some(c) = self.row(cn) {
                self.add(r, c, -sign * gm);
            }
        }
    }

    /// Branch current `j` entering node `into` from the branch element
    /// (i.e. leaving `from`).
    pub fn branch_incidence(&mut self, branch: usize, from: NodeId, into: NodeId) {
        let k = self.branch_row(branch);
        if let Some(r) = self.row(from) {
            self.add(r, k, 1.0);
        }
        if let Some(r) = self.row(into) {
            self.add(r, k, -1.0);
        }
    }

    /// Adds `coef·v(n)` to the branch constraint row.
    pub fn branch_voltage_term(&mut self, branch: usize, n: NodeId, coef: f64) {
        let k = self.branch_row(branch);
        if let Some(c) = self.row(n) {
            self.add(k, c, coef);
        }
    }

    pub fn branch_current_term(&mut self, branch: usize, coef: f64) {
        let k = self.branch_row(branch);
        self.add(k, k, coef);
    }

    pub fn branch_rhs(&mut self, branch: usize, v: f64) {
        let k = self.branch_row(branch);
        self.rhs[k] += v;
    }

    /// `G·x − rhs` restricted to node rows: the net current leaving each
    /// node at `x`.
    pub fn kcl_residual(&self, x: &[f64]) -> Vec<f64> {
        (0..self.node_count)
            .map(|r| {
                let row = &self.g[r * self.dim..(r + 1) * self.dim];
                row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.rhs[r]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resistor_stamp_pattern() {
        let mut s = MnaSystem::new(2, 0);
        s.conductance(NodeId(1), NodeId(2), 1e-3);
        assert_eq!(s.at(0, 0), 1e-3);
        assert_eq!(s.at(1, 1), 1e-3);
        assert_eq!(s.at(0, 1), -1e-3);
        assert_eq!(s.at(1, 0), -1e-3);
        let mut g = MnaSystem::new(1, 0);
        g.conductance(NodeId(1), NodeId::GROUND, 0.5);
        assert_eq!(g.g, vec![0.5]);
    }

    #[test]
    fn voltage_source_stamp_pattern() {
        // V between node 1 (+) and ground, value 5
        let mut s = MnaSystem::new(1, 1);
        s.branch_incidence(0, NodeId(1), NodeId::GROUND);
        s.branch_voltage_term(0, NodeId(1), 1.0);
        s.branch_rhs(0, 5.0);
        assert_eq!(s.at(0, 1), 1.0);
        assert_eq!(s.at(1, 0), 1.0);
        assert_eq!(s.rhs[1], 5.0);
    }
}
