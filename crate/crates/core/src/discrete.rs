//! Energies of the form `Σₙ wₙ φₙ(Sₙ x + s⁰ₙ) + cᵀx + c₀` where `Sₙ` is a small
//! difference stencil producing nine local features at node `n`.
//!
//! Node contributions are computed in parallel and reduced in node order, so
//! every result is independent of the thread count.

use nalgebra::SVector;
use rayon::prelude::*;

use crate::banded::BandMatrix;
use crate::fields::pairwise_sum;
use crate::material::Mat9;

pub const NF: usize = 9;
pub type Feat = SVector<f64, NF>;

/// Node-local density `φₙ` of the nine features.
pub trait Density: Sync {
    fn value(&self, node: usize, s: &Feat) -> f64;
    fn gradient(&self, node: usize, s: &Feat) -> Feat;
    fn hessian(&self, node: usize, s: &Feat) -> Mat9;
}

/// Features at one node: `s = M x[dofs] + offset`.
#[derive(Clone, Debug)]
pub struct NodeStencil {
    pub dofs: Vec<usize>,
    /// `NF × dofs.len()`, row-major
    pub mat: Vec<f64>,
    pub offset: Feat,
}

impl NodeStencil {
    /// Builds from `(feature, dof, coefficient)` taps; repeated dofs merge.
    pub fn from_taps(taps: &[(usize, usize, f64)]) -> Self {
        let mut dofs: Vec<usize> = taps.iter().map(|t| t.1).collect();
        dofs.sort_unstable();
        dofs.dedup();
        let nd = dofs.len();
        let mut mat = vec![0.0; NF * nd];
        for &(f, d, c) in taps {
            let k = dofs.binary_search(&d).unwrap();
            mat[f * nd + k] += c;
        }
        NodeStencil {
            dofs,
            mat,
            offset: Feat::zeros(),
        }
    }

    #[inline]
    pub fn features(&self, x: &[f64]) -> Feat {
        let nd = self.dofs.len();
        let mut s = self.offset;
        for f in 0..NF {
            let row = &self.mat[f * nd..(f + 1) * nd];
            s[f] += row.iter().zip(&self.dofs).map(|(c, &d)| c * x[d]).sum::<f64>();
        }
        s
    }

    /// Features of the linear part only (no offset).
    pub fn apply_linear(&self, x: &[f64]) -> Feat {
        self.features(x) - self.offset
    }
}

#[derive(Clone, Debug)]
pub struct LocalSystem {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub nodes: Vec<NodeStencil>,
    pub linear: Vec<f64>,
    pub constant: f64,
}

const CHUNK: usize = 256;

impl LocalSystem {
    pub fn new(dim: usize, weights: Vec<f64>, nodes: Vec<NodeStencil>) -> Self {
        LocalSystem {
            dim,
            weights,
            nodes,
            linear: vec![0.0; dim],
            constant: 0.0,
        }
    }

    /// Half-bandwidth of the assembled Hessian.
    pub fn bandwidth(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match (n.dofs.first(), n.dofs.last()) {
                (Some(a), Some(b)) => b - a,
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn node_values<D: Density>(&self, d: &D, x: &[f64]) -> Vec<f64> {
        self.nodes
            .par_iter()
            .enumerate()
            .map(|(n, st)| self.weights[n] * d.value(n, &st.features(x)))
            .collect()
    }

    /// The density part `Σ wₙ φₙ` alone.
    pub fn density_value<D: Density>(&self, d: &D, x: &[f64]) -> f64 {
        pairwise_sum(&self.node_values(d, x))
    }

    /// The linear part `cᵀx` alone.
    pub fn linear_value(&self, x: &[f64]) -> f64 {
        let prod: Vec<f64> = self.linear.iter().zip(x).map(|(c, v)| c * v).collect();
        pairwise_sum(&prod)
    }

    pub fn value<D: Density>(&self, d: &D, x: &[f64]) -> f64 {
        self.density_value(d, x) + self.linear_value(x) + self.constant
    }

    pub fn gradient<D: Density>(&self, d: &D, x: &[f64]) -> Vec<f64> {
        let mut g = self.linear.clone();
        for chunk in (0..self.nodes.len()).collect::<Vec<_>>().chunks(CHUNK) {
            let locals: Vec<Vec<f64>> = chunk
                .par_iter()
                .map(|&n| {
                    let st = &self.nodes[n];
                    let gs = d.gradient(n, &st.features(x)) * self.weights[n];
                    let nd = st.dofs.len();
                    (0..nd)
                        .map(|k| (0..NF).map(|f| st.mat[f * nd + k] * gs[f]).sum())
                        .collect()
                })
                .collect();
            for (&n, loc) in chunk.iter().zip(&locals) {
                for (&dof, v) in self.nodes[n].dofs.iter().zip(loc) {
                    g[dof] += v;
                }
            }
        }
        g
    }

    pub fn hessian<D: Density>(&self, d: &D, x: &[f64]) -> BandMatrix {
        let mut h = BandMatrix::zeros(self.dim, self.bandwidth());
        for chunk in (0..self.nodes.len()).collect::<Vec<_>>().chunks(CHUNK) {
            let locals: Vec<Vec<f64>> = chunk
                .par_iter()
                .map(|&n| {
                    let st = &self.nodes[n];
                    let hs = d.hessian(n, &st.features(x)) * self.weights[n];
                    let nd = st.dofs.len();
                    // (Hs M) then Mᵀ (Hs M), lower triangle only
                    let mut hm = vec![0.0; NF * nd];
                    for f in 0..NF {
                        for k in 0..nd {
                            hm[f * nd + k] = (0..NF).map(|g| hs[(f, g)] * st.mat[g * nd + k]).sum();
                        }
                    }
                    let mut out = Vec::with_capacity(nd * (nd + 1) / 2);
                    for a in 0..nd {
                        for b in 0..=a {
                            out.push((0..NF).map(|f| st.mat[f * nd + a] * hm[f * nd + b]).sum());
                        }
                    }
                    out
                })
                .collect();
            for (&n, loc) in chunk.iter().zip(&locals) {
                let dofs = &self.nodes[n].dofs;
                let mut t = 0;
                for a in 0..dofs.len() {
                    for b in 0..=a {
                        if loc[t] != 0.0 {
                            h.add(dofs[a], dofs[b], loc[t]);
                        }
                        t += 1;
                    }
                }
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// φ(s) = Σ s_f² + s_0 s_1³
    struct Toy;
    impl Density for Toy {
        fn value(&self, _: usize, s: &Feat) -> f64 {
            s.norm_squared() + s[0] * s[1].powi(3)
        }
        fn gradient(&self, _: usize, s: &Feat) -> Feat {
            let mut g = s * 2.0;
            g[0] += s[1].powi(3);
            g[1] += 3.0 * s[0] * s[1] * s[1];
            g
        }
        fn hessian(&self, _: usize, s: &Feat) -> Mat9 {
            let mut h = Mat9::identity() * 2.0;
            h[(0, 1)] += 3.0 * s[1] * s[1];
            h[(1, 0)] += 3.0 * s[1] * s[1];
            h[(1, 1)] += 6.0 * s[0] * s[1];
            h
        }
    }

    fn toy_system() -> LocalSystem {
        let dim = 12;
        let nodes = (0..8)
            .map(|n| {
                let taps: Vec<(usize, usize, f64)> = (0..NF)
                    .flat_map(|f| {
                        [(f, n + (f % 3), 1.0 + 0.1 * f as f64), (f, n + 4, -0.5 + 0.05 * n as f64)]
                    })
                    .collect();
                let mut st = NodeStencil::from_taps(&taps);
                st.offset[2] = 0.3;
                st
            })
            .collect();
        let mut sys = LocalSystem::new(dim, (0..8).map(|n| 1.0 + n as f64 * 0.1).collect(), nodes);
        sys.linear[3] = 0.7;
        sys
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let sys = toy_system();
        let x: Vec<f64> = (0..sys.dim).map(|k| (k as f64 * 0.37).sin()).collect();
        let g = sys.gradient(&Toy, &x);
        let h = sys.hessian(&Toy, &x);
        let e = 1e-6;
        for k in 0..sys.dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += e;
            xm[k] -= e;
            let fd = (sys.value(&Toy, &xp) - sys.value(&Toy, &xm)) / (2.0 * e);
            assert!((fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()));
            let gp = sys.gradient(&Toy, &xp);
            let gm = sys.gradient(&Toy, &xm);
            for j in 0..sys.dim {
                let fd = (gp[j] - gm[j]) / (2.0 * e);
                assert!((fd - h.get(j, k)).abs() < 1e-5 * (1.0 + fd.abs()), "{j} {k}");
            }
        }
    }
}
