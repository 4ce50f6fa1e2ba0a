//! Three-variable lower-bound construction.
//!
//! Two distributions on binary `(X, Z, Y)` share the skeleton `X - Z - Y`.
//! `P1` is Markov to `G1 = X -> Z -> Y`, `P2` to `G2 = X -> Z <- Y`; they are
//! `O(alpha^2)` apart in squared Hellinger distance, yet projecting either one
//! onto the other's graph costs `Omega(alpha^2)` in KL. Tables use variable
//! order `[X, Z, Y]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    conditional_mutual_information, hellinger_squared, kl_divergence, mutual_information, project_onto,
    Alphabet, JointTable, PolytreeGraph,
};
use crate::rng::RngSeed;
use crate::sampling::Dataset;

pub const X: usize = 0;
pub const Z: usize = 1;
pub const Y: usize = 2;

/// Closed-form atoms `(x, y, z, P1, P2)`, in the row order of the published table.
pub fn table_atoms(alpha: f64) -> [(usize, usize, usize, f64, f64); 8] {
    let a = alpha;
    [
        (0, 0, 0, 3.0 / 16.0 * (1.0 + a), (3.0 + 2.0 * a) / 16.0),
        (0, 0, 1, (1.0 - a) / 16.0, (1.0 - 2.0 * a) / 16.0),
        (0, 1, 0, 3.0 / 16.0 * (1.0 - a), (3.0 - 2.0 * a) / 16.0),
        (0, 1, 1, (1.0 + a) / 16.0, (1.0 + 2.0 * a) / 16.0),
        (1, 0, 0, (1.0 + a) / 16.0, (1.0 + 2.0 * a) / 16.0),
        (1, 0, 1, 3.0 / 16.0 * (1.0 - a), (3.0 - 2.0 * a) / 16.0),
        (1, 1, 0, (1.0 - a) / 16.0, (1.0 - 2.0 * a) / 16.0),
        (1, 1, 1, 3.0 / 16.0 * (1.0 + a), (3.0 + 2.0 * a) / 16.0),
    ]
}

/// Flat index of `(x, y, z)` in a table ordered `[X, Z, Y]`.
pub fn atom_index(x: usize, y: usize, z: usize) -> usize {
    x * 4 + z * 2 + y
}

#[derive(Clone, Debug, PartialEq)]
pub struct GadgetPair {
    pub alpha: f64,
    pub p1: JointTable,
    pub p2: JointTable,
    pub g1: PolytreeGraph,
    pub g2: PolytreeGraph,
}

/// Builds the pair for `0 < alpha <= 1/2`.
pub fn build_gadget(alpha: f64) -> Result<GadgetPair> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1/2]")));
    }
    let mut p1 = vec![0.0; 8];
    let mut p2 = vec![0.0; 8];
    for (x, y, z, a, b) in table_atoms(alpha) {
        p1[atom_index(x, y, z)] = a;
        p2[atom_index(x, y, z)] = b;
    }
    Ok(GadgetPair {
        alpha,
        p1: JointTable::new(vec![2; 3], p1)?,
        p2: JointTable::new(vec![2; 3], p2)?,
        g1: PolytreeGraph::new(3, [(X, Z), (Z, Y)])?,
        g2: PolytreeGraph::new(3, [(X, Z), (Y, Z)])?,
    })
}

/// Squared Hellinger between the pair as an `epsilon`-facing helper (`alpha = sqrt(epsilon)`).
pub fn build_gadget_for_epsilon(epsilon: f64) -> Result<GadgetPair> {
    build_gadget(epsilon.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionKl {
    pub p1g1: f64,
    pub p1g2: f64,
    pub p2g1: f64,
    pub p2g2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GadgetChecks {
    /// `h2 <= alpha^2`
    pub h2_bound: bool,
    pub p1_fits_g1: bool,
    pub p2_fits_g2: bool,
    pub p1_misfits_g2: bool,
    pub p2_misfits_g1: bool,
}

impl GadgetChecks {
    pub fn all(&self) -> bool {
        self.h2_bound && self.p1_fits_g1 && self.p2_fits_g2 && self.p1_misfits_g2 && self.p2_misfits_g1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GadgetReport {
    pub alpha: f64,
    pub h2: f64,
    pub kl: ProjectionKl,
    pub checks: GadgetChecks,
}

fn projection_kl(p: &JointTable, g: &PolytreeGraph) -> Result<f64> {
    kl_divergence(p, &project_onto(p, g)?.joint_distribution()?)
}

const ZERO_KL_TOL: f64 = 1e-12;

pub fn certify_gadget(g: &GadgetPair) -> Result<GadgetReport> {
    let h2 = hellinger_squared(&g.p1, &g.p2)?;
    let kl = ProjectionKl {
        p1g1: projection_kl(&g.p1, &g.g1)?,
        p1g2: projection_kl(&g.p1, &g.g2)?,
        p2g1: projection_kl(&g.p2, &g.g1)?,
        p2g2: projection_kl(&g.p2, &g.g2)?,
    };
    let checks = GadgetChecks {
        h2_bound: h2 <= g.alpha * g.alpha,
        p1_fits_g1: kl.p1g1 <= ZERO_KL_TOL,
        p2_fits_g2: kl.p2g2 <= ZERO_KL_TOL,
        p1_misfits_g2: kl.p1g2 > 0.0,
        p2_misfits_g1: kl.p2g1 > 0.0,
    };
    Ok(GadgetReport { alpha: g.alpha, h2, kl, checks })
}

/// The cross-projection costs as information quantities:
/// `KL(P1 || P1_G2) = I_P1(X; Y)` and `KL(P2 || P2_G1) = I_P2(X; Y | Z)`.
pub fn cross_kl_identities(g: &GadgetPair) -> Result<(f64, f64)> {
    Ok((
        mutual_information(&g.p1, &[X], &[Y])?,
        conditional_mutual_information(&g.p2, &[X], &[Y], &[Z])?,
    ))
}

/// `k` independent copies of the gadget; copy `i` occupies variables `3i..3i+3`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorizedGadget {
    pub k: usize,
    pub p1: JointTable,
    pub p2: JointTable,
    pub g1: PolytreeGraph,
    pub g2: PolytreeGraph,
}

pub fn tensor_copies(g: &GadgetPair, k: usize) -> Result<TensorizedGadget> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one copy".into()));
    }
    Alphabet::binary(3 * k).volume()?;
    let power = |t: &JointTable| -> Result<JointTable> {
        let mut acc = t.clone();
        for _ in 1..k {
            acc = acc.product(t)?;
        }
        Ok(acc)
    };
    let blocks = |base: &PolytreeGraph| -> Result<PolytreeGraph> {
        let edges = (0..k).flat_map(|i| base.edges().iter().map(move |&(u, v)| (u + 3 * i, v + 3 * i)));
        PolytreeGraph::new(3 * k, edges)
    };
    Ok(TensorizedGadget { k, p1: power(&g.p1)?, p2: power(&g.p2)?, g1: blocks(&g.g1)?, g2: blocks(&g.g2)? })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    P1,
    P2,
}

/// Samples `[X, Z, Y]` rows by simulating the generative mechanisms directly
/// (not from the tables), for cross-checking the closed forms.
pub fn sample_mechanism(side: Side, alpha: f64, m: usize, seed: RngSeed) -> Result<Dataset> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1/2]")));
    }
    let mut rng = seed.rng();
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let x = rng.random_range(0..2usize);
        let (z, y) = match side {
            Side::P1 => {
                let z = if rng.random_bool(0.5) { x } else { rng.random_range(0..2) };
                let y = if rng.random_bool(alpha) { z } else { rng.random_range(0..2) };
                (z, y)
            }
            Side::P2 => {
                let y = rng.random_range(0..2usize);
                let u: f64 = rng.random();
                let z = if u < 0.5 {
                    x
                } else if u < 0.5 + alpha {
                    y
                } else {
                    rng.random_range(0..2)
                };
                (z, y)
            }
        };
        rows.push(vec![x, z, y]);
    }
    Dataset::from_rows(Alphabet::binary(3), &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::forward_sample;
    use approx::assert_abs_diff_eq;

    // independent route to the atoms: the product form of each mechanism
    fn mechanism_p1(a: f64, x: usize, y: usize, z: usize) -> f64 {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        0.5 * (0.25 + 0.5 * ind(x == z)) * (a * ind(y == z) + (1.0 - a) * 0.5)
    }

    fn mechanism_p2(a: f64, x: usize, y: usize, z: usize) -> f64 {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        0.25 * (0.5 * ind(x == z) + a * ind(y == z) + (0.5 - a) * 0.5)
    }

    #[test]
    fn atoms_at_alpha_point_two() {
        let g = build_gadget(0.2).unwrap();
        assert_abs_diff_eq!(g.p1.pmf()[atom_index(0, 0, 0)], 0.225, epsilon = 1e-15);
        assert_abs_diff_eq!(g.p2.pmf()[atom_index(0, 0, 0)], 0.2125, epsilon = 1e-15);
    }

    #[test]
    fn atoms_match_mechanisms() {
        for &a in &[0.05, 0.1, 0.2, 0.3, 0.4, 0.5] {
            let g = build_gadget(a).unwrap();
            for x in 0..2 {
                for y in 0..2 {
                    for z in 0..2 {
                        let i = atom_index(x, y, z);
                        assert_abs_diff_eq!(g.p1.pmf()[i], mechanism_p1(a, x, y, z), epsilon = 1e-16);
                        assert_abs_diff_eq!(g.p2.pmf()[i], mechanism_p2(a, x, y, z), epsilon = 1e-16);
                    }
                }
            }
        }
    }

    #[test]
    fn sums_to_one_at_half() {
        let g = build_gadget(0.5).unwrap();
        assert_abs_diff_eq!(g.p1.pmf().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.p2.pmf().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn alpha_range() {
        assert!(build_gadget(0.0).is_err());
        assert!(build_gadget(0.51).is_err());
        assert!(build_gadget(f64::NAN).is_err());
    }

    #[test]
    fn pair_collapses_as_alpha_vanishes() {
        let g = build_gadget(1e-7).unwrap();
        assert!(kl_divergence(&g.p1, &g.p2).unwrap() <= 1e-12);
        assert!(hellinger_squared(&g.p1, &g.p2).unwrap() <= 1e-13);
    }

    #[test]
    fn certificate_at_point_two() {
        let g = build_gadget(0.2).unwrap();
        let r = certify_gadget(&g).unwrap();
        assert!(r.checks.all(), "{r:?}");
        assert!(r.kl.p1g1.abs() <= 1e-12);
        let (i_xy, i_xy_z) = cross_kl_identities(&g).unwrap();
        assert_abs_diff_eq!(r.kl.p1g2, i_xy, epsilon = 1e-10);
        assert_abs_diff_eq!(r.kl.p2g1, i_xy_z, epsilon = 1e-10);
    }

    #[test]
    fn hellinger_is_quadratic_for_small_alpha() {
        let h = |a: f64| certify_gadget(&build_gadget(a).unwrap()).unwrap().h2;
        let ratio = h(0.2) / h(0.1);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
        // leading coefficient 1/24
        assert!((h(1e-3) / 1e-6 - 1.0 / 24.0).abs() < 1e-4);
        assert!(h(0.2) <= 0.04);
    }

    #[test]
    fn hellinger_matches_closed_form_sum() {
        let a: f64 = 0.2;
        let closed = 1.0
            - ((3.0 * (1.0 + a) * (3.0 + 2.0 * a)).sqrt()
                + ((1.0 - a) * (1.0 - 2.0 * a)).sqrt()
                + (3.0 * (1.0 - a) * (3.0 - 2.0 * a)).sqrt()
                + ((1.0 + a) * (1.0 + 2.0 * a)).sqrt())
                / 8.0;
        let g = build_gadget(a).unwrap();
        assert_abs_diff_eq!(hellinger_squared(&g.p1, &g.p2).unwrap(), closed, epsilon = 1e-15);
    }

    #[test]
    fn cmi_closed_form() {
        // I(X;Y|Z) under P2 from the conditional tables: symmetric in z, so the
        // z = 0 slice alone gives the value
        let a: f64 = 0.2;
        let joint = [(3.0 + 2.0 * a) / 8.0, (3.0 - 2.0 * a) / 8.0, (1.0 + 2.0 * a) / 8.0, (1.0 - 2.0 * a) / 8.0];
        let px = [0.75, 0.25];
        let py = [(1.0 + a) / 2.0, (1.0 - a) / 2.0];
        let mut expected = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                let p = joint[x * 2 + y];
                expected += p * (p / (px[x] * py[y])).log2();
            }
        }
        let g = build_gadget(a).unwrap();
        let (_, i_xy_z) = cross_kl_identities(&g).unwrap();
        assert_abs_diff_eq!(i_xy_z, expected, epsilon = 1e-12);
    }

    #[test]
    fn tensorization_additive() {
        let g = build_gadget(0.2).unwrap();
        let single = certify_gadget(&g).unwrap();
        let one = tensor_copies(&g, 1).unwrap();
        assert_eq!(one.p1, g.p1);
        assert_eq!(one.g2, g.g2);
        let two = tensor_copies(&g, 2).unwrap();
        let kl = projection_kl(&two.p1, &two.g2).unwrap();
        assert_abs_diff_eq!(kl, 2.0 * single.kl.p1g2, epsilon = 1e-9);
        let h2 = hellinger_squared(&two.p1, &two.p2).unwrap();
        assert_abs_diff_eq!(1.0 - h2, (1.0 - single.h2).powi(2), epsilon = 1e-10);
        assert!(tensor_copies(&g, 9).is_err());
    }

    #[test]
    fn mechanism_sampler_agrees_with_table() {
        let g = build_gadget(0.3).unwrap();
        for (side, table) in [(Side::P1, &g.p1), (Side::P2, &g.p2)] {
            let data = sample_mechanism(side, 0.3, 200_000, RngSeed(17)).unwrap();
            let emp = data.empirical_joint(&[0, 1, 2]).unwrap();
            for (e, p) in emp.pmf().iter().zip(table.pmf()) {
                assert!((e - p).abs() < 0.005, "{side:?}: {e} vs {p}");
            }
        }
    }

    #[test]
    fn forward_sampling_the_projected_network() {
        let g = build_gadget(0.2).unwrap();
        let bn = project_onto(&g.p1, &g.g1).unwrap();
        let data = forward_sample(&bn, 200_000, RngSeed(23)).unwrap();
        let freq = data.empirical_joint(&[0, 1, 2]).unwrap().pmf()[atom_index(0, 0, 0)];
        assert!((freq - 0.225).abs() < 0.005, "{freq}");
    }
}
