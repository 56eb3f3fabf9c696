use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::lattice::Site;

/// Particles of a configuration in order of max-norm distance to `z`, ties
/// broken lexicographically, each site repeated by its occupancy.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Enumeration {
    pub z: Vec<i64>,
    pub sites: Vec<Vec<i64>>,
    pub distances: Vec<i64>,
    /// Least-squares slope through the origin of `|x^k - z|` against
    /// `k^{1/d}`; `None` for an empty configuration.
    pub fitted_c: Option<f64>,
}

impl Enumeration {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

/// Fitted envelope constant for distances `d_1 <= d_2 <= ...` in dimension `dim`.
pub(crate) fn fit_c(distances: &[i64], dim: usize) -> Option<f64> {
    if distances.is_empty() {
        return None;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (k, &dk) in distances.iter().enumerate() {
        let s = ((k + 1) as f64).powf(1.0 / dim as f64);
        num += dk as f64 * s;
        den += s * s;
    }
    Some(num / den)
}

pub fn enumerate_particles(eta: &Configuration, z: Site) -> Enumeration {
    let d = eta.dim();
    let mut occupied: Vec<(i64, Site, u32)> = eta.iter().map(|(x, n)| (x.sub(z).norm_max(), x, n)).collect();
    occupied.sort();
    let mut sites = Vec::new();
    let mut distances = Vec::new();
    for (dist, x, n) in occupied {
        for _ in 0..n {
            sites.push(x.coords(d).to_vec());
            distances.push(dist);
        }
    }
    let fitted_c = fit_c(&distances, d);
    Enumeration { z: z.coords(d).to_vec(), sites, distances, fitted_c }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicity_and_order() {
        let e = enumerate_particles(&Configuration::d1(&[(0, 2), (3, 1)]), Site::ORIGIN);
        assert_eq!(e.sites, vec![vec![0], vec![0], vec![3]]);
        assert_eq!(e.distances, vec![0, 0, 3]);
    }

    #[test]
    fn ties_are_lexicographic() {
        let e = enumerate_particles(&Configuration::d1(&[(2, 1), (-2, 1), (1, 1)]), Site::ORIGIN);
        assert_eq!(e.sites, vec![vec![1], vec![-2], vec![2]]);
        let e = enumerate_particles(&Configuration::d1(&[(2, 1), (6, 1)]), Site::d1(4));
        assert_eq!(e.sites, vec![vec![2], vec![6]]);
    }

    #[test]
    fn unit_density_gives_half() {
        let m = 400;
        let eta = Configuration::d1(&(-m..=m).map(|x| (x, 1)).collect::<Vec<_>>());
        let e = enumerate_particles(&eta, Site::ORIGIN);
        assert_eq!(e.len(), 801);
        assert!((e.fitted_c.unwrap() - 0.5).abs() < 0.01, "{:?}", e.fitted_c);
    }

    #[test]
    fn empty() {
        let e = enumerate_particles(&Configuration::empty(2), Site::ORIGIN);
        assert!(e.is_empty() && e.fitted_c.is_none());
    }

    #[test]
    fn two_dimensional_square_density() {
        // One particle per site of [-m, m]^2: about 4 r^2 particles within
        // max-norm r, so r ~ sqrt(k) / 2.
        let m = 30;
        let eta = Configuration::from_pairs(2, crate::lattice::box_sites(m, 2).into_iter().map(|x| (x, 1)));
        let c = enumerate_particles(&eta, Site::ORIGIN).fitted_c.unwrap();
        assert!((c - 0.5).abs() < 0.02, "{c}");
    }
}
