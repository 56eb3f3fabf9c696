//! Deterministic randomness: seed splitting and the marked Poisson clocks of
//! the graphical construction.
//!
//! Every random quantity is a pure function of a key. A ChaCha8 key is built
//! from the master seed plus the packed key words, and the ChaCha stream id
//! separates the different uses (atoms, site samples, replicas), so the same
//! key never feeds two purposes.
//!
//! Per-site clocks are intensity-1 Poisson processes on `height x time`. The
//! height axis is cut into bands `[0,1), [1,2), [2,4), [4,8), ...`; band `b`
//! of width `w_b` is cut in time into windows of length `1 / w_b`, so each
//! (band, window) cell holds Poisson(1) atoms. A cell's atoms depend only on
//! `(seed, site, band, window)`: revealing more bands or later windows never
//! changes atoms already seen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lattice::Site;

const STREAM_ATOMS: u64 = 1;
const STREAM_SITE: u64 = 2;
const STREAM_REPLICA: u64 = 3;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `index` under `master`. Two rounds of splitmix over the
/// pair; used for every per-replica stream in the crate.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index ^ 0xD1B5_4A32_D192_ED03))
}

fn keyed(seed: u64, words: [u64; 3], stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    for (i, w) in words.iter().enumerate() {
        key[8 + 8 * i..16 + 8 * i].copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Packs a site into two words. Exact for coordinates within `i32`.
fn site_words(x: Site) -> [u64; 2] {
    let c = x.0.map(|v| v as i32 as u32 as u64);
    [c[0] | (c[1] << 32), c[2] | (c[3] << 32)]
}

/// General-purpose stream for `(seed, index)`, e.g. one Monte Carlo replica.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    keyed(seed, [index, 0, 0], STREAM_REPLICA)
}

/// A single uniform in `[0,1)` attached to a site; used for i.i.d. site
/// samples that must agree across windows of the same configuration.
pub fn site_uniform(seed: u64, x: Site) -> f64 {
    let [a, b] = site_words(x);
    keyed(seed, [a, b, 0], STREAM_SITE).gen::<f64>()
}

/// Poisson atom of a site clock: time, height, and the uniform mark that
/// selects the jump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub time: f64,
    pub height: f64,
    pub mark: f64,
}

pub fn band_lo(band: u32) -> f64 {
    if band == 0 {
        0.0
    } else {
        2f64.powi(band as i32 - 1)
    }
}

pub fn band_width(band: u32) -> f64 {
    if band == 0 {
        1.0
    } else {
        2f64.powi(band as i32 - 1)
    }
}

pub fn window_len(band: u32) -> f64 {
    1.0 / band_width(band)
}

/// Number of bands `0..nb` needed so that every atom of height `<= rate`
/// lies in an active band.
pub fn bands_for_rate(rate: f64) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    // Smallest `nb` with `band_lo(nb) >= rate`.
    let mut nb = 1;
    while band_lo(nb) < rate {
        nb += 1;
    }
    nb
}

/// The marked Poisson clocks of all sites, as a value determined by its seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HarrisNoise {
    pub seed: u64,
}

impl HarrisNoise {
    pub fn new(seed: u64) -> Self {
        HarrisNoise { seed }
    }

    /// Atoms of one (site, band, window) cell, sorted by time.
    pub fn cell(&self, x: Site, band: u32, window: u64) -> Vec<Atom> {
        assert!(window < 1 << 48, "time window index out of range");
        let [a, b] = site_words(x);
        let mut rng = keyed(self.seed, [a, b, ((band as u64) << 48) | window], STREAM_ATOMS);
        let (lo, width, len) = (band_lo(band), band_width(band), window_len(band));
        let mut out = Vec::new();
        let mut s = 0.0;
        loop {
            // Exp(1) gaps in units of the window: Poisson(1) atoms per cell.
            s += -(1.0 - rng.gen::<f64>()).ln();
            if s >= 1.0 {
                break;
            }
            let height = lo + width * rng.gen::<f64>();
            let mark = rng.gen::<f64>();
            out.push(Atom { time: (window as f64 + s) * len, height, mark });
        }
        out
    }
}

/// Cursor over one band of one site clock, yielding atoms after a start time.
#[derive(Clone, Debug)]
pub struct BandCursor {
    pub band: u32,
    window: u64,
    atoms: Vec<Atom>,
    pos: usize,
}

impl BandCursor {
    /// Positioned at the first atom strictly after `t`.
    pub fn after(noise: &HarrisNoise, x: Site, band: u32, t: f64) -> Self {
        let window = (t.max(0.0) / window_len(band)).floor() as u64;
        let atoms = noise.cell(x, band, window);
        let pos = atoms.partition_point(|a| a.time <= t);
        BandCursor { band, window, atoms, pos }
    }

    /// Next atom with time `<= horizon`, without consuming it.
    pub fn peek(&mut self, noise: &HarrisNoise, x: Site, horizon: f64) -> Option<Atom> {
        loop {
            if let Some(a) = self.atoms.get(self.pos) {
                return (a.time <= horizon).then_some(*a);
            }
            self.window += 1;
            if self.window as f64 * window_len(self.band) > horizon {
                return None;
            }
            self.atoms = noise.cell(x, self.band, self.window);
            self.pos = 0;
        }
    }

    pub fn advance(&mut self) {
        self.pos += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_are_deterministic_and_independent_of_order() {
        let n = HarrisNoise::new(42);
        let a = n.cell(Site::d1(3), 2, 17);
        let _ = n.cell(Site::d1(4), 0, 0);
        assert_eq!(a, n.cell(Site::d1(3), 2, 17));
        assert_ne!(a, n.cell(Site::d1(-3), 2, 17));
        assert!(a.windows(2).all(|w| w[0].time < w[1].time));
        for at in &a {
            assert!(at.height >= 2.0 && at.height < 4.0);
            assert!(at.time >= 17.0 * 0.5 && at.time < 18.0 * 0.5);
        }
    }

    #[test]
    fn band_cover() {
        assert_eq!(bands_for_rate(0.0), 0);
        assert_eq!(bands_for_rate(0.5), 1);
        assert_eq!(bands_for_rate(1.0), 1);
        assert_eq!(bands_for_rate(1.5), 2);
        assert_eq!(bands_for_rate(2.0), 2);
        assert_eq!(bands_for_rate(9.0), 5);
        for r in [0.3, 1.0, 3.7, 1e6, 1e300] {
            let nb = bands_for_rate(r);
            assert!(band_lo(nb - 1) < r && band_lo(nb) >= r);
        }
    }

    #[test]
    fn atom_rate_below_height_matches_intensity() {
        // Atoms with height <= 3 over [0, 200) at one site: Poisson(600).
        let n = HarrisNoise::new(9);
        let x = Site::d1(0);
        let mut count = 0usize;
        for band in 0..bands_for_rate(3.0) {
            let mut c = BandCursor::after(&n, x, band, 0.0);
            while let Some(a) = c.peek(&n, x, 200.0) {
                if a.height <= 3.0 {
                    count += 1;
                }
                c.advance();
            }
        }
        assert!((count as f64 - 600.0).abs() < 4.0 * 600f64.sqrt(), "{count}");
    }

    #[test]
    fn cursor_after_skips_past_atoms() {
        let n = HarrisNoise::new(1);
        let x = Site::d1(2);
        let mut full = BandCursor::after(&n, x, 1, 0.0);
        let mut all = Vec::new();
        while let Some(a) = full.peek(&n, x, 10.0) {
            all.push(a);
            full.advance();
        }
        let mut late = BandCursor::after(&n, x, 1, 4.2);
        let mut tail = Vec::new();
        while let Some(a) = late.peek(&n, x, 10.0) {
            tail.push(a);
            late.advance();
        }
        let expect: Vec<_> = all.into_iter().filter(|a| a.time > 4.2).collect();
        assert_eq!(tail, expect);
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(5, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(derive_seed(5, 0), derive_seed(6, 0));
    }
}
