//! Generators for the small data files bundled under `data/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::artifact::fmt_f64;
use crate::ingest::{encode_pgm16, ImageGrid};

pub const TWO_BLOBS_SEED: u64 = 20_140_601;
pub const SDSS_LIKE_SEED: u64 = 11_000_115;

/// Blob centres (column, row), widths and peak intensities of the four-blob image.
/// The first two overlap.
pub const IMAGE_BLOBS: [([f64; 2], f64, f64); 4] = [
    ([20.0, 22.0], 3.5, 1.0),
    ([30.0, 24.0], 3.5, 0.8),
    ([46.0, 46.0], 3.5, 0.9),
    ([16.0, 48.0], 3.5, 0.7),
];
pub const IMAGE_SIZE: usize = 64;

/// Two isotropic blobs of 100 points each, centred at (0, 0) and (6, 0) with
/// standard deviation 0.5, marks uniform on [0.5, 1.5].
pub fn two_blobs_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(TWO_BLOBS_SEED);
    let mut out = String::from("# two isotropic blobs, sd 0.5, centres (0,0) and (6,0)\n# records: 200\nx,y,weight\n");
    for i in 0..200 {
        let cx = if i < 100 { 0.0 } else { 6.0 };
        let x: f64 = cx + 0.5 * rng.sample::<f64, _>(StandardNormal);
        let y: f64 = 0.5 * rng.sample::<f64, _>(StandardNormal);
        let w: f64 = 0.5 + rng.random::<f64>();
        out.push_str(&format!("{},{},{}\n", fmt_f64(x), fmt_f64(y), fmt_f64(w)));
    }
    out
}

/// Synthetic galaxy slice: sky position, redshift in [0.110, 0.115] and
/// Petrosian r magnitude, scattered around three groups joined by a filament.
pub fn sdss_like_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(SDSS_LIKE_SEED);
    let groups = [[150.0, 20.0], [156.0, 22.0], [153.0, 27.0]];
    let n = 300;
    let mut out = format!("# synthetic SDSS-like slice, 0.110 <= z <= 0.115\n# records: {n}\nra,dec,z,r\n");
    for i in 0..n {
        let (ra, dec) = if i % 3 == 2 {
            let t: f64 = rng.random();
            let (a, b) = (groups[0], groups[1]);
            (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
        } else {
            let g = groups[rng.random_range(0..groups.len())];
            (g[0], g[1])
        };
        let ra = ra + 0.6 * rng.sample::<f64, _>(StandardNormal);
        let dec = dec + 0.6 * rng.sample::<f64, _>(StandardNormal);
        let z = 0.110 + 0.005 * rng.random::<f64>();
        let r = 14.0 + 3.7 * rng.random::<f64>();
        out.push_str(&format!("{:.6},{:.6},{:.6},{:.4}\n", ra, dec, z, r));
    }
    out
}

/// Sum of Gaussian blobs from [`IMAGE_BLOBS`] on a square grid.
pub fn four_blob_image() -> ImageGrid {
    let mut v = Vec::with_capacity(IMAGE_SIZE * IMAGE_SIZE);
    for row in 0..IMAGE_SIZE {
        for col in 0..IMAGE_SIZE {
            let (x, y) = (col as f64 + 0.5, row as f64 + 0.5);
            let s: f64 = IMAGE_BLOBS
                .iter()
                .map(|(c, sd, amp)| amp * (-((x - c[0]).powi(2) + (y - c[1]).powi(2)) / (2.0 * sd * sd)).exp())
                .sum();
            v.push(s);
        }
    }
    ImageGrid::new(IMAGE_SIZE, IMAGE_SIZE, v).expect("valid image")
}

pub fn four_blob_pgm() -> Vec<u8> {
    encode_pgm16(&four_blob_image())
}
