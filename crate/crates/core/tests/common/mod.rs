#![allow(dead_code)]

use std::path::PathBuf;

use geoctl::geom::{Mat3, RotationMatrix, Vec3};
use geoctl::sim::config::override_key;
use geoctl::sim::ScenarioConfig;
use rand::RngExt;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&config_path(name)).expect("bundled config parses")
}

/// Bundled config with dotted-key overrides applied.
pub fn load_with(name: &str, overrides: &[(&str, &str)]) -> ScenarioConfig {
    let path = config_path(name);
    let mut text = std::fs::read_to_string(&path).unwrap();
    for (k, v) in overrides {
        text = override_key(&text, k, v).unwrap();
    }
    ScenarioConfig::parse(&text, path.parent()).unwrap()
}

/// Uniform rotation from a normalised quaternion drawn by rejection.
pub fn random_rotation<R: rand::Rng>(rng: &mut R) -> RotationMatrix {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = q.iter().map(|v| v * v).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            let [w, x, y, z] = q.map(|v| v / n);
            let m = Mat3::new(
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            );
            return RotationMatrix::new(m).unwrap();
        }
    }
}

pub fn random_vec<R: rand::Rng>(rng: &mut R, scale: f64) -> Vec3 {
    Vec3::from_fn(|_, _| rng.random_range(-scale..scale))
}

/// Rodrigues' formula written out, independent of the library exponential.
pub fn rodrigues(w: &Vec3) -> Mat3 {
    let th = w.norm();
    if th == 0.0 {
        return Mat3::identity();
    }
    let k = w / th;
    let kx = Mat3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Mat3::identity() + th.sin() * kx + (1.0 - th.cos()) * kx * kx
}

/// `½ tr(K (I − R_e))` for diagonal `K`.
pub fn psi_oracle(k: &[f64; 3], r_e: &Mat3) -> f64 {
    0.5 * (0..3).map(|i| k[i] * (1.0 - r_e[(i, i)])).sum::<f64>()
}

/// `(K R_e − R_eᵀ K)^∨ / 2` for diagonal `K`.
pub fn e_r_oracle(k: &[f64; 3], r_e: &Mat3) -> Vec3 {
    let kk = Mat3::from_diagonal(&Vec3::new(k[0], k[1], k[2]));
    let a = kk * r_e;
    let s = 0.5 * (a - a.transpose());
    Vec3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)])
}
