use serde::{Deserialize, Serialize};

use crate::linalg::{quad_form, CMat};
use crate::scenario::ula_steering;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beampattern {
    pub angles: Vec<f64>,
    /// `a(θ)ᴴ R a(θ)`.
    pub gain: Vec<f64>,
    /// Gain in dB relative to the peak.
    pub gain_db: Vec<f64>,
}

impl Beampattern {
    pub fn gain_at(&self, angle: f64) -> f64 {
        let idx = self
            .angles
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - angle).abs().total_cmp(&(b.1 - angle).abs()))
            .map_or(0, |(i, _)| i);
        self.gain[idx]
    }
}

pub fn beampattern(r_x: &CMat, angle_grid: &[f64], n_elems: usize, spacing: f64) -> Beampattern {
    let gain: Vec<f64> = angle_grid
        .iter()
        .map(|&th| {
            let a = ula_steering(th, n_elems, spacing);
            quad_form(&a, r_x, &a).re.max(0.0)
        })
        .collect();
    let peak = gain.iter().copied().fold(0.0, f64::max);
    let gain_db = gain
        .iter()
        .map(|&g| if peak > 0.0 { 10.0 * (g / peak).max(1e-30).log10() } else { f64::NEG_INFINITY })
        .collect();
    Beampattern { angles: angle_grid.to_vec(), gain, gain_db }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::outer;
    use crate::scenario::standard_complex_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Vec<f64> {
        (0..181).map(|i| (-90.0 + i as f64).to_radians()).collect()
    }

    #[test]
    fn identity_is_flat() {
        let bp = beampattern(&CMat::identity(4, 4), &grid(), 4, 0.5);
        assert!(bp.gain.iter().all(|g| (g - 4.0).abs() < 1e-12));
        assert!(bp.gain_db.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn matched_peak() {
        let th0 = 20f64.to_radians();
        let r = outer(&ula_steering(th0, 4, 0.5));
        let bp = beampattern(&r, &grid(), 4, 0.5);
        let (imax, gmax) = bp.gain.iter().enumerate().fold((0, 0.0), |a, (i, &g)| if g > a.1 { (i, g) } else { a });
        assert!((bp.angles[imax] - th0).abs() < 1e-9);
        assert!((gmax - 16.0).abs() < 1e-9);
    }

    #[test]
    fn random_matches_direct_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = CMat::from_fn(4, 4, |_, _| standard_complex_normal(&mut rng));
        let r = &g * g.adjoint();
        let bp = beampattern(&r, &grid(), 4, 0.5);
        for (th, gain) in bp.angles.iter().zip(&bp.gain) {
            let a = ula_steering(*th, 4, 0.5);
            let direct = (a.adjoint() * &r * &a)[(0, 0)].re;
            assert!((direct - gain).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }
}
