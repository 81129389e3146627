use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::{EvolverConfig, StepInfo};
use crate::error::Result;
use crate::model::{two_site_gates, GateSet, ModelSpec};
use crate::mps::{Mps, Sweep};

/// Fourth-order TEBD: Suzuki's five-fold composition of the symmetric
/// second-order even/odd splitting with weights `(w1, w1, w0, w1, w1)`.
pub struct Tebd4 {
    /// Layers in application order: (even layer?, gate set).
    layers: Vec<(bool, usize)>,
    sets: Vec<GateSet>,
}

pub fn suzuki_weights() -> (f64, f64) {
    let w1 = 1.0 / (4.0 - 4f64.powf(1.0 / 3.0));
    (w1, 1.0 - 4.0 * w1)
}

impl Tebd4 {
    pub fn new(spec: &ModelSpec, cfg: &EvolverConfig) -> Result<Self> {
        let (w1, w0) = suzuki_weights();
        // Adjacent half-steps of neighbouring second-order factors merge.
        let fractions: [(bool, f64); 11] = [
            (true, w1 / 2.0),
            (false, w1),
            (true, w1),
            (false, w1),
            (true, (w1 + w0) / 2.0),
            (false, w0),
            (true, (w0 + w1) / 2.0),
            (false, w1),
            (true, w1),
            (false, w1),
            (true, w1 / 2.0),
        ];
        let mut taus: Vec<f64> = Vec::new();
        let mut layers = Vec::with_capacity(fractions.len());
        for (even, f) in fractions {
            let idx = match taus.iter().position(|t| (t - f).abs() < 1e-15) {
                Some(i) => i,
                None => {
                    taus.push(f);
                    taus.len() - 1
                }
            };
            layers.push((even, idx));
        }
        let sets = taus.iter().map(|f| two_site_gates(spec, f * cfg.dt)).collect::<Result<_>>()?;
        Ok(Tebd4 { layers, sets })
    }

    pub fn step(&self, state: &mut Mps) -> Result<StepInfo> {
        let mut discarded = 0.0;
        for &(even, idx) in &self.layers {
            let set = &self.sets[idx];
            if even {
                discarded += apply_layer(state, &set.even, Sweep::Right)?;
            } else {
                discarded += apply_layer(state, &set.odd, Sweep::Left)?;
            }
        }
        Ok(StepInfo { discarded, ..Default::default() })
    }
}

fn apply_layer(state: &mut Mps, gates: &[(usize, Array2<C64>)], dir: Sweep) -> Result<f64> {
    let mut w = 0.0;
    match dir {
        Sweep::Right => {
            for (b, g) in gates {
                w += state.apply_two_site(*b, g, Sweep::Right)?;
            }
        }
        Sweep::Left => {
            for (b, g) in gates.iter().rev() {
                w += state.apply_two_site(*b, g, Sweep::Left)?;
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::Scheme;
    use crate::exact::dense::{fidelity, SpectralPropagator};
    use crate::model::dense::{bloch_spinor, product_vector};

    fn cfg(dt: f64, chi: usize) -> EvolverConfig {
        EvolverConfig { dt, chi_max: chi, scheme: Scheme::Tebd4, ..EvolverConfig::default() }
    }

    #[test]
    fn weights_sum_to_one() {
        let (w1, w0) = suzuki_weights();
        assert!((4.0 * w1 + w0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenstate_is_stationary() {
        let spec = ModelSpec::tfim(8, 1.0, 0.0);
        let engine = Tebd4::new(&spec, &cfg(0.05, 8)).unwrap();
        let init = Mps::product_state(8, [0.0, 0.0, 1.0], 8).unwrap();
        let mut state = init.clone();
        for _ in 0..40 {
            engine.step(&mut state).unwrap();
        }
        assert!((state.overlap(&init).unwrap().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_rank_matches_dense_evolution() {
        let n = 10;
        let spec = ModelSpec::tfim(n, 1.0, 1.0);
        let dt = 0.01;
        let engine = Tebd4::new(&spec, &cfg(dt, 32)).unwrap();
        let mut state = Mps::product_state(n, [1.0, 0.0, 0.0], 32).unwrap();
        for _ in 0..500 {
            engine.step(&mut state).unwrap();
        }
        let prop = SpectralPropagator::new(&spec).unwrap();
        let want = prop.evolve(&product_vector(n, bloch_spinor([1.0, 0.0, 0.0]).unwrap()), 5.0);
        let got = state.to_dense().unwrap();
        let f = fidelity(&got, &want);
        assert!(f >= 1.0 - 1e-8, "fidelity {f}");
        assert!((state.norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn global_error_is_fourth_order() {
        let n = 8;
        let spec = ModelSpec::sfim(n, 1.0, 1.1, 0.9);
        let init = product_vector(n, bloch_spinor([0.0, 0.0, 1.0]).unwrap());
        let t = 2.0;
        let want = SpectralPropagator::new(&spec).unwrap().evolve(&init, t);
        let err = |dt: f64| {
            let engine = Tebd4::new(&spec, &cfg(dt, 16)).unwrap();
            let mut state = Mps::product_state(n, [0.0, 0.0, 1.0], 16).unwrap();
            let steps = (t / dt).round() as usize;
            for _ in 0..steps {
                engine.step(&mut state).unwrap();
            }
            let got = state.to_dense().unwrap();
            got.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
        };
        let (e1, e2, e3) = (err(0.2), err(0.1), err(0.05));
        let r1 = e1 / e2;
        let r2 = e2 / e3;
        assert!((r1 - 16.0).abs() < 4.8, "ratio {r1}");
        assert!((r2 - 16.0).abs() < 4.8, "ratio {r2}");
        let slope = (e1 / e3).log2() / 2.0;
        assert!((slope - 4.0).abs() < 0.3, "slope {slope}");
    }
}
