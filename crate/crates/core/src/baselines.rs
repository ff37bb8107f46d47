//! Reference detectors: zero-forcing, MMSE, box-constrained ADMM and
//! exhaustive maximum likelihood.

use num_complex::Complex64;

use crate::detector::{psadmm_detect, Detection, DetectorParams};
use crate::error::{Error, Result};
use crate::numerics::{dist_sqr, factor_shifted, gram, ComplexVector};
use crate::signal::{hard_decision, ChannelInstance, Modulation};

/// Cap on the number of candidates [`ml_bruteforce`] will enumerate.
pub const ML_CANDIDATE_CAP: u64 = 1_000_000;

/// `||r − H x||²`.
pub fn ml_objective(instance: &ChannelInstance, x: &[Complex64]) -> f64 {
    dist_sqr(&instance.r, &instance.h.mul_vec(x))
}

fn linear_estimate(instance: &ChannelInstance, shift: f64) -> Result<ComplexVector> {
    let factor = factor_shifted(&gram(&instance.h), shift)?;
    factor.solve(&instance.h.adjoint_mul_vec(&instance.r))
}

/// `hard_decision((H^H H)^{-1} H^H r)`.
pub fn zf_detect(instance: &ChannelInstance, modulation: Modulation) -> Result<ComplexVector> {
    Ok(hard_decision(&linear_estimate(instance, 0.0)?, modulation))
}

/// `hard_decision((H^H H + (σ²/E_s) I)^{-1} H^H r)`. With `σ² = 0` this is
/// the zero-forcing detector exactly.
pub fn mmse_detect(instance: &ChannelInstance, modulation: Modulation) -> Result<ComplexVector> {
    let shift = instance.sigma2 / modulation.symbol_energy();
    if shift.is_infinite() {
        return Ok(hard_decision(&vec![Complex64::new(0.0, 0.0); instance.users()], modulation));
    }
    Ok(hard_decision(&linear_estimate(instance, shift)?, modulation))
}

/// PS-ADMM with every penalty `α_q` forced to zero: ADMM on the
/// box-relaxed least-squares problem.
pub fn box_admm_detect(
    instance: &ChannelInstance,
    params: &DetectorParams,
    modulation: Modulation,
) -> Result<Detection> {
    psadmm_detect(instance, &params.without_penalty(), modulation)
}

/// Exhaustive search over `X^U`. Candidates are visited user-major (user 0
/// is the slowest-varying digit); each symbol runs real part major, then
/// imaginary part, both ascending. The first minimizer in that order wins.
pub fn ml_bruteforce(instance: &ChannelInstance, modulation: Modulation) -> Result<ComplexVector> {
    let users = instance.users();
    let per_user = modulation.size();
    let candidates = (per_user as f64).powi(users as i32);
    if candidates > ML_CANDIDATE_CAP as f64 {
        return Err(Error::TooLarge {
            candidates,
            cap: ML_CANDIDATE_CAP,
        });
    }
    let points = modulation.constellation();
    let mut digits = vec![0usize; users];
    let mut x: Vec<Complex64> = vec![points[0]; users];
    let mut best = x.clone();
    let mut best_cost = ml_objective(instance, &x);
    loop {
        // odometer: last user fastest
        let mut pos = users;
        loop {
            if pos == 0 {
                return Ok(best.into());
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < per_user {
                x[pos] = points[digits[pos]];
                break;
            }
            digits[pos] = 0;
            x[pos] = points[0];
        }
        let cost = ml_objective(instance, &x);
        if cost < best_cost {
            best_cost = cost;
            best.copy_from_slice(&x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ComplexMatrix;
    use crate::signal::{rayleigh_channel, transmit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qam(q: usize) -> Modulation {
        Modulation::new(q).unwrap()
    }

    fn v(entries: &[Complex64]) -> ComplexVector {
        entries.to_vec().into()
    }

    #[test]
    fn zf_noiseless_recovery_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = rayleigh_channel(6, 3, &mut rng).unwrap();
        let x = v(&[c(3.0, -1.0), c(1.0, 1.0), c(-3.0, 3.0)]);
        let inst = transmit(&h, &x, 0.0, &mut rng).unwrap();
        assert_eq!(zf_detect(&inst, qam(2)).unwrap(), x);

        let x = v(&[c(1.0, 1.0), c(-1.0, 1.0)]);
        let r = v(&[c(0.8, 1.1), c(-0.2, 0.05)]);
        let inst = ChannelInstance::new(ComplexMatrix::identity(2), x, 0.01, r.clone()).unwrap();
        assert_eq!(zf_detect(&inst, qam(1)).unwrap(), hard_decision(&r, qam(1)));
    }

    #[test]
    fn zf_rejects_rank_deficient_channel() {
        let h = ComplexMatrix::from_fn(3, 2, |i, _| c(i as f64 + 1.0, 0.0));
        let inst = ChannelInstance::new(h, v(&[c(1.0, 1.0); 2]), 0.0, v(&[c(0.0, 0.0); 3])).unwrap();
        assert!(matches!(zf_detect(&inst, qam(1)), Err(Error::FactorizationFailure { .. })));
    }

    #[test]
    fn mmse_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = rayleigh_channel(5, 3, &mut rng).unwrap();
        let x = v(&[c(1.0, -1.0), c(-1.0, -1.0), c(1.0, 1.0)]);
        let mut inst = transmit(&h, &x, 0.0, &mut rng).unwrap();
        inst.r = v(&[c(0.3, -0.2), c(1.0, 0.0), c(-0.4, 0.9), c(0.0, 0.0), c(2.0, -1.0)]);
        assert_eq!(mmse_detect(&inst, qam(1)).unwrap(), zf_detect(&inst, qam(1)).unwrap());
        inst.sigma2 = f64::INFINITY;
        assert_eq!(mmse_detect(&inst, qam(1)).unwrap(), v(&[c(1.0, 1.0); 3]));
        // heavy regularization: the estimate shrinks toward H^H r / shift
        inst.sigma2 = 1e12;
        let matched = inst.h.adjoint_mul_vec(&inst.r);
        assert_eq!(mmse_detect(&inst, qam(1)).unwrap(), hard_decision(&matched, qam(1)));
    }

    #[test]
    fn ml_scalar_and_noiseless() {
        let inst = ChannelInstance::new(
            ComplexMatrix::identity(1),
            v(&[c(1.0, 1.0)]),
            0.0,
            v(&[c(0.9, 1.1)]),
        )
        .unwrap();
        assert_eq!(ml_bruteforce(&inst, qam(1)).unwrap()[0], c(1.0, 1.0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = rayleigh_channel(4, 2, &mut rng).unwrap();
        let x = v(&[c(-3.0, 1.0), c(1.0, -1.0)]);
        let inst = transmit(&h, &x, 0.0, &mut rng).unwrap();
        let best = ml_bruteforce(&inst, qam(2)).unwrap();
        assert!(ml_objective(&inst, &best) <= 1e-20);
        assert_eq!(best, x);
    }

    #[test]
    fn ml_matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = qam(1);
        let pts = m.constellation();
        for _ in 0..20 {
            let h = rayleigh_channel(3, 2, &mut rng).unwrap();
            let x = v(&[pts[1], pts[2]]);
            let inst = transmit(&h, &x, 1.5, &mut rng).unwrap();
            let mut best = (f64::INFINITY, c(0.0, 0.0), c(0.0, 0.0));
            for a in &pts {
                for b in &pts {
                    let cost = ml_objective(&inst, &[*a, *b]);
                    if cost < best.0 {
                        best = (cost, *a, *b);
                    }
                }
            }
            assert_eq!(ml_bruteforce(&inst, m).unwrap(), v(&[best.1, best.2]));
        }
    }

    #[test]
    fn ml_tie_goes_to_first_candidate() {
        // zero channel: every candidate ties, the first one is all-minimum
        let inst = ChannelInstance::new(
            ComplexMatrix::zeros(2, 2),
            v(&[c(1.0, 1.0); 2]),
            0.0,
            v(&[c(0.0, 0.0); 2]),
        )
        .unwrap();
        assert_eq!(ml_bruteforce(&inst, qam(2)).unwrap(), v(&[c(-3.0, -3.0); 2]));
    }

    #[test]
    fn ml_enforces_cap() {
        let h = ComplexMatrix::identity(5);
        let inst = ChannelInstance::new(h, v(&[c(1.0, 1.0); 5]), 0.0, v(&[c(1.0, 1.0); 5])).unwrap();
        // 16^5 > 10^6
        assert!(matches!(ml_bruteforce(&inst, qam(2)), Err(Error::TooLarge { .. })));
        // 4^5 is fine
        assert!(ml_bruteforce(&inst, qam(1)).is_ok());
    }

    #[test]
    fn box_admm_is_psadmm_without_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = rayleigh_channel(8, 4, &mut rng).unwrap();
        let x = v(&[c(1.0, 1.0), c(-1.0, 1.0), c(1.0, -1.0), c(-1.0, -1.0)]);
        let inst = transmit(&h, &x, 0.5, &mut rng).unwrap();
        let p = DetectorParams::new(30.0, vec![20.0]);
        let a = box_admm_detect(&inst, &p, qam(1)).unwrap();
        let b = psadmm_detect(&inst, &DetectorParams::new(30.0, vec![0.0]), qam(1)).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.x_hat, b.x_hat);

        let h = ComplexMatrix::identity(2);
        let inst = ChannelInstance::new(h, v(&[c(1.0, -1.0); 2]), 0.0, v(&[c(1.0, -1.0); 2])).unwrap();
        assert_eq!(box_admm_detect(&inst, &p, qam(1)).unwrap().x_hat, v(&[c(1.0, -1.0); 2]));
    }
}
