//! Finite-difference validation of the autoencoder's backward pass.
//!
//! The loss is only piecewise smooth (rectifiers, max pooling). A central
//! difference whose probes land on different pieces measures the jump, not
//! the derivative, so such probes are detected through the network's branch
//! signature and replaced by another randomly drawn parameter.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::autoencoder::Autoencoder;
use crate::error::{Error, Result};
use crate::silhouette::SilhouettePair;

/// Gradients smaller than this are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-6;

/// `|a − b| / max(|a|, |b|, floor)`
pub fn relative_discrepancy(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_discrepancy(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| relative_discrepancy(x, y, REL_FLOOR)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_discrepancy: f64,
    pub checked: usize,
    /// Probes discarded because they straddled a rectifier or pooling kink.
    pub skipped_at_kinks: usize,
    /// (flat parameter index, analytic, numeric) of the worst entry.
    pub worst: (usize, f64, f64),
}

/// Flattened analytic gradient of the training-mode two-view loss.
pub fn analytic_gradient(ae: &mut Autoencoder<f64>, pairs: &[SilhouettePair]) -> Result<Vec<f64>> {
    let refs: Vec<&SilhouettePair> = pairs.iter().collect();
    ae.zero_grad();
    let (_, logits, target) = ae.batch_loss_train(&refs)?;
    ae.backward_loss(&logits, &target, refs.len());
    Ok(ae.params_mut().into_iter().flat_map(|(_, g)| g.clone()).collect())
}

fn param_slot(ae: &mut Autoencoder<f64>, mut index: usize) -> &mut f64 {
    for (p, _) in ae.params_mut() {
        if index < p.len() {
            return &mut p[index];
        }
        index -= p.len();
    }
    panic!("parameter index out of range");
}

/// Compares analytic gradients with central differences of step `step` on
/// `samples` randomly chosen parameters (fewer only if the network runs out
/// of kink-free candidates). Running statistics are never updated.
pub fn grad_check(ae: &mut Autoencoder<f64>, pairs: &[SilhouettePair], samples: usize, step: f64, seed: u64) -> Result<GradCheckReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("gradient check needs at least one pair".into()));
    }
    let analytic = analytic_gradient(ae, pairs)?;
    let refs: Vec<&SilhouettePair> = pairs.iter().collect();
    ae.batch_loss_train(&refs)?;
    let base = ae.branch_signature();
    let mut candidates: Vec<usize> = (0..analytic.len()).collect();
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut report = GradCheckReport {
        max_discrepancy: 0.0,
        checked: 0,
        skipped_at_kinks: 0,
        worst: (0, 0.0, 0.0),
    };
    let probe = |ae: &mut Autoencoder<f64>, idx: usize, value: f64| -> Result<(f64, bool)> {
        *param_slot(ae, idx) = value;
        let loss = ae.batch_loss_train(&refs)?.0;
        Ok((loss, ae.branch_signature() == base))
    };
    for idx in candidates {
        if report.checked == samples {
            break;
        }
        let orig = *param_slot(ae, idx);
        let (up, up_smooth) = probe(ae, idx, orig + step)?;
        let (down, down_smooth) = probe(ae, idx, orig - step)?;
        *param_slot(ae, idx) = orig;
        if !(up_smooth && down_smooth) {
            report.skipped_at_kinks += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * step);
        let d = relative_discrepancy(analytic[idx], numeric, REL_FLOOR);
        report.checked += 1;
        if d >= report.max_discrepancy {
            report.max_discrepancy = d;
            report.worst = (idx, analytic[idx], numeric);
        }
    }
    Ok(report)
}
