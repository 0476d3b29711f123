//! Central finite-difference checks of the analytic parameter gradients.

use serde::Serialize;

use crate::corpus::AnnotatedSentence;
use crate::error::Result;
use crate::model::Model;
use crate::training::{sentence_gradients, sentence_loss, LossWeights};

/// Comparison of one parameter entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradEntry {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// `|a - n| / max(|a|, |n|, floor)`.
///
/// The floor keeps entries whose true gradient is (near) zero from being
/// judged on cancellation noise alone.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let den = analytic.abs().max(numeric.abs()).max(floor);
    if den == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / den
    }
}

/// Central difference stencil.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`, error `O(h²)`.
    ThreePoint,
    /// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`, error `O(h⁴)`.
    FivePoint,
}

/// Settings for [`check_gradients`].
#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub stencil: Stencil,
    /// Finite-difference step.
    pub step: f64,
    /// Denominator floor passed to [`relative_error`].
    pub floor: f64,
    /// Probability clamp used by the loss.
    pub clamp_eps: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            stencil: Stencil::FivePoint,
            step: 1e-4,
            floor: 1e-6,
            clamp_eps: 1e-7,
        }
    }
}

/// Compares analytic and central-difference gradients of the joint loss on
/// one sentence for every parameter entry accepted by `select(name, index)`.
pub fn check_gradients(
    model: &Model,
    sentence: &AnnotatedSentence,
    weights: LossWeights,
    opts: GradCheckOptions,
    mut select: impl FnMut(&str, usize) -> bool,
) -> Result<Vec<GradEntry>> {
    let (_, analytic) = sentence_gradients(model, sentence, weights, opts.clamp_eps)?;
    let mut probe = model.clone();
    let names: Vec<String> = model.params.names().map(String::from).collect();
    let mut out = Vec::new();
    for (name, grad) in names.iter().zip(&analytic) {
        for index in 0..grad.len() {
            if !select(name, index) {
                continue;
            }
            let original = probe.params.get(name)?.data()[index];
            let mut eval = |value: f64| -> Result<f64> {
                probe.params.get_mut(name).expect("name from store").data_mut()[index] = value;
                let (g, _, loss) = sentence_loss(&probe, sentence, weights, opts.clamp_eps)?;
                g.value(loss.total).item()
            };
            let h = opts.step;
            let numeric = match opts.stencil {
                Stencil::ThreePoint => (eval(original + h)? - eval(original - h)?) / (2.0 * h),
                Stencil::FivePoint => {
                    let (p2, p1) = (eval(original + 2.0 * h)?, eval(original + h)?);
                    let (m1, m2) = (eval(original - h)?, eval(original - 2.0 * h)?);
                    (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h)
                }
            };
            probe.params.get_mut(name).expect("name from store").data_mut()[index] = original;
            let a = grad.data()[index];
            out.push(GradEntry {
                name: name.clone(),
                index,
                analytic: a,
                numeric,
                rel_error: relative_error(a, numeric, opts.floor),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_cases() {
        assert_eq!(relative_error(1.0, 1.0, 1e-6), 0.0);
        assert_eq!(relative_error(2.0, 1.0, 1e-6), 0.5);
        assert_eq!(relative_error(0.0, 0.0, 0.0), 0.0);
        assert_eq!(relative_error(1e-9, 0.0, 1e-6), 1e-3);
    }
}
