//! Central finite-difference check of reverse-mode gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::layers::{LayerSpec, Mode, Sequential};
use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub h: f64,
    pub tolerance: f64,
    /// Check at most this many entries (seeded subsample); `None` checks all.
    pub max_entries: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            h: 1e-5,
            tolerance: 1e-4,
            max_entries: None,
            seed: 0,
        }
    }
}

pub const MIN_SUBSAMPLE: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradReport {
    /// Max relative error per checked tensor; `"input"` when no parameters exist.
    pub per_tensor: Vec<(String, f64)>,
    pub max_rel_error: f64,
    pub entries_checked: usize,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

enum Target {
    Param(usize),
    Input,
}

/// Compares backprop gradients of `loss_fn` with central differences.
///
/// `loss_fn` receives a fresh tape, the current parameters and the input
/// leaf, and must return a scalar loss. Trainable parameters are checked when
/// present, otherwise gradients with respect to the input.
pub fn grad_check<F>(params: &mut ParamStore, input: &Tensor, mut loss_fn: F, cfg: &GradCheckConfig) -> Result<GradReport>
where
    F: FnMut(&mut Tape, &ParamStore, Var) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&cfg.h) {
        return Err(Error::InvalidArgument(format!("step {} outside [1e-7, 1e-3]", cfg.h)));
    }
    if let Some(m) = cfg.max_entries {
        if m < MIN_SUBSAMPLE {
            return Err(Error::InvalidArgument(format!("subsample of {m} below {MIN_SUBSAMPLE}")));
        }
    }
    let use_params = params.iter().any(|(_, p)| p.trainable && p.value.numel() > 0);

    params.zero_grad();
    let mut tape = Tape::new();
    let x = tape.leaf(input.clone(), !use_params);
    let loss = loss_fn(&mut tape, params, x)?;
    if !tape.value(loss).item().is_finite() {
        return Err(Error::NonFinite("gradient check loss"));
    }
    tape.backward(loss, params)?;

    let mut names = Vec::new();
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    let mut targets = Vec::new();
    if use_params {
        for (id, p) in params.iter().filter(|(_, p)| p.trainable) {
            names.push(p.name.clone());
            analytic.push(p.grad.data().to_vec());
            targets.push(Target::Param(id.index()));
        }
    } else {
        names.push("input".to_string());
        analytic.push(match tape.grad(x) {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; input.numel()],
        });
        targets.push(Target::Input);
    }

    let mut entries: Vec<(usize, usize)> = analytic
        .iter()
        .enumerate()
        .flat_map(|(t, g)| (0..g.len()).map(move |k| (t, k)))
        .collect();
    if let Some(m) = cfg.max_entries {
        if entries.len() > m {
            entries.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
            entries.truncate(m);
            entries.sort_unstable();
        }
    }

    let mut eval = |params: &ParamStore, input: &Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.leaf(input.clone(), false);
        let l = loss_fn(&mut tape, params, x)?;
        let v = tape.value(l).item();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("gradient check loss"))
        }
    };

    let mut per = vec![0.0f64; names.len()];
    let mut perturbed = input.clone();
    for &(t, k) in &entries {
        let numeric = match targets[t] {
            Target::Param(pi) => {
                let id = params.iter().nth(pi).map(|(id, _)| id).expect("param index");
                let orig = params.value(id).data()[k];
                params.get_mut(id).value.data_mut()[k] = orig + cfg.h;
                let lp = eval(params, input);
                params.get_mut(id).value.data_mut()[k] = orig - cfg.h;
                let lm = eval(params, input);
                params.get_mut(id).value.data_mut()[k] = orig;
                (lp? - lm?) / (2.0 * cfg.h)
            }
            Target::Input => {
                let orig = input.data()[k];
                perturbed.data_mut()[k] = orig + cfg.h;
                let lp = eval(params, &perturbed)?;
                perturbed.data_mut()[k] = orig - cfg.h;
                let lm = eval(params, &perturbed)?;
                perturbed.data_mut()[k] = orig;
                (lp - lm) / (2.0 * cfg.h)
            }
        };
        per[t] = per[t].max(relative_error(analytic[t][k], numeric));
    }
    let max_rel_error = per.iter().copied().fold(0.0, f64::max);
    Ok(GradReport {
        per_tensor: names.into_iter().zip(per).collect(),
        max_rel_error,
        entries_checked: entries.len(),
        tolerance: cfg.tolerance,
        pass: max_rel_error < cfg.tolerance,
    })
}

/// Gradient check of a layer chain ending in softmax cross-entropy.
pub fn grad_check_chain(
    specs: &[LayerSpec],
    seed: u64,
    input: &Tensor,
    labels: &[usize],
    cfg: &GradCheckConfig,
) -> Result<GradReport> {
    let mut params = ParamStore::new();
    let mut net = Sequential::build(specs, seed, &mut params)?;
    let ends_in_ce = specs.last() == Some(&LayerSpec::SoftmaxCe);
    grad_check(
        &mut params,
        input,
        |tape, params, x| {
            if ends_in_ce {
                net.loss(tape, params, x, labels, Mode::Train)
            } else {
                let y = net.forward(tape, params, x, Mode::Train)?;
                Ok(tape.sum(y))
            }
        },
        cfg,
    )
}
