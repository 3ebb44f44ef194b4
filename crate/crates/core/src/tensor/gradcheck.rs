use rand::seq::index::sample;

use super::{ParamStore, Tape, Var};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub h: f64,
    /// Parameters with more entries than this are checked on a random subsample of this size.
    pub max_entries: usize,
    /// Denominator floor of the relative error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            h: 1e-5,
            max_entries: 10_000,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and entry of the largest error.
    pub worst: Option<(String, (usize, usize))>,
    pub entries_checked: usize,
    /// Largest relative error per parameter.
    pub per_param: Vec<(String, f64)>,
}

/// Compares backward gradients against central finite differences.
///
/// `forward` builds a scalar loss on the supplied tape. The tape is in
/// training mode but refuses stochastic ops, so a forward pass with active
/// dropout fails instead of producing a meaningless report.
pub fn grad_check<F>(
    store: &ParamStore,
    mut forward: F,
    cfg: GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::deterministic(true);
    let loss = forward(&mut tape, store)?;
    let grads = tape.backward(loss)?;

    let mut probe = store.clone();
    let mut eval = |p: &ParamStore| -> Result<f64> {
        let mut t = Tape::deterministic(true);
        let l = forward(&mut t, p)?;
        t.scalar(l)
    };

    let mut rng = rng::seeded(cfg.seed, rng::stream::GRAD_CHECK);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        entries_checked: 0,
        per_param: Vec::new(),
    };
    for id in store.ids() {
        let analytic = grads.get_or_zeros(store, id);
        let (rows, cols) = analytic.dim();
        let total = rows * cols;
        let picks: Vec<usize> = if total > cfg.max_entries {
            sample(&mut rng, total, cfg.max_entries).into_vec()
        } else {
            (0..total).collect()
        };
        let mut worst_here = 0.0f64;
        for flat in picks {
            let (r, c) = (flat / cols, flat % cols);
            let orig = store.value(id)[[r, c]];
            probe.value_mut(id)[[r, c]] = orig + cfg.h;
            let up = eval(&probe)?;
            probe.value_mut(id)[[r, c]] = orig - cfg.h;
            let down = eval(&probe)?;
            probe.value_mut(id)[[r, c]] = orig;

            let numeric = (up - down) / (2.0 * cfg.h);
            let a = analytic[[r, c]];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            report.entries_checked += 1;
            worst_here = worst_here.max(rel);
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((store.name(id).to_string(), (r, c)));
            }
        }
        report
            .per_param
            .push((store.name(id).to_string(), worst_here));
    }
    Ok(report)
}
