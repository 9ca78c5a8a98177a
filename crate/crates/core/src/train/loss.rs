//! Composite training loss: cross entropy over the six categorical heads
//! plus a bivariate-Gaussian negative log likelihood for the landing spot,
//! blended by the weight `alpha`.

use crate::autodiff::{Graph, Tensor, Var};
use crate::model::{HeadVars, StrokeIds};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Ground truth for one decoded step. `mask` is false for padding steps,
/// which are excluded from every loss term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTargets {
    pub shot_type: usize,
    pub aroundhead: usize,
    pub backhand: usize,
    pub height: usize,
    pub player_loc: usize,
    pub opponent_loc: usize,
    pub x: f64,
    pub y: f64,
    pub mask: bool,
}

impl StepTargets {
    pub fn from_stroke(stroke: &StrokeIds) -> StepTargets {
        StepTargets {
            shot_type: stroke.shot_type,
            aroundhead: stroke.aroundhead,
            backhand: stroke.backhand,
            height: stroke.height,
            player_loc: stroke.player_loc,
            opponent_loc: stroke.opponent_loc,
            x: stroke.x,
            y: stroke.y,
            mask: true,
        }
    }
}

/// Batch-mean loss components, as read off the tape after a forward pass.
/// `total` is the weighted blend actually optimized; the rest are the
/// unweighted per-step means of each head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub shot_type: f64,
    pub shot_location: f64,
    pub backhand: f64,
    pub aroundhead: f64,
    pub height: f64,
    pub player_location: f64,
    pub opponent_location: f64,
}

impl LossBreakdown {
    /// Recomputes the weighted total from the stored component means,
    /// mirroring the on-tape combination term for term.
    pub fn recombined(&self, alpha: f64) -> f64 {
        let main = self.shot_type + self.shot_location;
        let aux = self.backhand + self.aroundhead + self.height
            + self.player_location
            + self.opponent_location;
        alpha * main + (1.0 - alpha) * aux
    }
}

struct ComponentSums {
    shot_type: Var,
    shot_location: Var,
    backhand: Var,
    aroundhead: Var,
    height: Var,
    player_location: Var,
    opponent_location: Var,
}

/// Builds the composite loss for one batch on the tape and returns its
/// scalar variable together with the component means.
///
/// Each entry pairs the decoder head outputs for one rally with the
/// aligned ground-truth steps. Component losses are summed per rally,
/// masked steps contribute nothing, and the batch mean of each component
/// divides by the total number of unmasked steps. The optimized total is
///
/// `alpha * (shot_type + shot_location) + (1 - alpha) * (backhand +
/// aroundhead + height + player_location + opponent_location)`.
pub fn composite_loss(
    g: &mut Graph,
    per_rally: &[(HeadVars, Vec<StepTargets>)],
    alpha: f64,
) -> Result<(Var, LossBreakdown)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "loss weight alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if per_rally.is_empty() {
        return Err(Error::Config("loss needs at least one rally".into()));
    }

    let mut sums: Option<ComponentSums> = None;
    let mut steps = 0usize;
    for (heads, targets) in per_rally {
        let rows = g.value(heads.shot_logits).rows();
        if rows != targets.len() {
            return Err(Error::Config(format!(
                "rally has {rows} decoded steps but {} target steps",
                targets.len()
            )));
        }
        steps += targets.iter().filter(|t| t.mask).count();
        let rally = rally_sums(g, heads, targets);
        sums = Some(match sums {
            None => rally,
            Some(acc) => ComponentSums {
                shot_type: g.add(acc.shot_type, rally.shot_type),
                shot_location: g.add(acc.shot_location, rally.shot_location),
                backhand: g.add(acc.backhand, rally.backhand),
                aroundhead: g.add(acc.aroundhead, rally.aroundhead),
                height: g.add(acc.height, rally.height),
                player_location: g.add(acc.player_location, rally.player_location),
                opponent_location: g.add(acc.opponent_location, rally.opponent_location),
            },
        });
    }
    if steps == 0 {
        return Err(Error::Config("every target step in the batch is masked".into()));
    }
    let sums = sums.expect("batch is nonempty");

    let scale = 1.0 / steps as f64;
    let shot_type = g.mul_scalar(sums.shot_type, scale);
    let shot_location = g.mul_scalar(sums.shot_location, scale);
    let backhand = g.mul_scalar(sums.backhand, scale);
    let aroundhead = g.mul_scalar(sums.aroundhead, scale);
    let height = g.mul_scalar(sums.height, scale);
    let player_location = g.mul_scalar(sums.player_location, scale);
    let opponent_location = g.mul_scalar(sums.opponent_location, scale);

    let main = g.add(shot_type, shot_location);
    let aux = g.add(backhand, aroundhead);
    let aux = g.add(aux, height);
    let aux = g.add(aux, player_location);
    let aux = g.add(aux, opponent_location);
    let weighted_main = g.mul_scalar(main, alpha);
    let weighted_aux = g.mul_scalar(aux, 1.0 - alpha);
    let total = g.add(weighted_main, weighted_aux);

    let breakdown = LossBreakdown {
        total: g.scalar_value(total),
        shot_type: g.scalar_value(shot_type),
        shot_location: g.scalar_value(shot_location),
        backhand: g.scalar_value(backhand),
        aroundhead: g.scalar_value(aroundhead),
        height: g.scalar_value(height),
        player_location: g.scalar_value(player_location),
        opponent_location: g.scalar_value(opponent_location),
    };
    Ok((total, breakdown))
}

fn rally_sums(g: &mut Graph, heads: &HeadVars, targets: &[StepTargets]) -> ComponentSums {
    let m = targets.len();
    let mask_data: Vec<f64> = targets
        .iter()
        .map(|t| if t.mask { 1.0 } else { 0.0 })
        .collect();
    let mask = g.constant(Tensor::new(vec![m, 1], mask_data));

    let ce = |g: &mut Graph, logits: Var, ids: Vec<usize>| -> Var {
        let lp = g.log_softmax_rows(logits);
        let picked = g.take_per_row(lp, &ids);
        let masked = g.mul(picked, mask);
        let sum = g.sum_all(masked);
        g.neg(sum)
    };

    let shot_type = ce(g, heads.shot_logits, targets.iter().map(|t| t.shot_type).collect());
    let backhand = ce(g, heads.backhand_logits, targets.iter().map(|t| t.backhand).collect());
    let aroundhead = ce(
        g,
        heads.aroundhead_logits,
        targets.iter().map(|t| t.aroundhead).collect(),
    );
    let height = ce(g, heads.height_logits, targets.iter().map(|t| t.height).collect());
    let player_location = ce(
        g,
        heads.player_loc_logits,
        targets.iter().map(|t| t.player_loc).collect(),
    );
    let opponent_location = ce(
        g,
        heads.opponent_loc_logits,
        targets.iter().map(|t| t.opponent_loc).collect(),
    );

    let shot_location = gaussian_nll_sum(g, heads, targets, mask);

    ComponentSums {
        shot_type,
        shot_location,
        backhand,
        aroundhead,
        height,
        player_location,
        opponent_location,
    }
}

/// Masked sum over steps of the bivariate-Gaussian negative log
/// likelihood
///
/// `ln(2*pi) + ln(sx) + ln(sy) + 0.5 * ln(1 - rho^2) + z / (2 * (1 - rho^2))`
///
/// with `z = (dx/sx)^2 - 2*rho*(dx/sx)*(dy/sy) + (dy/sy)^2`. The decoder
/// already floors the deviations and bounds `|rho| <= 0.99`, so every
/// logarithm here has a strictly positive argument.
fn gaussian_nll_sum(g: &mut Graph, heads: &HeadVars, targets: &[StepTargets], mask: Var) -> Var {
    let m = targets.len();
    let ln_two_pi = std::f64::consts::TAU.ln();
    let tx = g.constant(Tensor::new(vec![m, 1], targets.iter().map(|t| t.x).collect()));
    let ty = g.constant(Tensor::new(vec![m, 1], targets.iter().map(|t| t.y).collect()));

    let area = &heads.area;
    let dx = g.sub(tx, area.mu_x);
    let dy = g.sub(ty, area.mu_y);
    let ax = g.div(dx, area.sigma_x);
    let ay = g.div(dy, area.sigma_y);
    let ax2 = g.square(ax);
    let ay2 = g.square(ay);
    let cross = g.mul(ax, ay);
    let cross = g.mul(area.rho, cross);
    let cross = g.mul_scalar(cross, 2.0);
    let z = g.add(ax2, ay2);
    let z = g.sub(z, cross);

    let rho2 = g.square(area.rho);
    let one_minus = g.neg(rho2);
    let one_minus = g.add_scalar(one_minus, 1.0);
    let half_ln = g.ln(one_minus);
    let half_ln = g.mul_scalar(half_ln, 0.5);
    let denom = g.mul_scalar(one_minus, 2.0);
    let quad = g.div(z, denom);

    let ln_sx = g.ln(area.sigma_x);
    let ln_sy = g.ln(area.sigma_y);
    let row = g.add(ln_sx, ln_sy);
    let row = g.add(row, half_ln);
    let row = g.add(row, quad);
    let row = g.add_scalar(row, ln_two_pi);

    let masked = g.mul(row, mask);
    g.sum_all(masked)
}
