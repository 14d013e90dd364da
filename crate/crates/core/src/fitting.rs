//! Identification of `A` and `B` from observed fields.
//!
//! The closed-form estimator regresses masked targets on their sources with
//! ridge least squares: horizontal pairs (oriented west to east) give
//! `M ≈ I + dx·A`, vertical pairs (north to south) give `I + dy·B`. Diagonal
//! pairs are not used for estimation; they only enter the reported losses.
//!
//! The iterative estimator runs full-batch gradient descent on the total
//! masked MSE over every direction of the layouts, with left/up and the
//! diagonals derived from `A` and `B`. The loss is evaluated from per-direction
//! second moments, so each step costs O(C³) regardless of the grid size.
//! Gradients are right-multiplied by the inverse Gauss-Newton block of each
//! generator, `(2·dx²/N)·Σ s·sᵀ` over pairs with a horizontal component (and
//! likewise with `dy` for `B`), so the step size is relative to a Newton step
//! and does not depend on the field's magnitude or offsets.

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FeatureField;
use crate::linalg::{inverse, least_squares, LinalgError, Matrix};
use crate::masking::{pair_indices, Direction, MaskError, QuarterLayout, Scale};
use crate::predictor::{
    masked_errors, DiagonalRule, DirectionMse, ImplicitRule, LinearModelSet, PredictError, Variant,
};
use crate::spectrum::energy_ratio;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("no input fields")]
    EmptyBatch,
    #[error("{fields} fields but {layouts} layouts")]
    LengthMismatch { fields: usize, layouts: usize },
    #[error("field {index} has {found} channels, expected {expected}")]
    ChannelMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("field {index} is {field_height}x{field_width} but its layout is {layout_height}x{layout_width}")]
    LayoutMismatch {
        index: usize,
        field_height: usize,
        field_width: usize,
        layout_height: usize,
        layout_width: usize,
    },
    #[error("batch mixes quarter and half offsets; fit each scale separately")]
    MixedScales,
    #[error(
        "field {index} has offsets ({dx}, {dy}) but the batch uses ({expected_dx}, {expected_dy})"
    )]
    InconsistentOffsets {
        index: usize,
        dx: f64,
        dy: f64,
        expected_dx: f64,
        expected_dy: f64,
    },
    #[error("collapse detected (field_collapsed = {}, model_collapsed = {})", .0.field_collapsed, .0.model_collapsed)]
    Collapsed(CollapseFlags),
    #[error("descent diverged at step {step}: loss {loss:.3e} vs initial {initial:.3e}")]
    Diverged {
        step: usize,
        loss: f64,
        initial: f64,
    },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error("iterative fitting trains variant-2 models with first-order left/up generators")]
    UnsupportedModel,
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub ridge: f64,
    pub max_steps: usize,
    pub step_size: f64,
    pub stop_tol: f64,
    pub collapse_variance_tol: f64,
    pub collapse_norm_tol: f64,
    /// Rescale the batch to unit mean channel variance before fitting.
    pub standardize: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            ridge: 1e-8,
            max_steps: 5000,
            step_size: 1e-2,
            stop_tol: 1e-12,
            collapse_variance_tol: 1e-10,
            collapse_norm_tol: 1e-8,
            standardize: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let checks = [
            ("ridge", self.ridge),
            ("step_size", self.step_size),
            ("stop_tol", self.stop_tol),
            ("collapse_variance_tol", self.collapse_variance_tol),
            ("collapse_norm_tol", self.collapse_norm_tol),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FitError::InvalidConfig(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapseFlags {
    pub field_collapsed: bool,
    pub model_collapsed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    ClosedForm,
    GradientDescent,
}

impl Estimator {
    fn note(self) -> &'static str {
        match self {
            Estimator::ClosedForm => "ridge least squares on horizontal and vertical pairs",
            Estimator::GradientDescent => {
                "stand-in optimizer: deterministic full-batch preconditioned gradient descent on masked MSE"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub step: usize,
    /// `E(A)/E(B)`, absent when `B` has zero energy.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub estimator: Estimator,
    pub estimator_note: String,
    pub scale: Scale,
    pub models: LinearModelSet,
    pub final_loss: f64,
    pub direction_losses: Vec<DirectionMse>,
    /// Source/target pairs used by the estimator.
    pub sample_count: usize,
    pub collapse: CollapseFlags,
    pub steps: usize,
    pub ratio_history: Vec<RatioPoint>,
    pub layouts: Vec<QuarterLayout>,
    pub config: FitConfig,
}

/// Mean channel variance over the batch, compared against the variance
/// tolerance; model norms against the norm tolerance.
pub fn detect_collapse(
    fields: &[FeatureField],
    models: Option<&LinearModelSet>,
    config: &FitConfig,
) -> CollapseFlags {
    let field_collapsed =
        !fields.is_empty() && mean_variance(fields) < config.collapse_variance_tol;
    let model_collapsed = models.is_some_and(|m| {
        m.a().frobenius_norm().max(m.b().frobenius_norm()) < config.collapse_norm_tol
    });
    CollapseFlags {
        field_collapsed,
        model_collapsed,
    }
}

fn mean_variance(fields: &[FeatureField]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for f in fields {
        for v in f.channel_variances() {
            sum += v;
            n += 1;
        }
    }
    sum / n as f64
}

/// Batch checks shared by both estimators; returns `(scale, dx, dy)`.
fn check_batch(
    fields: &[FeatureField],
    layouts: &[QuarterLayout],
) -> Result<(Scale, f64, f64), FitError> {
    if fields.is_empty() {
        return Err(FitError::EmptyBatch);
    }
    if fields.len() != layouts.len() {
        return Err(FitError::LengthMismatch {
            fields: fields.len(),
            layouts: layouts.len(),
        });
    }
    let c = fields[0].channels();
    let scale = layouts[0].scale();
    let offsets = |f: &FeatureField, l: &QuarterLayout| {
        (
            l.dx_cells() as f64 * f.spacing(),
            l.dy_cells() as f64 * f.spacing(),
        )
    };
    let (dx, dy) = offsets(&fields[0], &layouts[0]);
    for (index, (f, l)) in fields.iter().zip(layouts).enumerate() {
        if f.channels() != c {
            return Err(FitError::ChannelMismatch {
                index,
                expected: c,
                found: f.channels(),
            });
        }
        if (f.height(), f.width()) != (l.height(), l.width()) {
            return Err(FitError::LayoutMismatch {
                index,
                field_height: f.height(),
                field_width: f.width(),
                layout_height: l.height(),
                layout_width: l.width(),
            });
        }
        if l.scale() != scale {
            return Err(FitError::MixedScales);
        }
        let (fdx, fdy) = offsets(f, l);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.max(b);
        if !close(fdx, dx) || !close(fdy, dy) {
            return Err(FitError::InconsistentOffsets {
                index,
                dx: fdx,
                dy: fdy,
                expected_dx: dx,
                expected_dy: dy,
            });
        }
    }
    Ok((scale, dx, dy))
}

/// Applies standardization and the field-collapse check.
fn prepare(fields: &[FeatureField], config: &FitConfig) -> Result<Vec<FeatureField>, FitError> {
    config.validate()?;
    let flags = detect_collapse(fields, None, config);
    if flags.field_collapsed {
        return Err(FitError::Collapsed(flags));
    }
    if !config.standardize {
        return Ok(fields.to_vec());
    }
    let v = mean_variance(fields);
    if v <= 0.0 {
        return Err(FitError::Collapsed(CollapseFlags {
            field_collapsed: true,
            model_collapsed: false,
        }));
    }
    let factor = 1.0 / v.sqrt();
    Ok(fields.iter().map(|f| f.scaled(factor)).collect())
}

fn unique_layouts(layouts: &[QuarterLayout]) -> Vec<QuarterLayout> {
    let mut out: Vec<QuarterLayout> = Vec::new();
    for l in layouts {
        if !out.contains(l) {
            out.push(l.clone());
        }
    }
    out
}

/// Per-direction losses and the total masked MSE of `models` on the batch.
fn evaluate(
    fields: &[FeatureField],
    layouts: &[QuarterLayout],
    models: &LinearModelSet,
) -> Result<(f64, Vec<DirectionMse>), FitError> {
    let mut sums: Vec<(Direction, f64, usize)> = Vec::new();
    for (f, l) in fields.iter().zip(layouts) {
        let (_, errs) = masked_errors(f, l, models)?;
        for (d, sq, n) in errs.per_direction {
            match sums.iter_mut().find(|(x, _, _)| *x == d) {
                Some(entry) => {
                    entry.1 += sq;
                    entry.2 += n;
                }
                None => sums.push((d, sq, n)),
            }
        }
    }
    sums.sort_by_key(|(d, _, _)| Direction::ALL.iter().position(|x| x == d));
    let (sq, n) = sums.iter().fold((0.0, 0), |(s, k), e| (s + e.1, k + e.2));
    let losses = sums
        .into_iter()
        .map(|(direction, s, k)| DirectionMse {
            direction,
            mse: s / k as f64,
        })
        .collect();
    Ok((sq / n as f64, losses))
}

/// Closed-form ridge estimate of `A` and `B` for a batch at one scale.
pub fn fit_closed_form(
    fields: &[FeatureField],
    layouts: &[QuarterLayout],
    config: &FitConfig,
) -> Result<FitReport, FitError> {
    let (scale, dx, dy) = check_batch(fields, layouts)?;
    let fields = prepare(fields, config)?;
    let c = fields[0].channels();

    // (from, to, horizontal): pairs are stored with `from` on the west or
    // north side.
    let mut horizontal: (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut vertical: (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    for (f, l) in fields.iter().zip(layouts) {
        for d in l.applicable_directions() {
            let (bucket, forward) = match d {
                Direction::Right => (&mut horizontal, true),
                Direction::Left => (&mut horizontal, false),
                Direction::Down => (&mut vertical, true),
                Direction::Up => (&mut vertical, false),
                _ => continue,
            };
            for p in pair_indices(l, d)? {
                let (s, t) = (
                    f.at(p.source.row, p.source.col),
                    f.at(p.target.row, p.target.col),
                );
                let (from, to) = if forward { (s, t) } else { (t, s) };
                bucket.0.extend_from_slice(from);
                bucket.1.extend_from_slice(to);
            }
        }
    }
    let solve_generator = |(from, to): &(Vec<f64>, Vec<f64>), step: f64| {
        let n = from.len() / c;
        // Samples are rows here; least_squares wants one sample per column.
        let x = Matrix::from_vec(n, c, from.clone())?.transpose();
        let y = Matrix::from_vec(n, c, to.clone())?.transpose();
        let m = least_squares(&x, &y, config.ridge)?;
        Ok::<_, FitError>(m.plus_identity(-1.0).scaled(1.0 / step))
    };
    let a = solve_generator(&horizontal, dx)?;
    let b = solve_generator(&vertical, dy)?;
    let sample_count = (horizontal.0.len() + vertical.0.len()) / c;
    let models = LinearModelSet::new(a, b, scale, dx, dy)?;
    let (final_loss, direction_losses) = evaluate(&fields, layouts, &models)?;
    let collapse = detect_collapse(&fields, Some(&models), config);
    let ratio = energy_ratio(models.a(), models.b()).ok();
    debug!("closed-form fit at {scale} scale: loss {final_loss:.3e}, {sample_count} pairs");
    Ok(FitReport {
        estimator: Estimator::ClosedForm,
        estimator_note: Estimator::ClosedForm.note().to_string(),
        scale,
        models,
        final_loss,
        direction_losses,
        sample_count,
        collapse,
        steps: 0,
        ratio_history: vec![RatioPoint { step: 0, ratio }],
        layouts: unique_layouts(layouts),
        config: config.clone(),
    })
}

/// Second moments of one direction's pairs: `Σ s·sᵀ`, `Σ t·sᵀ`, `Σ tᵀt`.
struct Moments {
    direction: Direction,
    ss: Matrix,
    ts: Matrix,
    tt: f64,
}

fn collect_moments(
    fields: &[FeatureField],
    layouts: &[QuarterLayout],
) -> Result<(Vec<Moments>, usize), FitError> {
    let c = fields[0].channels();
    let mut out: Vec<Moments> = Vec::new();
    let mut values = 0usize;
    for (f, l) in fields.iter().zip(layouts) {
        for (direction, p) in l.assignments() {
            let idx = match out.iter().position(|m| m.direction == direction) {
                Some(i) => i,
                None => {
                    out.push(Moments {
                        direction,
                        ss: Matrix::zeros(c, c),
                        ts: Matrix::zeros(c, c),
                        tt: 0.0,
                    });
                    out.len() - 1
                }
            };
            let m = &mut out[idx];
            let s = f.at(p.source.row, p.source.col);
            let t = f.at(p.target.row, p.target.col);
            for i in 0..c {
                for j in 0..c {
                    m.ss[(i, j)] += s[i] * s[j];
                    m.ts[(i, j)] += t[i] * s[j];
                }
            }
            m.tt += t.iter().map(|v| v * v).sum::<f64>();
            values += c;
        }
    }
    out.sort_by_key(|m| Direction::ALL.iter().position(|x| *x == m.direction));
    Ok((out, values))
}

/// Masked MSE and its gradient with respect to `(A, B)`.
fn loss_and_gradient(
    models: &LinearModelSet,
    moments: &[Moments],
    values: usize,
) -> Result<(f64, Matrix, Matrix), FitError> {
    let (a, b) = (models.a(), models.b());
    let c = a.rows();
    let (dx, dy) = (models.dx(), models.dy());
    let mut loss = 0.0;
    let mut ga = Matrix::zeros(c, c);
    let mut gb = Matrix::zeros(c, c);
    let norm = 1.0 / values as f64;
    for m in moments {
        let p = models.projector(m.direction)?;
        let pss = &p * &m.ss;
        // Σ‖Ps − t‖² = tr(P·Sss·Pᵀ) − 2·tr(Sts·Pᵀ) + Σ tᵀt
        let quad: f64 = pss
            .as_slice()
            .iter()
            .zip(p.as_slice())
            .map(|(x, y)| x * y)
            .sum();
        let cross: f64 =
            m.ts.as_slice()
                .iter()
                .zip(p.as_slice())
                .map(|(x, y)| x * y)
                .sum();
        loss += quad - 2.0 * cross + m.tt;
        // ∂/∂P = 2(P·Sss − Sts)
        let gp = (&pss - &m.ts).scaled(2.0 * norm);
        let (sx, sy) = m.direction.signs();
        let (sx, sy) = (sx as f64, sy as f64);
        match (sx != 0.0, sy != 0.0) {
            (true, false) => ga += &gp.scaled(sx * dx),
            (false, true) => gb += &gp.scaled(sy * dy),
            _ => {
                // P = I + sx·dx·A + sy·dy·B + sx·sy·dx·dy·K(A, B)
                let k = sx * sy * dx * dy;
                ga += &gp.scaled(sx * dx);
                gb += &gp.scaled(sy * dy);
                let (bt, at) = (b.transpose(), a.transpose());
                match models.diagonal_rule() {
                    DiagonalRule::Averaged => {
                        ga += &(&(&gp * &bt) + &(&bt * &gp)).scaled(0.5 * k);
                        gb += &(&(&at * &gp) + &(&gp * &at)).scaled(0.5 * k);
                    }
                    DiagonalRule::Product => {
                        // K = B·A
                        ga += &(&bt * &gp).scaled(k);
                        gb += &(&gp * &at).scaled(k);
                    }
                }
            }
        }
    }
    Ok(((loss * norm).max(0.0), ga, gb))
}

/// Inverse Gauss-Newton blocks for `A` and `B`.
fn preconditioners(
    moments: &[Moments],
    values: usize,
    dx: f64,
    dy: f64,
) -> Result<(Matrix, Matrix), FitError> {
    let c = moments[0].ss.rows();
    let mut ha = Matrix::zeros(c, c);
    let mut hb = Matrix::zeros(c, c);
    for m in moments {
        let (sx, sy) = m.direction.signs();
        if sx != 0 {
            ha += &m.ss;
        }
        if sy != 0 {
            hb += &m.ss;
        }
    }
    let scaled_inverse = |h: Matrix, step: f64| {
        let h = h.scaled(2.0 * step * step / values as f64);
        // A tiny relative ridge keeps single-trajectory batches invertible.
        let jitter = 1e-12 * h.trace().max(f64::MIN_POSITIVE) / c as f64;
        inverse(&h.plus_identity(jitter))
    };
    Ok((scaled_inverse(ha, dx)?, scaled_inverse(hb, dy)?))
}

/// Preconditioned gradient descent on the masked MSE from `init`, returning
/// the best iterate seen.
pub fn fit_iterative(
    fields: &[FeatureField],
    layouts: &[QuarterLayout],
    init: &LinearModelSet,
    config: &FitConfig,
) -> Result<FitReport, FitError> {
    let (scale, _, _) = check_batch(fields, layouts)?;
    let fields = prepare(fields, config)?;
    if init.variant() != Variant::Two || init.implicit_rule() != ImplicitRule::FirstOrder {
        return Err(FitError::UnsupportedModel);
    }
    for (f, l) in fields.iter().zip(layouts) {
        init.check_compatible(f, l)?;
    }
    let (moments, values) = collect_moments(&fields, layouts)?;
    let (pa, pb) = preconditioners(&moments, values, init.dx(), init.dy())?;
    let rebuild = |a: Matrix, b: Matrix| {
        LinearModelSet::new(a, b, init.scale(), init.dx(), init.dy())
            .map(|m| m.with_diagonal_rule(init.diagonal_rule()))
    };
    let history_every = (config.max_steps / 20).max(1);
    let ratio_at = |m: &LinearModelSet, step: usize| RatioPoint {
        step,
        ratio: energy_ratio(m.a(), m.b()).ok(),
    };

    let mut current = init.clone();
    let (initial, mut ga, mut gb) = loss_and_gradient(&current, &moments, values)?;
    let mut best = (initial, current.clone());
    let mut prev = initial;
    let mut history = vec![ratio_at(&current, 0)];
    let mut steps = 0;
    if initial > 0.0 {
        for step in 1..=config.max_steps {
            steps = step;
            let a = current.a() - &(&ga * &pa).scaled(config.step_size);
            let b = current.b() - &(&gb * &pb).scaled(config.step_size);
            if !(a.is_finite() && b.is_finite()) {
                return Err(FitError::Diverged {
                    step,
                    loss: f64::INFINITY,
                    initial,
                });
            }
            current = rebuild(a, b)?;
            let (loss, nga, ngb) = loss_and_gradient(&current, &moments, values)?;
            if !loss.is_finite() || loss > 1e6 * initial {
                return Err(FitError::Diverged {
                    step,
                    loss,
                    initial,
                });
            }
            if loss < best.0 {
                best = (loss, current.clone());
            }
            if step % history_every == 0 {
                history.push(ratio_at(&current, step));
            }
            if (prev - loss).abs() < config.stop_tol {
                break;
            }
            prev = loss;
            ga = nga;
            gb = ngb;
        }
    }
    if history.last().map(|p| p.step) != Some(steps) {
        history.push(ratio_at(&current, steps));
    }
    let models = best.1;
    let (final_loss, direction_losses) = evaluate(&fields, layouts, &models)?;
    debug!("descent at {scale} scale: {steps} steps, loss {initial:.3e} -> {final_loss:.3e}");
    Ok(FitReport {
        estimator: Estimator::GradientDescent,
        estimator_note: Estimator::GradientDescent.note().to_string(),
        scale,
        collapse: detect_collapse(&fields, Some(&models), config),
        models,
        final_loss,
        direction_losses,
        sample_count: values / fields[0].channels(),
        steps,
        ratio_history: history,
        layouts: unique_layouts(layouts),
        config: config.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    ClosedForm,
    /// Descent from zero models.
    Iterative,
    /// Closed form, then descent started from it; both reports are kept.
    Both,
}

/// Fits each scale present in the batch separately (quarter offsets from
/// center layouts, half offsets from corners), quarter first.
pub fn fit_multiscale(
    fields: &[FeatureField],
    layouts: &[QuarterLayout],
    config: &FitConfig,
    mode: FitMode,
) -> Result<Vec<FitReport>, FitError> {
    if fields.is_empty() {
        return Err(FitError::EmptyBatch);
    }
    if fields.len() != layouts.len() {
        return Err(FitError::LengthMismatch {
            fields: fields.len(),
            layouts: layouts.len(),
        });
    }
    let mut reports = Vec::new();
    for scale in [Scale::Quarter, Scale::Half] {
        let (fs, ls): (Vec<FeatureField>, Vec<QuarterLayout>) = fields
            .iter()
            .zip(layouts)
            .filter(|(_, l)| l.scale() == scale)
            .map(|(f, l)| (f.clone(), l.clone()))
            .unzip();
        if fs.is_empty() {
            continue;
        }
        match mode {
            FitMode::ClosedForm => reports.push(fit_closed_form(&fs, &ls, config)?),
            FitMode::Iterative => {
                let c = fs[0].channels();
                let init = LinearModelSet::for_layout(
                    Matrix::zeros(c, c),
                    Matrix::zeros(c, c),
                    &ls[0],
                    fs[0].spacing(),
                )?;
                reports.push(fit_iterative(&fs, &ls, &init, config)?);
            }
            FitMode::Both => {
                let closed = fit_closed_form(&fs, &ls, config)?;
                let refined = fit_iterative(&fs, &ls, &closed.models, config)?;
                reports.push(closed);
                reports.push(refined);
            }
        }
    }
    Ok(reports)
}
