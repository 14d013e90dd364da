//! Cross-block linear prediction.
//!
//! Every direction is predicted by a projector `I + s·G`, where `s` is the
//! step length (dx, dy or √(dx²+dy²)) and `G` the direction's generator.
//! Right and down use `A` and `B`. The other directions are explicit models
//! or are derived from `A` and `B`:
//!
//! * left/up: `−A`, `−B` (first order), or the exact inverse generator
//!   `((I + dx·A)⁻¹ − I)/dx`;
//! * diagonals: `C = [dx·Gₕ + dy·Gᵥ + dx·dy·(GₕGᵥ + GᵥGₕ)/2] / √(dx²+dy²)`,
//!   where `Gₕ`, `Gᵥ` are the horizontal and vertical generators for the
//!   diagonal's signs. For commuting generators the projector is exactly
//!   `(I + dx·Gₕ)(I + dy·Gᵥ)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FeatureField;
use crate::linalg::{inverse, LinalgError, Matrix};
use crate::masking::{Direction, MaskError, QuarterLayout, Scale};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("model matrices are {found}x{found} but {expected} channels are required")]
    ChannelMismatch { expected: usize, found: usize },
    #[error(
        "field is {field_height}x{field_width} but the layout is {layout_height}x{layout_width}"
    )]
    LayoutMismatch {
        field_height: usize,
        field_width: usize,
        layout_height: usize,
        layout_width: usize,
    },
    #[error(
        "models are for {model_scale} offsets ({model_dx}, {model_dy}) but the layout needs {layout_scale} offsets ({layout_dx}, {layout_dy})"
    )]
    ScaleMismatch {
        model_scale: Scale,
        model_dx: f64,
        model_dy: f64,
        layout_scale: Scale,
        layout_dx: f64,
        layout_dy: f64,
    },
    #[error("direction {0} is explicit in this model set and is not derived")]
    AlreadyExplicit(Direction),
    #[error("offsets must be finite and positive, got ({dx}, {dy})")]
    InvalidOffset { dx: f64, dy: f64 },
    #[error("model matrix contains a non-finite value")]
    NonFinite,
    #[error("variant {0} is not one of 2, 4, 8")]
    UnknownVariant(u8),
    #[error("variant {variant} needs {what}")]
    MissingExplicit { variant: u8, what: &'static str },
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Number of explicit models: right/down only, plus left/up, plus the four
/// diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Variant {
    Two,
    Four,
    Eight,
}

impl Variant {
    pub fn count(self) -> u8 {
        match self {
            Variant::Two => 2,
            Variant::Four => 4,
            Variant::Eight => 8,
        }
    }
}

impl TryFrom<u8> for Variant {
    type Error = PredictError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            2 => Ok(Variant::Two),
            4 => Ok(Variant::Four),
            8 => Ok(Variant::Eight),
            other => Err(PredictError::UnknownVariant(other)),
        }
    }
}

impl From<Variant> for u8 {
    fn from(v: Variant) -> u8 {
        v.count()
    }
}

/// How left/up generators are derived when not explicit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImplicitRule {
    /// `−A`, `−B`.
    #[default]
    FirstOrder,
    /// `((I + dx·A)⁻¹ − I)/dx`.
    ExactInverse,
}

/// How derived diagonal generators combine the axis generators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagonalRule {
    /// Symmetrized cross term `(GₕGᵥ + GᵥGₕ)/2`.
    #[default]
    Averaged,
    /// One-sided cross term `GᵥGₕ`: horizontal step first, then vertical.
    Product,
}

const DIAGONALS: [Direction; 4] = [
    Direction::DownRight,
    Direction::DownLeft,
    Direction::UpRight,
    Direction::UpLeft,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct LinearModelSet {
    a: Matrix,
    b: Matrix,
    variant: Variant,
    left: Option<Matrix>,
    up: Option<Matrix>,
    /// Down-right, down-left, up-right, up-left.
    diagonals: Option<Vec<Matrix>>,
    scale: Scale,
    dx: f64,
    dy: f64,
    implicit_rule: ImplicitRule,
    diagonal_rule: DiagonalRule,
}

impl LinearModelSet {
    /// Variant-2 model set: right and down explicit, everything else derived.
    pub fn new(a: Matrix, b: Matrix, scale: Scale, dx: f64, dy: f64) -> Result<Self, PredictError> {
        if !(dx.is_finite() && dx > 0.0 && dy.is_finite() && dy > 0.0) {
            return Err(PredictError::InvalidOffset { dx, dy });
        }
        let c = a.rows();
        check_matrix(&a, c)?;
        check_matrix(&b, c)?;
        Ok(Self {
            a,
            b,
            variant: Variant::Two,
            left: None,
            up: None,
            diagonals: None,
            scale,
            dx,
            dy,
            implicit_rule: ImplicitRule::default(),
            diagonal_rule: DiagonalRule::default(),
        })
    }

    /// Model set sized for a layout on a grid with the given spacing.
    pub fn for_layout(
        a: Matrix,
        b: Matrix,
        layout: &QuarterLayout,
        spacing: f64,
    ) -> Result<Self, PredictError> {
        Self::new(
            a,
            b,
            layout.scale(),
            layout.dx_cells() as f64 * spacing,
            layout.dy_cells() as f64 * spacing,
        )
    }

    /// Variant 4: explicit left and up generators.
    pub fn with_left_up(mut self, left: Matrix, up: Matrix) -> Result<Self, PredictError> {
        let c = self.channels();
        check_matrix(&left, c)?;
        check_matrix(&up, c)?;
        self.left = Some(left);
        self.up = Some(up);
        self.diagonals = None;
        self.variant = Variant::Four;
        Ok(self)
    }

    /// Variant 8: explicit left, up and diagonal generators (diagonals in
    /// the order down-right, down-left, up-right, up-left).
    pub fn with_all_explicit(
        self,
        left: Matrix,
        up: Matrix,
        diagonals: [Matrix; 4],
    ) -> Result<Self, PredictError> {
        let mut out = self.with_left_up(left, up)?;
        for d in &diagonals {
            check_matrix(d, out.channels())?;
        }
        out.diagonals = Some(diagonals.into());
        out.variant = Variant::Eight;
        Ok(out)
    }

    pub fn with_implicit_rule(mut self, rule: ImplicitRule) -> Self {
        self.implicit_rule = rule;
        self
    }

    pub fn with_diagonal_rule(mut self, rule: DiagonalRule) -> Self {
        self.diagonal_rule = rule;
        self
    }

    /// Variant-8 set whose explicit models equal this set's generators.
    pub fn to_variant8(&self) -> Result<Self, PredictError> {
        let left = self.generator(Direction::Left)?;
        let up = self.generator(Direction::Up)?;
        let mut diagonals = Vec::with_capacity(4);
        for d in DIAGONALS {
            diagonals.push(self.generator(d)?);
        }
        let diagonals: [Matrix; 4] = diagonals.try_into().expect("four diagonals");
        self.clone().with_all_explicit(left, up, diagonals)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn channels(&self) -> usize {
        self.a.rows()
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn implicit_rule(&self) -> ImplicitRule {
        self.implicit_rule
    }

    pub fn diagonal_rule(&self) -> DiagonalRule {
        self.diagonal_rule
    }

    /// Step length of the projector for `direction`.
    pub fn step(&self, direction: Direction) -> f64 {
        let (sx, sy) = direction.signs();
        match (sx != 0, sy != 0) {
            (true, false) => self.dx,
            (false, true) => self.dy,
            _ => self.dx.hypot(self.dy),
        }
    }

    /// The explicit generator for `direction`, if this variant holds one.
    pub fn explicit(&self, direction: Direction) -> Option<&Matrix> {
        match direction {
            Direction::Right => Some(&self.a),
            Direction::Down => Some(&self.b),
            Direction::Left => self.left.as_ref(),
            Direction::Up => self.up.as_ref(),
            d => {
                let i = DIAGONALS.iter().position(|x| *x == d)?;
                self.diagonals.as_ref().map(|m| &m[i])
            }
        }
    }

    /// Explicit or derived generator for `direction`.
    pub fn generator(&self, direction: Direction) -> Result<Matrix, PredictError> {
        match self.explicit(direction) {
            Some(m) => Ok(m.clone()),
            None => self.derive_implicit(direction),
        }
    }

    /// Derives the generator of a direction this variant does not hold.
    pub fn derive_implicit(&self, direction: Direction) -> Result<Matrix, PredictError> {
        if self.explicit(direction).is_some() {
            return Err(PredictError::AlreadyExplicit(direction));
        }
        match direction {
            Direction::Left => self.inverse_generator(&self.a, self.dx),
            Direction::Up => self.inverse_generator(&self.b, self.dy),
            d => {
                let (sx, sy) = d.signs();
                let gh = if sx > 0 {
                    self.a.clone()
                } else {
                    self.generator(Direction::Left)?
                };
                let gv = if sy > 0 {
                    self.b.clone()
                } else {
                    self.generator(Direction::Up)?
                };
                let cross = match self.diagonal_rule {
                    DiagonalRule::Averaged => (&(&gh * &gv) + &(&gv * &gh)).scaled(0.5),
                    DiagonalRule::Product => &gv * &gh,
                };
                let sum =
                    &(&gh.scaled(self.dx) + &gv.scaled(self.dy)) + &cross.scaled(self.dx * self.dy);
                Ok(sum.scaled(1.0 / self.dx.hypot(self.dy)))
            }
        }
    }

    fn inverse_generator(&self, m: &Matrix, step: f64) -> Result<Matrix, PredictError> {
        Ok(match self.implicit_rule {
            ImplicitRule::FirstOrder => -m,
            ImplicitRule::ExactInverse => {
                let inv = inverse(&m.scaled(step).plus_identity(1.0))?;
                inv.plus_identity(-1.0).scaled(1.0 / step)
            }
        })
    }

    /// `I + step·G` for `direction`.
    pub fn projector(&self, direction: Direction) -> Result<Matrix, PredictError> {
        Ok(self
            .generator(direction)?
            .scaled(self.step(direction))
            .plus_identity(1.0))
    }

    /// Checks that the models can predict over `layout` on `field`.
    pub fn check_compatible(
        &self,
        field: &FeatureField,
        layout: &QuarterLayout,
    ) -> Result<(), PredictError> {
        if self.channels() != field.channels() {
            return Err(PredictError::ChannelMismatch {
                expected: field.channels(),
                found: self.channels(),
            });
        }
        if (layout.height(), layout.width()) != (field.height(), field.width()) {
            return Err(PredictError::LayoutMismatch {
                field_height: field.height(),
                field_width: field.width(),
                layout_height: layout.height(),
                layout_width: layout.width(),
            });
        }
        let layout_dx = layout.dx_cells() as f64 * field.spacing();
        let layout_dy = layout.dy_cells() as f64 * field.spacing();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
        if self.scale != layout.scale() || !close(self.dx, layout_dx) || !close(self.dy, layout_dy)
        {
            return Err(PredictError::ScaleMismatch {
                model_scale: self.scale,
                model_dx: self.dx,
                model_dy: self.dy,
                layout_scale: layout.scale(),
                layout_dx,
                layout_dy,
            });
        }
        Ok(())
    }
}

fn check_matrix(m: &Matrix, c: usize) -> Result<(), PredictError> {
    if m.shape() != (c, c) {
        return Err(PredictError::ChannelMismatch {
            expected: c,
            found: m.rows().max(m.cols()),
        });
    }
    if !m.is_finite() {
        return Err(PredictError::NonFinite);
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    variant: Variant,
    scale: Scale,
    dx: f64,
    dy: f64,
    #[serde(rename = "A")]
    a: Matrix,
    #[serde(rename = "B")]
    b: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    up: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diagonals: Option<Vec<Matrix>>,
    #[serde(default)]
    implicit_rule: ImplicitRule,
    #[serde(default)]
    diagonal_rule: DiagonalRule,
}

impl From<LinearModelSet> for ModelRecord {
    fn from(m: LinearModelSet) -> Self {
        ModelRecord {
            variant: m.variant,
            scale: m.scale,
            dx: m.dx,
            dy: m.dy,
            a: m.a,
            b: m.b,
            left: m.left,
            up: m.up,
            diagonals: m.diagonals,
            implicit_rule: m.implicit_rule,
            diagonal_rule: m.diagonal_rule,
        }
    }
}

impl TryFrom<ModelRecord> for LinearModelSet {
    type Error = PredictError;

    fn try_from(r: ModelRecord) -> Result<Self, Self::Error> {
        let base = LinearModelSet::new(r.a, r.b, r.scale, r.dx, r.dy)?
            .with_implicit_rule(r.implicit_rule)
            .with_diagonal_rule(r.diagonal_rule);
        let variant = r.variant.count();
        match r.variant {
            Variant::Two => Ok(base),
            Variant::Four => {
                let (Some(left), Some(up)) = (r.left, r.up) else {
                    return Err(PredictError::MissingExplicit {
                        variant,
                        what: "left and up matrices",
                    });
                };
                base.with_left_up(left, up)
            }
            Variant::Eight => {
                let (Some(left), Some(up), Some(diagonals)) = (r.left, r.up, r.diagonals) else {
                    return Err(PredictError::MissingExplicit {
                        variant,
                        what: "left, up and four diagonal matrices",
                    });
                };
                let diagonals: [Matrix; 4] =
                    diagonals
                        .try_into()
                        .map_err(|_| PredictError::MissingExplicit {
                            variant,
                            what: "exactly four diagonal matrices",
                        })?;
                base.with_all_explicit(left, up, diagonals)
            }
        }
    }
}

/// Applies the `direction` projector to one source vector.
pub fn project(
    models: &LinearModelSet,
    source: &[f64],
    direction: Direction,
) -> Result<Vec<f64>, PredictError> {
    if source.len() != models.channels() {
        return Err(PredictError::ChannelMismatch {
            expected: source.len(),
            found: models.channels(),
        });
    }
    Ok(models.projector(direction)?.mat_vec(source))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionMse {
    pub direction: Direction,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub directions: Vec<DirectionMse>,
    pub total: f64,
}

/// Squared-error sums per direction, with the number of values summed.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ErrorSums {
    pub(crate) per_direction: Vec<(Direction, f64, usize)>,
}

impl ErrorSums {
    pub(crate) fn total(&self) -> (f64, usize) {
        self.per_direction
            .iter()
            .fold((0.0, 0), |(s, n), (_, e, k)| (s + e, n + k))
    }
}

pub(crate) fn masked_errors(
    field: &FeatureField,
    layout: &QuarterLayout,
    models: &LinearModelSet,
) -> Result<(FeatureField, ErrorSums), PredictError> {
    models.check_compatible(field, layout)?;
    let directions = layout.applicable_directions();
    let projectors = directions
        .iter()
        .map(|&d| models.projector(d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sums: Vec<(Direction, f64, usize)> = directions.iter().map(|&d| (d, 0.0, 0)).collect();
    let mut predicted = field.clone();
    let c = field.channels();
    let mut out = vec![0.0; c];
    for (direction, pair) in layout.assignments() {
        let k = directions
            .iter()
            .position(|d| *d == direction)
            .expect("assigned directions are applicable");
        projectors[k].mat_vec_into(field.at(pair.source.row, pair.source.col), &mut out);
        let truth = field.at(pair.target.row, pair.target.col);
        sums[k].1 += out
            .iter()
            .zip(truth)
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>();
        sums[k].2 += c;
        predicted
            .at_mut(pair.target.row, pair.target.col)
            .copy_from_slice(&out);
    }
    Ok((
        predicted,
        ErrorSums {
            per_direction: sums,
        },
    ))
}

/// Fills every masked cell by projecting its assigned source cell and
/// reports the mean squared error per direction and over all masked values.
pub fn predict_masked(
    field: &FeatureField,
    layout: &QuarterLayout,
    models: &LinearModelSet,
) -> Result<(FeatureField, MseReport), PredictError> {
    let (predicted, sums) = masked_errors(field, layout, models)?;
    let (total_sq, total_n) = sums.total();
    let directions = sums
        .per_direction
        .iter()
        .map(|&(direction, sq, n)| DirectionMse {
            direction,
            mse: sq / n as f64,
        })
        .collect();
    Ok((
        predicted,
        MseReport {
            directions,
            total: total_sq / total_n as f64,
        },
    ))
}
