//! Marginal-cost models mapping a firm's degree (and, for the general model,
//! its output) to a per-unit cost.
//!
//! The shifted convex family stores its base function `f` tabulated over the
//! integer grid `-(n-1)..=n-1`, which is the only place the stability results
//! ever evaluate it.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DegreeSequence;

/// Step used for central finite differences in `q`.
pub const FD_STEP: f64 = 1e-6;

/// `c_i(g) = γ0 − γ·η_i(g)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearCost {
    pub gamma0: f64,
    pub gamma: f64,
}

impl LinearCost {
    pub fn new(gamma0: f64, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma0.is_finite() {
            return Err(Error::Invalid(format!(
                "linear cost needs finite gamma0 and gamma >= 0, got ({gamma0}, {gamma})"
            )));
        }
        Ok(Self { gamma0, gamma })
    }
}

/// A named base function `f` evaluated on integer arguments.
pub trait BaseFunction: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, eta: i64) -> f64;
}

struct QuadraticPsi(f64);
struct AbsBase;
struct ZeroBase;

impl BaseFunction for QuadraticPsi {
    fn name(&self) -> &str {
        "quadratic_psi"
    }
    fn eval(&self, eta: i64) -> f64 {
        let e = eta as f64;
        e * e + self.0
    }
}

impl BaseFunction for AbsBase {
    fn name(&self) -> &str {
        "abs"
    }
    fn eval(&self, eta: i64) -> f64 {
        eta.unsigned_abs() as f64
    }
}

impl BaseFunction for ZeroBase {
    fn name(&self) -> &str {
        "zero"
    }
    fn eval(&self, _eta: i64) -> f64 {
        0.0
    }
}

/// Names accepted by [`builtin_base`].
pub const BUILTIN_BASES: [&str; 3] = ["quadratic_psi", "abs", "zero"];

/// Look up a built-in base function by name. `psi` only applies to
/// `quadratic_psi` (default 0).
pub fn builtin_base(name: &str, psi: Option<f64>) -> Result<Box<dyn BaseFunction>> {
    match name {
        "quadratic_psi" => Ok(Box::new(QuadraticPsi(psi.unwrap_or(0.0)))),
        "abs" => Ok(Box::new(AbsBase)),
        "zero" => Ok(Box::new(ZeroBase)),
        other => Err(Error::UnknownBase(other.to_string())),
    }
}

/// `c_i(g) = γ0 + f(η_i(g) − k_i)` with a single base function `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedConvexCost {
    gamma0: f64,
    base: String,
    psi: Option<f64>,
    table: Vec<f64>,
    k: DegreeSequence,
}

impl ShiftedConvexCost {
    /// Tabulate `base` over `-(n-1)..=n-1` with `n = k.len()`.
    pub fn from_base(
        gamma0: f64,
        base: &dyn BaseFunction,
        psi: Option<f64>,
        k: DegreeSequence,
    ) -> Self {
        let span = k.len() as i64 - 1;
        let table = (-span..=span).map(|e| base.eval(e)).collect();
        Self {
            gamma0,
            base: base.name().to_string(),
            psi,
            table,
            k,
        }
    }

    pub fn quadratic(gamma0: f64, psi: f64, k: DegreeSequence) -> Self {
        Self::from_base(gamma0, &QuadraticPsi(psi), Some(psi), k)
    }

    pub fn named(gamma0: f64, base: &str, psi: Option<f64>, k: DegreeSequence) -> Result<Self> {
        let f = builtin_base(base, psi)?;
        Ok(Self::from_base(gamma0, f.as_ref(), psi, k))
    }

    /// `values[m]` is `f(m − (n−1))`, so the table has `2n − 1` entries.
    pub fn from_table(gamma0: f64, values: Vec<f64>, k: DegreeSequence) -> Result<Self> {
        let want = 2 * k.len() - 1;
        if values.len() != want {
            return Err(Error::Invalid(format!(
                "base table has {} values, expected {want} for {} firms",
                values.len(),
                k.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(
                "base table contains non-finite values".into(),
            ));
        }
        Ok(Self {
            gamma0,
            base: "table".into(),
            psi: None,
            table: values,
            k,
        })
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn base_name(&self) -> &str {
        &self.base
    }

    pub fn psi(&self) -> Option<f64> {
        self.psi
    }

    pub fn shifts(&self) -> &DegreeSequence {
        &self.k
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn n(&self) -> usize {
        self.k.len()
    }

    /// `f(eta)`; `None` off the tabulated grid.
    pub fn f(&self, eta: i64) -> Option<f64> {
        let idx = eta + self.n() as i64 - 1;
        usize::try_from(idx)
            .ok()
            .and_then(|i| self.table.get(i).copied())
    }

    /// `f_i(degree) = f(degree − k_i)`.
    pub fn f_i(&self, firm: usize, degree: usize) -> Result<f64> {
        let n = self.n();
        if degree > n - 1 {
            return Err(Error::DomainError { degree, max: n - 1 });
        }
        let ki = *self
            .k
            .as_slice()
            .get(firm)
            .ok_or(Error::FirmOutOfRange { index: firm, n })?;
        Ok(self
            .f(degree as i64 - ki as i64)
            .expect("shifted degree lies on the grid"))
    }

    /// `Δ⁻f = f(−1) − f(0)`, the same for every firm.
    pub fn delta_minus(&self) -> Result<f64> {
        match (self.f(-1), self.f(0)) {
            (Some(a), Some(b)) => Ok(a - b),
            _ => Err(Error::Invalid("Δ⁻ needs at least two firms".into())),
        }
    }

    /// `Δ⁺f = f(1) − f(0)`.
    pub fn delta_plus(&self) -> Result<f64> {
        match (self.f(1), self.f(0)) {
            (Some(a), Some(b)) => Ok(a - b),
            _ => Err(Error::Invalid("Δ⁺ needs at least two firms".into())),
        }
    }

    /// `Δ⁻f_i(k_i) = f_i(k_i − 1) − f_i(k_i)`, evaluated through the shift.
    /// Agrees with [`Self::delta_minus`] whenever `k_i ≥ 1`.
    pub fn firm_delta_minus(&self, firm: usize) -> Result<f64> {
        let ki = self.k.as_slice()[firm];
        if ki == 0 {
            return self.delta_minus();
        }
        Ok(self.f_i(firm, ki - 1)? - self.f_i(firm, ki)?)
    }

    pub fn firm_delta_plus(&self, firm: usize) -> Result<f64> {
        let ki = self.k.as_slice()[firm];
        if ki + 1 > self.n() - 1 {
            return self.delta_plus();
        }
        Ok(self.f_i(firm, ki + 1)? - self.f_i(firm, ki)?)
    }

    /// `max{f(n−1), f(1−n)}`.
    pub fn extreme_value(&self) -> f64 {
        let span = self.n() as i64 - 1;
        self.f(span).unwrap().max(self.f(-span).unwrap())
    }

    /// Checks the hypotheses placed on `f` and the shifts for `n` firms.
    pub fn validate(&self, n: usize) -> FamilyValidation {
        let span = self.n() as i64 - 1;
        let grid: Vec<i64> = (-span..=span).collect();
        let f = |e: i64| self.f(e).unwrap();

        let nonnegative = Check::from_witness(grid.iter().copied().find(|&e| f(e) < 0.0));
        let convex = Check::from_witness(
            grid.iter()
                .copied()
                .filter(|&e| e > -span && e < span)
                .find(|&e| f(e + 1) - 2.0 * f(e) + f(e - 1) < 0.0),
        );
        let min_at_zero = Check::from_witness(grid.iter().copied().find(|&e| f(e) < f(0)));
        let shifts_in_range = Check::from_witness(
            self.k
                .as_slice()
                .iter()
                .position(|&ki| ki + 1 > n)
                .map(|i| i as i64)
                .or(if self.n() == n { None } else { Some(-1) }),
        );
        FamilyValidation {
            nonnegative,
            convex,
            min_at_zero,
            shifts_in_range,
        }
    }
}

/// Outcome of a single hypothesis check; `witness` is a failing grid point
/// (or firm index for the shift check, `-1` for a length mismatch).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    pub witness: Option<i64>,
}

impl Check {
    fn from_witness(witness: Option<i64>) -> Self {
        Self {
            passed: witness.is_none(),
            witness,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyValidation {
    pub nonnegative: Check,
    pub convex: Check,
    pub min_at_zero: Check,
    pub shifts_in_range: Check,
}

impl FamilyValidation {
    pub fn passed(&self) -> bool {
        self.nonnegative.passed
            && self.convex.passed
            && self.min_at_zero.passed
            && self.shifts_in_range.passed
    }

    pub fn failures(&self) -> Vec<String> {
        [
            ("nonnegativity", self.nonnegative),
            ("convexity", self.convex),
            ("minimum at 0", self.min_at_zero),
            ("shift range", self.shifts_in_range),
        ]
        .into_iter()
        .filter(|(_, c)| !c.passed)
        .map(|(name, c)| format!("{name} fails at {}", c.witness.unwrap_or_default()))
        .collect()
    }
}

/// Marginal cost depending on output as well as degree: `f_i(q_i, η_i)`.
pub trait QuantityCost: Send + Sync {
    fn value(&self, firm: usize, quantity: f64, degree: usize) -> f64;

    /// Analytic `∂f/∂q`, if known.
    fn dq(&self, _firm: usize, _quantity: f64, _degree: usize) -> Option<f64> {
        None
    }
}

/// Programmatic wrapper around a [`QuantityCost`].
#[derive(Clone)]
pub struct GeneralCost {
    inner: Arc<dyn QuantityCost>,
}

impl fmt::Debug for GeneralCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GeneralCost")
    }
}

impl GeneralCost {
    pub fn new(inner: impl QuantityCost + 'static) -> Self {
        Self {
            inner: Arc::new(inner),
        }
    }

    pub fn value(&self, firm: usize, quantity: f64, degree: usize) -> f64 {
        self.inner.value(firm, quantity, degree)
    }

    /// `∂f/∂q`, analytic when provided, otherwise a central difference
    /// (one-sided at the boundary `q < h`).
    pub fn derivative(&self, firm: usize, quantity: f64, degree: usize) -> f64 {
        self.inner
            .dq(firm, quantity, degree)
            .unwrap_or_else(|| self.finite_difference(firm, quantity, degree))
    }

    pub fn finite_difference(&self, firm: usize, q: f64, degree: usize) -> f64 {
        let h = FD_STEP * q.abs().max(1.0);
        if q >= h {
            (self.value(firm, q + h, degree) - self.value(firm, q - h, degree)) / (2.0 * h)
        } else {
            (self.value(firm, q + h, degree) - self.value(firm, q, degree)) / h
        }
    }

    /// Compares the analytic derivative (if any) with finite differences at
    /// the given probe quantities, for every firm and degree.
    pub fn check_gradient(&self, n: usize, probes: &[f64]) -> Result<()> {
        for firm in 0..n {
            for degree in 0..n {
                for &q in probes {
                    let Some(analytic) = self.inner.dq(firm, q, degree) else {
                        return Ok(());
                    };
                    let numeric = self.finite_difference(firm, q, degree);
                    let scale = analytic.abs().max(numeric.abs()).max(1.0);
                    if (analytic - numeric).abs() > 1e-5 * scale {
                        return Err(Error::GradientMismatch {
                            q,
                            analytic,
                            numeric,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// The cost model family.
#[derive(Clone, Debug)]
pub enum CostModel {
    Linear(LinearCost),
    ShiftedConvex(ShiftedConvexCost),
    General(GeneralCost),
}

impl From<LinearCost> for CostModel {
    fn from(c: LinearCost) -> Self {
        Self::Linear(c)
    }
}

impl From<ShiftedConvexCost> for CostModel {
    fn from(c: ShiftedConvexCost) -> Self {
        Self::ShiftedConvex(c)
    }
}

impl From<GeneralCost> for CostModel {
    fn from(c: GeneralCost) -> Self {
        Self::General(c)
    }
}

impl CostModel {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Linear(_) => "linear",
            Self::ShiftedConvex(_) => "shifted_convex",
            Self::General(_) => "general",
        }
    }

    /// Whether marginal cost is independent of output.
    pub fn is_constant(&self) -> bool {
        !matches!(self, Self::General(_))
    }

    /// Baseline `γ0` for constant-cost models.
    pub fn gamma0(&self) -> Option<f64> {
        match self {
            Self::Linear(c) => Some(c.gamma0),
            Self::ShiftedConvex(c) => Some(c.gamma0),
            Self::General(_) => None,
        }
    }

    /// The degree-dependent part `b_i` with `c_i = γ0 + b_i`: `f_i(η_i)` for
    /// the shifted family, `−γ·η_i` for the linear one.
    pub fn offset(&self, firm: usize, degree: usize, n: usize) -> Result<f64> {
        if degree + 1 > n {
            return Err(Error::DomainError {
                degree,
                max: n.saturating_sub(1),
            });
        }
        match self {
            Self::Linear(c) => Ok(-c.gamma * degree as f64),
            Self::ShiftedConvex(c) => c.f_i(firm, degree),
            Self::General(_) => Err(Error::UnsupportedModel("general")),
        }
    }

    /// Marginal cost of `firm` at `degree` in an `n`-firm industry. The
    /// general model needs `quantity`.
    pub fn marginal_cost(
        &self,
        firm: usize,
        degree: usize,
        n: usize,
        quantity: Option<f64>,
    ) -> Result<f64> {
        match self {
            Self::Linear(c) => Ok(c.gamma0 + self.offset(firm, degree, n)?),
            Self::ShiftedConvex(c) => Ok(c.gamma0 + self.offset(firm, degree, n)?),
            Self::General(c) => {
                if degree + 1 > n {
                    return Err(Error::DomainError { degree, max: n - 1 });
                }
                let q = quantity
                    .ok_or_else(|| Error::Invalid("general cost model needs a quantity".into()))?;
                Ok(c.value(firm, q, degree))
            }
        }
    }

    /// `∂c_i/∂q_i`; zero for constant-cost models.
    pub fn marginal_cost_slope(&self, firm: usize, degree: usize, quantity: f64) -> f64 {
        match self {
            Self::General(c) => c.derivative(firm, quantity, degree),
            _ => 0.0,
        }
    }

    pub fn shifted(&self) -> Result<&ShiftedConvexCost> {
        match self {
            Self::ShiftedConvex(c) => Ok(c),
            other => Err(Error::UnsupportedModel(other.kind())),
        }
    }

    pub fn delta_minus(&self) -> Result<f64> {
        self.shifted()?.delta_minus()
    }

    pub fn delta_plus(&self) -> Result<f64> {
        self.shifted()?.delta_plus()
    }

    /// Same model with firms relabeled: firm `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        match self {
            Self::ShiftedConvex(c) => {
                let mut c = c.clone();
                c.k = c.k.permuted(perm);
                Self::ShiftedConvex(c)
            }
            other => other.clone(),
        }
    }

    /// JSON form, where one exists.
    pub fn to_spec(&self) -> Option<CostSpec> {
        match self {
            Self::Linear(c) => Some(CostSpec::Linear {
                gamma0: c.gamma0,
                gamma: c.gamma,
            }),
            Self::ShiftedConvex(c) => Some(CostSpec::ShiftedConvex {
                gamma0: c.gamma0,
                base: c.base.clone(),
                psi: c.psi,
                values: (c.base == "table").then(|| c.table.clone()),
                k: c.k.as_slice().to_vec(),
            }),
            Self::General(_) => None,
        }
    }
}

/// Serialized cost model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CostSpec {
    Linear {
        gamma0: f64,
        gamma: f64,
    },
    ShiftedConvex {
        #[serde(default)]
        gamma0: f64,
        base: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        psi: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
        k: Vec<usize>,
    },
    General {},
}

impl CostSpec {
    pub fn build(&self) -> Result<CostModel> {
        match self {
            Self::Linear { gamma0, gamma } => Ok(LinearCost::new(*gamma0, *gamma)?.into()),
            Self::ShiftedConvex {
                gamma0,
                base,
                psi,
                values,
                k,
            } => {
                let k = DegreeSequence::new(k.clone())?;
                let model = if base == "table" {
                    let values = values
                        .clone()
                        .ok_or_else(|| Error::Invalid("table base needs 'values'".into()))?;
                    ShiftedConvexCost::from_table(*gamma0, values, k)?
                } else {
                    ShiftedConvexCost::named(*gamma0, base, *psi, k)?
                };
                Ok(model.into())
            }
            Self::General {} => Err(Error::Invalid(
                "general cost models can only be supplied programmatically".into(),
            )),
        }
    }
}
