//! Variable catalog, panel ingestion, lag alignment, scaling, splitting and
//! the seeded synthetic panel generator.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MACRO_VARIABLES: [(&str, &str); 10] = [
    ("growth_rate_industrial_production", "Growth rates of industrial production"),
    ("inflation_rate", "Inflation rate"),
    ("interest_rate", "Interest rate"),
    ("exchange_rate", "Exchange rate"),
    ("stock_market_return", "Rate of return on stock public"),
    ("unemployment_rate", "Unemployment rate"),
    ("oil_price", "Oil price"),
    ("gdp", "Gross Domestic product (GDP)"),
    ("money_supply_1", "Money supply 1 (M1)"),
    ("money_supply_2", "Money supply 2 (M2)"),
];

const FINANCIAL_VARIABLES: [(&str, &str); 30] = [
    ("book_value_per_share", "Book value per share"),
    ("sales_per_share", "Sales per share"),
    ("earning_per_share", "Earning per share"),
    ("cash_flow_per_share", "Cash flow per share"),
    ("inventory_turnover_rate", "Inventory turnover rate"),
    (
        "trading_volume_to_market_cap",
        "Annual average volume of daily trading relative to annual average total market capitalization",
    ),
    ("dividend_yield", "Dividend yield"),
    ("dividend_payout_ratio", "Dividend payout ratio"),
    ("dividend_per_share", "Dividend per share"),
    ("sales_to_total_assets", "Total of sales to total assets"),
    ("bid_ask_spread", "Bid-ask spread"),
    ("market_impact_of_trade", "Market impact of a trade"),
    ("price_per_share", "Price per share"),
    ("trading_volume", "Trading volume"),
    ("turnover_rate", "Turnover rate"),
    ("commission_rate", "Commission rate"),
    ("day_of_week_effect", "Indicator variables for the day of the week effect"),
    ("holiday_effect", "Holiday effect"),
    ("january_effect", "January month"),
    ("amortized_effective_spread", "Amortized effective spread"),
    ("price_history", "Price history"),
    ("past_return", "Past return"),
    ("size_of_firm", "Size of firm"),
    ("debt_to_equity", "Ratio of total debt to stockholder's equity"),
    ("pastor_measure", "Pastor measure"),
    ("abs_return_to_dollar_volume", "Ratio of absolute stock return to dollar volume"),
    ("market_depth", "Market depth"),
    ("net_income_to_book_equity", "Ratio of net income to book equity"),
    ("operating_income_to_total_assets", "Operating income to total assets"),
    ("operating_income_to_total_sales", "Operating income to total sales"),
];

/// The seven variables the original study kept after its ICA screening:
/// four financial and three macroeconomic.
pub const PAPER_SEVEN: [&str; 7] = [
    "earning_per_share",
    "size_of_firm",
    "debt_to_equity",
    "operating_income_to_total_sales",
    "inflation_rate",
    "money_supply_1",
    "growth_rate_industrial_production",
];

/// The 10 macroeconomic and 30 financial candidate variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableCatalog {
    macro_names: Vec<String>,
    financial_names: Vec<String>,
}

impl VariableCatalog {
    pub const MACRO_COUNT: usize = 10;
    pub const FINANCIAL_COUNT: usize = 30;

    pub fn new(macro_names: Vec<String>, financial_names: Vec<String>) -> Result<Self> {
        if macro_names.len() != Self::MACRO_COUNT || financial_names.len() != Self::FINANCIAL_COUNT {
            return Err(Error::InvalidConfig(format!(
                "catalog needs {} macro and {} financial names, got {} and {}",
                Self::MACRO_COUNT,
                Self::FINANCIAL_COUNT,
                macro_names.len(),
                financial_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in macro_names.iter().chain(&financial_names) {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate catalog name `{name}`")));
            }
        }
        Ok(Self { macro_names, financial_names })
    }

    pub fn macro_names(&self) -> &[String] {
        &self.macro_names
    }

    pub fn financial_names(&self) -> &[String] {
        &self.financial_names
    }

    /// All 40 names, macro first, in catalog order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.macro_names.iter().chain(&self.financial_names).map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    /// Index of `name` in catalog order.
    pub fn position(&self, name: &str) -> Option<usize> {
        self.names().position(|n| n == name)
    }

    /// Human-readable label for a standard catalog identifier.
    pub fn label(name: &str) -> Option<&'static str> {
        MACRO_VARIABLES
            .iter()
            .chain(&FINANCIAL_VARIABLES)
            .find(|(id, _)| *id == name)
            .map(|(_, label)| *label)
    }
}

impl Default for VariableCatalog {
    fn default() -> Self {
        Self {
            macro_names: MACRO_VARIABLES.iter().map(|(id, _)| id.to_string()).collect(),
            financial_names: FINANCIAL_VARIABLES.iter().map(|(id, _)| id.to_string()).collect(),
        }
    }
}

/// One (company, month) record of the panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub company: String,
    pub month: i64,
    pub price: f64,
    /// Values in the order of [`Panel::variables`].
    pub values: Vec<f64>,
}

/// Company × month observations, sorted by company then month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    variables: Vec<String>,
    observations: Vec<Observation>,
    dropped_rows: usize,
}

impl Panel {
    pub fn new(
        variables: Vec<String>,
        mut observations: Vec<Observation>,
        catalog: &VariableCatalog,
    ) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::EmptyInput("panel has no variables".into()));
        }
        if let Some(unknown) = variables.iter().find(|v| !catalog.contains(v)) {
            return Err(Error::UnknownVariable(unknown.clone()));
        }
        if observations.is_empty() {
            return Err(Error::NoValidRows("panel has no observations".into()));
        }
        for obs in &observations {
            if obs.values.len() != variables.len() {
                return Err(Error::DimensionMismatch {
                    expected: variables.len(),
                    actual: obs.values.len(),
                });
            }
            if !obs.price.is_finite() || obs.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "non-finite value for company `{}` at month {}",
                    obs.company, obs.month
                )));
            }
        }
        observations.sort_by(|a, b| a.company.cmp(&b.company).then(a.month.cmp(&b.month)));
        for pair in observations.windows(2) {
            if pair[0].company == pair[1].company && pair[0].month == pair[1].month {
                return Err(Error::DuplicateObservation {
                    company: pair[0].company.clone(),
                    month: pair[0].month,
                });
            }
        }
        Ok(Self { variables, observations, dropped_rows: 0 })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Rows discarded during ingestion because of missing or non-numeric cells.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Distinct company identifiers in sorted order.
    pub fn companies(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for obs in &self.observations {
            if out.last() != Some(&obs.company.as_str()) {
                out.push(&obs.company);
            }
        }
        out
    }

    /// Observations × variables matrix, rows in panel order.
    pub fn value_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.observations.len(), self.variables.len(), |i, j| self.observations[i].values[j])
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    /// Writes the panel as `company,month,price,<vars...>`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io_err = |source| Error::Io { path: path.to_path_buf(), source };
        let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
        let mut header = String::from("company,month,price");
        for v in &self.variables {
            header.push(',');
            header.push_str(v);
        }
        writeln!(out, "{header}").map_err(io_err)?;
        for obs in &self.observations {
            let mut line = format!("{},{},{}", obs.company, obs.month, obs.price);
            for v in &obs.values {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

/// Reads a panel CSV with header `company,month,price,<var1>,...`.
///
/// Rows with a missing, non-numeric or non-finite cell are dropped and counted
/// in [`Panel::dropped_rows`].
pub fn load_panel(path: &Path, catalog: &VariableCatalog) -> Result<Panel> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file);
    let csv_err = |e: csv::Error| Error::Csv { path: path.to_path_buf(), message: e.to_string() };

    let header = reader.headers().map_err(csv_err)?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let company_col = column("company")?;
    let month_col = column("month")?;
    let price_col = column("price")?;

    let mut variable_cols = Vec::new();
    let mut variables = Vec::new();
    for (i, name) in header.iter().enumerate() {
        if i == company_col || i == month_col || i == price_col {
            continue;
        }
        if !catalog.contains(name) {
            return Err(Error::UnknownVariable(name.to_string()));
        }
        variable_cols.push(i);
        variables.push(name.to_string());
    }
    if variables.is_empty() {
        return Err(Error::MissingColumn("<catalog variable>".into()));
    }

    let parse_real = |s: Option<&str>| s.and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite());

    let mut observations = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        if record.len() != header.len() {
            dropped += 1;
            continue;
        }
        let company = record.get(company_col).unwrap_or_default();
        let month = record.get(month_col).and_then(|s| s.parse::<i64>().ok());
        let price = parse_real(record.get(price_col));
        let values: Option<Vec<f64>> =
            variable_cols.iter().map(|&c| parse_real(record.get(c))).collect();
        match (company.is_empty(), month, price, values) {
            (false, Some(month), Some(price), Some(values)) => observations.push(Observation {
                company: company.to_string(),
                month,
                price,
                values,
            }),
            _ => dropped += 1,
        }
    }
    if observations.is_empty() {
        return Err(Error::NoValidRows(format!("{} ({dropped} rows dropped)", path.display())));
    }
    let mut panel = Panel::new(variables, observations, catalog)?;
    panel.dropped_rows = dropped;
    Ok(panel)
}

/// One lag-aligned sample: features observed at month `t - 1`, price at month `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedRow {
    pub company: String,
    pub month: i64,
    pub features: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedSet {
    pub feature_names: Vec<String>,
    pub rows: Vec<SupervisedRow>,
}

impl SupervisedSet {
    pub fn new(feature_names: Vec<String>, rows: Vec<SupervisedRow>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.features.len() != feature_names.len()) {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                actual: bad.features.len(),
            });
        }
        Ok(Self { feature_names, rows })
    }

    /// Builds a set from a feature matrix and targets, labelling rows by index.
    pub fn from_matrix(feature_names: Vec<String>, x: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), actual: y.len() });
        }
        let rows = (0..x.nrows())
            .map(|i| SupervisedRow {
                company: String::new(),
                month: i as i64,
                features: x.row(i).iter().copied().collect(),
                target: y[i],
            })
            .collect();
        Self::new(feature_names, rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Samples × features design matrix (no intercept column).
    pub fn feature_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.n_features(), |i, j| self.rows[i].features[j])
    }

    pub fn targets(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.target))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.features[j]).collect()
    }
}

/// Pairs each company's features at month `t - 1` with its price at month `t`.
///
/// Rows come out ordered by (company, t); a gap in a company's months breaks
/// the pairing across it.
pub fn lag_align<S: AsRef<str>>(panel: &Panel, features: &[S]) -> Result<SupervisedSet> {
    if features.is_empty() {
        return Err(Error::EmptyInput("no features requested".into()));
    }
    let indices = features
        .iter()
        .map(|f| {
            panel
                .variable_index(f.as_ref())
                .ok_or_else(|| Error::UnknownVariable(f.as_ref().to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<SupervisedRow> = panel
        .observations
        .windows(2)
        .filter(|w| w[0].company == w[1].company && w[1].month == w[0].month + 1)
        .map(|w| SupervisedRow {
            company: w[1].company.clone(),
            month: w[1].month,
            features: indices.iter().map(|&i| w[0].values[i]).collect(),
            target: w[1].price,
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::NoAlignableRows);
    }
    SupervisedSet::new(features.iter().map(|f| f.as_ref().to_string()).collect(), rows)
}

fn is_degenerate(sd: f64, mean: f64) -> bool {
    !sd.is_finite() || sd <= 1e-12 * mean.abs().max(1.0)
}

/// Per-feature z-score parameters (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ScalerParams {
    /// Rejects any column whose standard deviation is zero.
    pub fn fit(set: &SupervisedSet) -> Result<Self> {
        let params = Self::moments(set)?;
        for (j, (&sd, mean)) in params.stds.iter().zip(&params.means).enumerate() {
            if is_degenerate(sd, *mean) {
                return Err(Error::ConstantColumn(set.feature_names[j].clone()));
            }
        }
        Ok(params)
    }

    /// Like [`ScalerParams::fit`] but gives zero-variance columns unit scale
    /// instead of failing. Used where a single exemplar is legitimate.
    pub fn fit_lenient(set: &SupervisedSet) -> Result<Self> {
        let mut params = Self::moments(set)?;
        for (sd, mean) in params.stds.iter_mut().zip(&params.means) {
            if is_degenerate(*sd, *mean) {
                *sd = 1.0;
            }
        }
        Ok(params)
    }

    fn moments(set: &SupervisedSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptyInput("cannot fit scaler on an empty set".into()));
        }
        let n = set.len() as f64;
        let mut means = Vec::with_capacity(set.n_features());
        let mut stds = Vec::with_capacity(set.n_features());
        for j in 0..set.n_features() {
            let mean = set.rows.iter().map(|r| r.features[j]).sum::<f64>() / n;
            let var = set.rows.iter().map(|r| (r.features[j] - mean).powi(2)).sum::<f64>() / n;
            means.push(mean);
            stds.push(var.sqrt());
        }
        Ok(Self { means, stds })
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    /// Applies the transform to every row of `set`, leaving targets untouched.
    pub fn apply(&self, set: &SupervisedSet) -> Result<SupervisedSet> {
        if set.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: set.n_features(),
            });
        }
        let rows = set
            .rows
            .iter()
            .map(|r| SupervisedRow { features: self.transform(&r.features), ..r.clone() })
            .collect();
        Ok(SupervisedSet { feature_names: set.feature_names.clone(), rows })
    }
}

/// Z-scores every feature column; targets are left in price units.
pub fn standardize(set: &SupervisedSet) -> Result<(SupervisedSet, ScalerParams)> {
    let params = ScalerParams::fit(set)?;
    Ok((params.apply(set)?, params))
}

/// Holds out the `ceil(n * test_fraction)` latest rows.
///
/// Rows are ranked by (month, company); both halves keep the input order.
pub fn chronological_split(
    set: &SupervisedSet,
    test_fraction: f64,
) -> Result<(SupervisedSet, SupervisedSet)> {
    if set.is_empty() {
        return Err(Error::EmptyInput("cannot split an empty set".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let n = set.len();
    // Guard against 0.7 * 10 = 7.000000000000001 rounding up.
    let n_test = ((n as f64 * test_fraction) - 1e-9).ceil().max(1.0) as usize;
    if n_test >= n {
        return Err(Error::EmptyTrain { n, fraction: test_fraction });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&set.rows[a], &set.rows[b]);
        ra.month.cmp(&rb.month).then_with(|| ra.company.cmp(&rb.company))
    });
    let mut is_test = vec![false; n];
    for &i in &order[n - n_test..] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
    for (row, flag) in set.rows.iter().zip(is_test) {
        if flag { test.push(row.clone()) } else { train.push(row.clone()) }
    }
    Ok((
        SupervisedSet { feature_names: set.feature_names.clone(), rows: train },
        SupervisedSet { feature_names: set.feature_names.clone(), rows: test },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_companies: usize,
    pub n_months: usize,
    /// Standard deviation of additive price noise, in currency units.
    pub noise_scale: f64,
    /// Price depends on the drivers through saturating and interaction terms.
    pub nonlinear: bool,
}

impl Default for SynthConfig {
    /// 100 companies over seven years of monthly data.
    fn default() -> Self {
        Self { seed: 0, n_companies: 100, n_months: 84, noise_scale: 1.0, nonlinear: true }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_companies < 1 {
            return Err(Error::InvalidConfig("n_companies must be at least 1".into()));
        }
        if self.n_months < 3 {
            return Err(Error::InvalidConfig("n_months must be at least 3".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidConfig("noise_scale must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Weights of the price-driving variables on the standardized latent scale.
const DRIVER_WEIGHTS: [(&str, f64); 7] = [
    ("earning_per_share", 4.0),
    ("size_of_firm", -1.5),
    ("debt_to_equity", 2.0),
    ("operating_income_to_total_sales", 0.5),
    ("inflation_rate", 3.0),
    ("money_supply_1", -2.5),
    ("growth_rate_industrial_production", 1.0),
];
const BASE_PRICE: f64 = 100.0;
const AR_COEFFICIENT: f64 = 0.5;
const COMPANY_EFFECT_SD: f64 = 0.5;

/// Raw-unit mean and scale of catalog variable `index`; units span 1e-1..1e3.
fn variable_units(index: usize) -> (f64, f64) {
    let scale = 10f64.powi(index as i32 % 5 - 1);
    (scale * (2 + index % 3) as f64, scale)
}

/// Standardized deviation of a driver from its long-run mean.
fn latent(value: f64, index: usize) -> f64 {
    let (mean, scale) = variable_units(index);
    (value - mean) / scale
}

/// The generator's exact linear pricing rule in raw variable units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub intercept: f64,
    pub coefficients: Vec<(String, f64)>,
}

/// Coefficients of the linear (`nonlinear = false`) generator with respect to
/// the previous month's raw variable values. Non-driver variables have weight 0.
pub fn synth_linear_truth(catalog: &VariableCatalog) -> Result<SynthTruth> {
    let mut intercept = BASE_PRICE;
    let mut coefficients = Vec::with_capacity(DRIVER_WEIGHTS.len());
    for (name, weight) in DRIVER_WEIGHTS {
        let index = catalog.position(name).ok_or_else(|| Error::UnknownVariable(name.into()))?;
        let (mean, scale) = variable_units(index);
        intercept -= weight * mean / scale;
        coefficients.push((name.to_string(), weight / scale));
    }
    Ok(SynthTruth { intercept, coefficients })
}

fn synth_price(z: &[f64], nonlinear: bool) -> f64 {
    // z holds the standardized drivers in DRIVER_WEIGHTS order.
    if !nonlinear {
        return BASE_PRICE + DRIVER_WEIGHTS.iter().zip(z).map(|((_, w), v)| w * v).sum::<f64>();
    }
    let linear: f64 = DRIVER_WEIGHTS.iter().zip(z).map(|((_, w), v)| 0.25 * w * v).sum();
    BASE_PRICE
        + linear
        + 12.0 * (1.5 * z[0]).tanh() * (1.5 * z[4]).tanh()
        + 4.0 * (z[2] * z[2] - 1.0)
        + 6.0 * (1.5 * z[5]).sin()
}

/// Deterministic synthetic panel over every catalog variable.
///
/// Each variable follows a per-company AR(1) process around a company effect,
/// expressed in its own raw units. Price in month `t` is a function of the
/// seven driver variables at `t - 1` plus Gaussian noise.
pub fn synth_generate(config: &SynthConfig, catalog: &VariableCatalog) -> Result<Panel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let names: Vec<String> = catalog.names().map(str::to_string).collect();
    let drivers = DRIVER_WEIGHTS
        .iter()
        .map(|(name, _)| catalog.position(name).ok_or_else(|| Error::UnknownVariable((*name).into())))
        .collect::<Result<Vec<_>>>()?;
    let innovation_sd = (1.0 - AR_COEFFICIENT * AR_COEFFICIENT).sqrt();
    let width = (config.n_companies.max(1) as f64).log10().floor() as usize + 1;

    let mut observations = Vec::with_capacity(config.n_companies * config.n_months);
    for c in 0..config.n_companies {
        let company = format!("C{:0width$}", c + 1, width = width.max(3));
        let effects: Vec<f64> = (0..names.len())
            .map(|_| COMPANY_EFFECT_SD * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut state: Vec<f64> = (0..names.len()).map(|_| rng.sample(StandardNormal)).collect();
        let raw = |state: &[f64]| -> Vec<f64> {
            state
                .iter()
                .zip(&effects)
                .enumerate()
                .map(|(i, (s, e))| {
                    let (mean, scale) = variable_units(i);
                    mean + scale * (e + s)
                })
                .collect()
        };
        // Month 0 is burn-in: it only supplies the lagged drivers for month 1.
        let mut previous = raw(&state);
        for month in 1..=config.n_months {
            let z: Vec<f64> = drivers.iter().map(|&i| latent(previous[i], i)).collect();
            let noise = config.noise_scale * rng.sample::<f64, _>(StandardNormal);
            let price = synth_price(&z, config.nonlinear) + noise;
            for s in state.iter_mut() {
                *s = AR_COEFFICIENT * *s + innovation_sd * rng.sample::<f64, _>(StandardNormal);
            }
            let values = raw(&state);
            observations.push(Observation {
                company: company.clone(),
                month: month as i64,
                price,
                values: values.clone(),
            });
            previous = values;
        }
    }
    Panel::new(names, observations, catalog)
}

/// Groups supervised rows by company, preserving order. Handy for reporting.
pub fn rows_by_company(set: &SupervisedSet) -> BTreeMap<&str, Vec<&SupervisedRow>> {
    let mut out: BTreeMap<&str, Vec<&SupervisedRow>> = BTreeMap::new();
    for row in &set.rows {
        out.entry(row.company.as_str()).or_default().push(row);
    }
    out
}
