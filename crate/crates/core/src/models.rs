//! Correlation sources and the CHSH / no-signaling machinery.
//!
//! A [`Behavior`] is the table `p(a, b | x, y)` over a grid of settings for
//! each wing, with binary outcomes. Cells within a slice are ordered
//! `(+,+), (+,-), (-,+), (-,-)`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::angle::Angle;
use crate::prob::Value;
use crate::{FACET_TOL, NORM_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),
    #[error("setting {0} is not in the grid")]
    SettingNotInGrid(String),
    #[error("invalid setting prior: {0}")]
    InvalidPrior(String),
    #[error("invalid hidden-variable model: {0}")]
    InvalidLhv(String),
    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),
}

/// A binary measurement outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Outcome {
    #[cfg_attr(feature = "serde", serde(rename = "+1"))]
    Plus,
    #[cfg_attr(feature = "serde", serde(rename = "-1"))]
    Minus,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn sign(self) -> i64 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    /// `0` for `+1`, `1` for `-1`.
    pub fn bit(self) -> u8 {
        self.index() as u8
    }

    pub fn value(self) -> Value {
        Value::Int(self.sign())
    }

    pub fn from_value(v: &Value) -> Option<Self> {
        match v {
            Value::Int(1) => Some(Outcome::Plus),
            Value::Int(-1) => Some(Outcome::Minus),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Plus => "+1",
            Outcome::Minus => "-1",
        })
    }
}

impl core::str::FromStr for Outcome {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+1" | "1" | "+" => Ok(Outcome::Plus),
            "-1" | "-" => Ok(Outcome::Minus),
            other => Err(ModelError::InvalidBehavior(alloc::format!("bad outcome {other:?}"))),
        }
    }
}

/// A measurement setting: an analyzer angle, or an abstract label for
/// scenarios like the PR-box that have no geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "alloc::string::String", try_from = "alloc::string::String"))]
pub enum Setting {
    Angle(Angle),
    Index(u32),
}

impl Setting {
    pub fn value(self) -> Value {
        match self {
            Setting::Angle(a) => Value::Angle(a),
            Setting::Index(i) => Value::Int(i64::from(i)),
        }
    }

    pub fn from_value(v: &Value) -> Option<Self> {
        match v {
            Value::Angle(a) => Some(Setting::Angle(*a)),
            Value::Int(i) => u32::try_from(*i).ok().map(Setting::Index),
            Value::Label(_) => None,
        }
    }

    pub fn angle(self) -> Option<Angle> {
        match self {
            Setting::Angle(a) => Some(a),
            Setting::Index(_) => None,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Angle(a) => write!(f, "{a}"),
            Setting::Index(i) => write!(f, "s{i}"),
        }
    }
}

impl core::str::FromStr for Setting {
    type Err = ModelError;

    /// `s<k>` for labels, otherwise an angle such as `pi/4`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Some(k) = t.strip_prefix('s') {
            return k.parse().map(Setting::Index).map_err(|_| ModelError::SettingNotInGrid(t.into()));
        }
        t.parse::<Angle>().map(Setting::Angle).map_err(|e| ModelError::SettingNotInGrid(alloc::format!("{e}")))
    }
}

impl From<Setting> for String {
    fn from(s: Setting) -> Self {
        alloc::format!("{s}")
    }
}

impl TryFrom<String> for Setting {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Outcome pairs in cell order.
pub const CELLS: [(Outcome, Outcome); 4] = [
    (Outcome::Plus, Outcome::Plus),
    (Outcome::Plus, Outcome::Minus),
    (Outcome::Minus, Outcome::Plus),
    (Outcome::Minus, Outcome::Minus),
];

pub fn cell_index(a: Outcome, b: Outcome) -> usize {
    2 * a.index() + b.index()
}

/// `p(a, b | x, y)` on a finite setting grid.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Behavior {
    settings_a: Vec<Setting>,
    settings_b: Vec<Setting>,
    /// Slice for `(x, y)` at `x * settings_b.len() + y`.
    table: Vec<[f64; 4]>,
}

fn check_grid(name: &str, grid: &[Setting]) -> Result<(), ModelError> {
    if grid.is_empty() {
        return Err(ModelError::InvalidBehavior(alloc::format!("{name} setting grid is empty")));
    }
    for (i, s) in grid.iter().enumerate() {
        if grid[..i].contains(s) {
            return Err(ModelError::InvalidBehavior(alloc::format!("{name} grid repeats setting {s}")));
        }
    }
    Ok(())
}

impl Behavior {
    pub fn new(settings_a: Vec<Setting>, settings_b: Vec<Setting>, table: Vec<[f64; 4]>) -> Result<Self, ModelError> {
        check_grid("alice", &settings_a)?;
        check_grid("bob", &settings_b)?;
        if table.len() != settings_a.len() * settings_b.len() {
            return Err(ModelError::InvalidBehavior(alloc::format!(
                "{} slices for a {}x{} grid",
                table.len(),
                settings_a.len(),
                settings_b.len()
            )));
        }
        for (k, slice) in table.iter().enumerate() {
            let (x, y) = (k / settings_b.len(), k % settings_b.len());
            if slice.iter().any(|p| !(*p >= 0.0)) {
                return Err(ModelError::InvalidBehavior(alloc::format!(
                    "negative entry at ({}, {})",
                    settings_a[x],
                    settings_b[y]
                )));
            }
            let s: f64 = slice.iter().sum();
            if (s - 1.0).abs() > NORM_TOL {
                return Err(ModelError::InvalidBehavior(alloc::format!(
                    "slice ({}, {}) sums to {s}",
                    settings_a[x],
                    settings_b[y]
                )));
            }
        }
        Ok(Behavior { settings_a, settings_b, table })
    }

    /// Builds a behavior from a function of the setting indices.
    pub fn from_fn(
        settings_a: Vec<Setting>,
        settings_b: Vec<Setting>,
        mut f: impl FnMut(usize, usize) -> [f64; 4],
    ) -> Result<Self, ModelError> {
        let nb = settings_b.len();
        let table = (0..settings_a.len() * nb).map(|k| f(k / nb, k % nb)).collect();
        Self::new(settings_a, settings_b, table)
    }

    /// All four outcomes equally likely for every setting pair.
    pub fn uniform(settings_a: Vec<Setting>, settings_b: Vec<Setting>) -> Result<Self, ModelError> {
        Self::from_fn(settings_a, settings_b, |_, _| [0.25; 4])
    }

    /// Rows `(x, y, a, b, p)`; every cell of the grid must appear exactly once.
    pub fn from_rows(
        settings_a: Vec<Setting>,
        settings_b: Vec<Setting>,
        rows: impl IntoIterator<Item = (Setting, Setting, Outcome, Outcome, f64)>,
    ) -> Result<Self, ModelError> {
        check_grid("alice", &settings_a)?;
        check_grid("bob", &settings_b)?;
        let nb = settings_b.len();
        let mut table = alloc::vec![[f64::NAN; 4]; settings_a.len() * nb];
        for (x, y, a, b, p) in rows {
            let xi = index_in(&settings_a, &x)?;
            let yi = index_in(&settings_b, &y)?;
            let cell = &mut table[xi * nb + yi][cell_index(a, b)];
            if !cell.is_nan() {
                return Err(ModelError::InvalidBehavior(alloc::format!("duplicate row for ({x}, {y}, {a}, {b})")));
            }
            *cell = p;
        }
        if table.iter().flatten().any(|p| p.is_nan()) {
            return Err(ModelError::InvalidBehavior("missing rows".into()));
        }
        Self::new(settings_a, settings_b, table)
    }

    pub fn settings_a(&self) -> &[Setting] {
        &self.settings_a
    }

    pub fn settings_b(&self) -> &[Setting] {
        &self.settings_b
    }

    pub fn index_a(&self, s: &Setting) -> Result<usize, ModelError> {
        index_in(&self.settings_a, s)
    }

    pub fn index_b(&self, s: &Setting) -> Result<usize, ModelError> {
        index_in(&self.settings_b, s)
    }

    /// Whether this is the 2-party, 2-setting, 2-outcome scenario.
    pub fn is_binary(&self) -> bool {
        self.settings_a.len() == 2 && self.settings_b.len() == 2
    }

    pub fn slice(&self, x: usize, y: usize) -> [f64; 4] {
        self.table[x * self.settings_b.len() + y]
    }

    pub fn p(&self, x: usize, y: usize, a: Outcome, b: Outcome) -> f64 {
        self.slice(x, y)[cell_index(a, b)]
    }

    /// `p(a | x, y)` as `[p(+), p(-)]`.
    pub fn marginal_a(&self, x: usize, y: usize) -> [f64; 2] {
        let s = self.slice(x, y);
        [s[0] + s[1], s[2] + s[3]]
    }

    /// `p(b | x, y)` as `[p(+), p(-)]`.
    pub fn marginal_b(&self, x: usize, y: usize) -> [f64; 2] {
        let s = self.slice(x, y);
        [s[0] + s[2], s[1] + s[3]]
    }

    /// `⟨ab⟩` at grid indices.
    pub fn correlator_at(&self, x: usize, y: usize) -> f64 {
        let s = self.slice(x, y);
        (s[0] + s[3]) - (s[1] + s[2])
    }

    /// `(x, y, a, b, p)` in grid and cell order.
    pub fn rows(&self) -> impl Iterator<Item = (Setting, Setting, Outcome, Outcome, f64)> + '_ {
        let nb = self.settings_b.len();
        self.table.iter().enumerate().flat_map(move |(k, slice)| {
            let (x, y) = (self.settings_a[k / nb], self.settings_b[k % nb]);
            CELLS.iter().zip(slice.iter()).map(move |(&(a, b), &p)| (x, y, a, b, p))
        })
    }
}

fn index_in(grid: &[Setting], s: &Setting) -> Result<usize, ModelError> {
    grid.iter().position(|g| g == s).ok_or_else(|| ModelError::SettingNotInGrid(alloc::format!("{s}")))
}

/// Spin-singlet statistics:
/// `p(a, b | θa, θb) = (1 - a·b·cos(θa - θb)) / 4`.
pub fn singlet_behavior(grid_a: &[Angle], grid_b: &[Angle]) -> Result<Behavior, ModelError> {
    let sa: Vec<Setting> = grid_a.iter().copied().map(Setting::Angle).collect();
    let sb: Vec<Setting> = grid_b.iter().copied().map(Setting::Angle).collect();
    Behavior::from_fn(sa, sb, |x, y| singlet_slice((grid_a[x] - grid_b[y]).cos()))
}

/// Singlet cell probabilities for a given `cos(θa - θb)`.
pub fn singlet_slice(cos: f64) -> [f64; 4] {
    let mut s = [0.0; 4];
    for (k, (a, b)) in CELLS.iter().enumerate() {
        s[k] = (1.0 - (a.sign() * b.sign()) as f64 * cos) * 0.25;
    }
    s
}

/// The PR-box on binary settings `s0, s1`: outcomes agree unless `x = y = 1`,
/// in which case they always differ.
pub fn pr_box() -> Behavior {
    let grid = alloc::vec![Setting::Index(0), Setting::Index(1)];
    Behavior::from_fn(grid.clone(), grid, |x, y| {
        let mut s = [0.0; 4];
        for (k, (a, b)) in CELLS.iter().enumerate() {
            if (a.bit() ^ b.bit()) as usize == x * y {
                s[k] = 0.5;
            }
        }
        s
    })
    .expect("PR-box table is normalized")
}

/// A local hidden-variable model over a finite `λ` domain.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LhvModel {
    pub settings_a: Vec<Setting>,
    pub settings_b: Vec<Setting>,
    /// `p(λ)`.
    pub prior: Vec<f64>,
    /// `p(a = +1 | x, λ)`, indexed `[λ][x]`.
    pub response_a: Vec<Vec<f64>>,
    /// `p(b = +1 | y, λ)`, indexed `[λ][y]`.
    pub response_b: Vec<Vec<f64>>,
}

impl LhvModel {
    pub fn new(
        settings_a: Vec<Setting>,
        settings_b: Vec<Setting>,
        prior: Vec<f64>,
        response_a: Vec<Vec<f64>>,
        response_b: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let m = LhvModel { settings_a, settings_b, prior, response_a, response_b };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |s: &str| Err(ModelError::InvalidLhv(s.into()));
        check_grid("alice", &self.settings_a)?;
        check_grid("bob", &self.settings_b)?;
        if self.prior.is_empty() {
            return bad("empty λ domain");
        }
        if self.prior.iter().any(|p| !(*p >= 0.0)) {
            return bad("negative prior weight");
        }
        if (self.prior.iter().sum::<f64>() - 1.0).abs() > NORM_TOL {
            return bad("prior does not sum to 1");
        }
        if self.response_a.len() != self.prior.len() || self.response_b.len() != self.prior.len() {
            return bad("response tables must have one row per λ");
        }
        let in_unit = |p: &f64| (0.0..=1.0).contains(p);
        if self.response_a.iter().any(|r| r.len() != self.settings_a.len() || !r.iter().all(in_unit))
            || self.response_b.iter().any(|r| r.len() != self.settings_b.len() || !r.iter().all(in_unit))
        {
            return bad("response rows must give a probability per setting");
        }
        Ok(())
    }

    /// A single deterministic strategy: `a = strategy_a[x]`, `b = strategy_b[y]`.
    pub fn deterministic(
        settings_a: Vec<Setting>,
        settings_b: Vec<Setting>,
        strategy_a: &[Outcome],
        strategy_b: &[Outcome],
    ) -> Result<Self, ModelError> {
        let plus = |o: &Outcome| if *o == Outcome::Plus { 1.0 } else { 0.0 };
        Self::new(
            settings_a,
            settings_b,
            alloc::vec![1.0],
            alloc::vec![strategy_a.iter().map(plus).collect()],
            alloc::vec![strategy_b.iter().map(plus).collect()],
        )
    }

    /// The 16 deterministic strategy pairs of the 2-2-2 scenario on labels
    /// `s0, s1`.
    pub fn all_deterministic_binary() -> Vec<LhvModel> {
        let grid = alloc::vec![Setting::Index(0), Setting::Index(1)];
        let strategies: Vec<[Outcome; 2]> =
            Outcome::ALL.iter().flat_map(|&o0| Outcome::ALL.iter().map(move |&o1| [o0, o1])).collect();
        let mut out = Vec::with_capacity(16);
        for sa in &strategies {
            for sb in &strategies {
                out.push(Self::deterministic(grid.clone(), grid.clone(), sa, sb).expect("valid strategy"));
            }
        }
        out
    }
}

/// `p(a, b | x, y) = Σ_λ p(λ) p(a | x, λ) p(b | y, λ)`.
pub fn lhv_behavior(m: &LhvModel) -> Result<Behavior, ModelError> {
    m.validate()?;
    Behavior::from_fn(m.settings_a.clone(), m.settings_b.clone(), |x, y| {
        let mut s = [0.0; 4];
        for (l, pl) in m.prior.iter().enumerate() {
            let pa = m.response_a[l][x];
            let pb = m.response_b[l][y];
            let a = [pa, 1.0 - pa];
            let b = [pb, 1.0 - pb];
            for (k, (oa, ob)) in CELLS.iter().enumerate() {
                s[k] += pl * a[oa.index()] * b[ob.index()];
            }
        }
        s
    })
}

/// `⟨ab⟩_{xy} = Σ a·b·p(a, b | x, y)`.
pub fn correlator(b: &Behavior, x: &Setting, y: &Setting) -> Result<f64, ModelError> {
    Ok(b.correlator_at(b.index_a(x)?, b.index_b(y)?))
}

/// Signs of the four CHSH terms, in [`ChshSettings::pairs`] order.
pub const CHSH_SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

/// The settings entering `S = ⟨ab⟩₀₀ + ⟨ab⟩₁₀ + ⟨ab⟩₀₁ - ⟨ab⟩₁₁`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChshSettings {
    pub x0: Setting,
    pub x1: Setting,
    pub y0: Setting,
    pub y1: Setting,
}

impl ChshSettings {
    pub fn new(x0: Setting, x1: Setting, y0: Setting, y1: Setting) -> Result<Self, ModelError> {
        if x0 == x1 || y0 == y1 {
            return Err(ModelError::InvalidBehavior("CHSH settings must differ per wing".into()));
        }
        Ok(ChshSettings { x0, x1, y0, y1 })
    }

    /// `s0, s1` on both wings.
    pub fn binary() -> Self {
        ChshSettings { x0: Setting::Index(0), x1: Setting::Index(1), y0: Setting::Index(0), y1: Setting::Index(1) }
    }

    /// `θa ∈ {0, π/2}`, `θb ∈ {-3π/4, 3π/4}`; the singlet reaches `S = 2√2`.
    pub fn singlet_optimal() -> Self {
        ChshSettings {
            x0: Setting::Angle(Angle::ZERO),
            x1: Setting::Angle(Angle::pi_over(2)),
            y0: Setting::Angle(Angle::new(-3, 4).expect("nonzero denominator")),
            y1: Setting::Angle(Angle::new(3, 4).expect("nonzero denominator")),
        }
    }

    /// `(x0,y0), (x1,y0), (x0,y1), (x1,y1)`.
    pub fn pairs(&self) -> [(Setting, Setting); 4] {
        [(self.x0, self.y0), (self.x1, self.y0), (self.x0, self.y1), (self.x1, self.y1)]
    }

    pub fn grid_a(&self) -> Vec<Setting> {
        alloc::vec![self.x0, self.x1]
    }

    pub fn grid_b(&self) -> Vec<Setting> {
        alloc::vec![self.y0, self.y1]
    }
}

/// The four correlators in [`ChshSettings::pairs`] order.
pub fn chsh_correlators(b: &Behavior, s: &ChshSettings) -> Result<[f64; 4], ModelError> {
    let mut e = [0.0; 4];
    for (k, (x, y)) in s.pairs().iter().enumerate() {
        e[k] = correlator(b, x, y)?;
    }
    Ok(e)
}

pub fn chsh_value(b: &Behavior, s: &ChshSettings) -> Result<f64, ModelError> {
    let e = chsh_correlators(b, s)?;
    Ok(e.iter().zip(CHSH_SIGNS).map(|(e, s)| e * s).sum())
}

/// CHSH as a single expectation: `Σ σ(x,y)·prior(x,y)·⟨ab⟩_{xy}` with the
/// prior over the four pairs in [`ChshSettings::pairs`] order. Equals `S/4`
/// for the uniform prior.
pub fn chsh_expectation(b: &Behavior, s: &ChshSettings, prior: &[f64; 4]) -> Result<f64, ModelError> {
    if prior.iter().any(|p| !(*p >= 0.0)) {
        return Err(ModelError::InvalidPrior("negative weight".into()));
    }
    let total: f64 = prior.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(ModelError::InvalidPrior(alloc::format!("weights sum to {total}")));
    }
    let e = chsh_correlators(b, s)?;
    Ok((0..4).map(|k| CHSH_SIGNS[k] * prior[k] * e[k]).sum())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct NoSignalingReport {
    pub tol: f64,
    /// `max |p(a|x,y) - p(a|x,y')|` over `a, x, y, y'`.
    pub max_deviation_a: f64,
    /// `max |p(b|x,y) - p(b|x',y)|` over `b, y, x, x'`.
    pub max_deviation_b: f64,
    /// Where the worst deviation occurs, if any is nonzero.
    pub worst_site: Option<String>,
    /// Marginal measurement setting independence within `tol`.
    pub passes: bool,
}

impl NoSignalingReport {
    pub fn worst(&self) -> f64 {
        self.max_deviation_a.max(self.max_deviation_b)
    }
}

pub fn check_no_signaling(b: &Behavior, tol: f64) -> NoSignalingReport {
    let (na, nb) = (b.settings_a.len(), b.settings_b.len());
    let mut worst = (0.0f64, None::<String>);
    let mut dev_a = 0.0f64;
    for x in 0..na {
        for a in 0..2 {
            let vals = (0..nb).map(|y| b.marginal_a(x, y)[a]);
            let (lo, hi) = min_max(vals);
            let d = hi - lo;
            dev_a = dev_a.max(d);
            if d > worst.0 {
                worst = (d, Some(alloc::format!("alice a={} x={}", Outcome::from_index(a), b.settings_a[x])));
            }
        }
    }
    let mut dev_b = 0.0f64;
    for y in 0..nb {
        for o in 0..2 {
            let vals = (0..na).map(|x| b.marginal_b(x, y)[o]);
            let (lo, hi) = min_max(vals);
            let d = hi - lo;
            dev_b = dev_b.max(d);
            if d > worst.0 {
                worst = (d, Some(alloc::format!("bob b={} y={}", Outcome::from_index(o), b.settings_b[y])));
            }
        }
    }
    NoSignalingReport {
        tol,
        max_deviation_a: dev_a,
        max_deviation_b: dev_b,
        worst_site: worst.1,
        passes: dev_a <= tol && dev_b <= tol,
    }
}

fn min_max(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// `max_{a,y} |p(a|x,y) - Σ_y' p(a|x,y') p(y')|` for Alice's setting `x`.
///
/// Zero for a full-support prior exactly when `p(a|x,y)` does not depend on
/// `y`; marginalizing over Bob's setting is only the same thing as
/// no-signaling in that case.
pub fn marginal_confusion_gap(b: &Behavior, x: usize, prior_y: &[f64]) -> Result<f64, ModelError> {
    let nb = b.settings_b.len();
    if prior_y.len() != nb || prior_y.iter().any(|p| !(*p >= 0.0)) {
        return Err(ModelError::InvalidPrior("prior must give one weight per Bob setting".into()));
    }
    if (prior_y.iter().sum::<f64>() - 1.0).abs() > NORM_TOL {
        return Err(ModelError::InvalidPrior("prior does not sum to 1".into()));
    }
    let mut gap = 0.0f64;
    for a in 0..2 {
        let mixed: f64 = (0..nb).map(|y| b.marginal_a(x, y)[a] * prior_y[y]).sum();
        for y in 0..nb {
            gap = gap.max((b.marginal_a(x, y)[a] - mixed).abs());
        }
    }
    Ok(gap)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FactorizabilityReport {
    pub local: bool,
    pub no_signaling: bool,
    /// The eight CHSH facets: for each position of the minus sign (in
    /// [`ChshSettings::pairs`] order), `+S` then `-S`.
    pub facets: [f64; 8],
    pub max_abs_s: f64,
}

/// Exact local-polytope membership for the 2-2-2 scenario: no-signaling
/// plus all eight CHSH facets at most `2 + facet_tol`. Settings are taken
/// in grid order.
pub fn check_factorizable(b: &Behavior, ns_tol: f64, facet_tol: f64) -> Result<FactorizabilityReport, ModelError> {
    if !b.is_binary() {
        return Err(ModelError::UnsupportedScenario(alloc::format!(
            "local polytope test needs 2x2 settings, got {}x{}",
            b.settings_a.len(),
            b.settings_b.len()
        )));
    }
    let e = [b.correlator_at(0, 0), b.correlator_at(1, 0), b.correlator_at(0, 1), b.correlator_at(1, 1)];
    let mut facets = [0.0; 8];
    for m in 0..4 {
        let s: f64 = (0..4).map(|k| if k == m { -e[k] } else { e[k] }).sum();
        facets[2 * m] = s;
        facets[2 * m + 1] = -s;
    }
    let max_abs_s = facets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let no_signaling = check_no_signaling(b, ns_tol).passes;
    Ok(FactorizabilityReport { local: no_signaling && max_abs_s <= 2.0 + facet_tol, no_signaling, facets, max_abs_s })
}

/// [`check_factorizable`] with the default tolerances.
pub fn check_factorizable_default(b: &Behavior) -> Result<FactorizabilityReport, ModelError> {
    check_factorizable(b, NORM_TOL, FACET_TOL)
}
