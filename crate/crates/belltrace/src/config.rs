//! Experiment configuration: a TOML document validated field by field.
//!
//! Every problem is collected with the dotted path of the offending key, so
//! one pass over a broken file reports all of them.

use std::fmt;
use std::path::PathBuf;

use belltrace_core::harness::{QConfig, Replay};
use belltrace_core::models::{ChshSettings, LhvModel, Setting};
use belltrace_core::spacetime::StageTimes;
use belltrace_core::{Angle, Schedule, ScheduleConfig};
use serde::Serialize;
use toml::{Table, Value};

/// Where the correlations come from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Singlet {
        grid_a: Vec<Angle>,
        grid_b: Vec<Angle>,
    },
    PrBox,
    Lhv(LhvModel),
    /// A behavior table in the documented CSV format, resolved against the
    /// config file's directory.
    File {
        path: PathBuf,
    },
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Singlet { .. } => "singlet",
            ModelSpec::PrBox => "pr-box",
            ModelSpec::Lhv(_) => "lhv",
            ModelSpec::File { .. } => "file",
        }
    }
}

/// How settings are assigned to trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Policy {
    /// `n` trials for every setting pair.
    PerPair,
    /// `n · pairs` trials, each wing drawing from its own prior.
    Random { prior_a: Option<Vec<f64>>, prior_b: Option<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportConfig {
    /// Traced trials per setting pair, for the stage table and classifier.
    pub traced_runs: u64,
    pub write_dataset: bool,
    pub plot: bool,
    /// Points on the analytic correlator curve over `[0, π]`.
    pub curve_points: u32,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { traced_runs: 1, write_dataset: true, plot: true, curve_points: 48 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// `None` picks the first two settings of each grid.
    pub chsh: Option<ChshSettings>,
    /// Trials per setting pair.
    pub n: u64,
    pub seed: u64,
    pub policy: Policy,
    pub schedule: ScheduleConfig,
    pub q: QConfig,
    pub preset: bool,
    pub replay: Replay,
    /// Worker threads; `None` lets the pool decide.
    pub threads: Option<usize>,
    pub report: ReportConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let opt = ChshSettings::singlet_optimal();
        let angles = |v: Vec<Setting>| v.into_iter().filter_map(Setting::angle).collect();
        ExperimentConfig {
            model: ModelSpec::Singlet { grid_a: angles(opt.grid_a()), grid_b: angles(opt.grid_b()) },
            chsh: None,
            n: 100_000,
            seed: 0,
            policy: Policy::PerPair,
            schedule: ScheduleConfig::default(),
            q: QConfig::default(),
            preset: false,
            replay: Replay::Observers,
            threads: None,
            report: ReportConfig::default(),
        }
    }
}

/// One invalid field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub reason: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.reason)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<FieldError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

struct Walker {
    errors: Vec<FieldError>,
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

impl Walker {
    fn err(&mut self, path: impl Into<String>, reason: impl Into<String>) {
        self.errors.push(FieldError { path: path.into(), reason: reason.into() });
    }

    fn unknown_keys(&mut self, t: &Table, prefix: &str, known: &[&str]) {
        for k in t.keys() {
            if !known.contains(&k.as_str()) {
                self.err(join(prefix, k), format!("unknown key (expected one of: {})", known.join(", ")));
            }
        }
    }

    fn table<'a>(&mut self, t: &'a Table, prefix: &str, key: &str) -> Option<&'a Table> {
        match t.get(key)? {
            Value::Table(v) => Some(v),
            _ => {
                self.err(join(prefix, key), "expected a table");
                None
            }
        }
    }

    fn float(&mut self, t: &Table, prefix: &str, key: &str) -> Option<f64> {
        match t.get(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            _ => {
                self.err(join(prefix, key), "expected a number");
                None
            }
        }
    }

    fn boolean(&mut self, t: &Table, prefix: &str, key: &str) -> Option<bool> {
        match t.get(key)? {
            Value::Boolean(v) => Some(*v),
            _ => {
                self.err(join(prefix, key), "expected true or false");
                None
            }
        }
    }

    fn string<'a>(&mut self, t: &'a Table, prefix: &str, key: &str) -> Option<&'a str> {
        match t.get(key)? {
            Value::String(v) => Some(v),
            _ => {
                self.err(join(prefix, key), "expected a string");
                None
            }
        }
    }

    /// A nonnegative integer, or a positive one when `min` is 1.
    fn count(&mut self, t: &Table, prefix: &str, key: &str, min: i64) -> Option<u64> {
        match t.get(key)? {
            Value::Integer(v) if *v >= min => Some(*v as u64),
            Value::Integer(v) => {
                let what = match min {
                    0 => "a nonnegative integer".to_string(),
                    1 => "a positive integer".to_string(),
                    m => format!("an integer >= {m}"),
                };
                self.err(join(prefix, key), format!("must be {what}, got {v}"));
                None
            }
            _ => {
                self.err(join(prefix, key), "expected an integer");
                None
            }
        }
    }

    fn floats(&mut self, v: &Value, path: &str) -> Option<Vec<f64>> {
        let Value::Array(items) = v else {
            self.err(path, "expected an array of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            match item {
                Value::Float(f) => out.push(*f),
                Value::Integer(k) => out.push(*k as f64),
                _ => {
                    self.err(format!("{path}[{i}]"), "expected a number");
                    return None;
                }
            }
        }
        Some(out)
    }

    fn float_rows(&mut self, t: &Table, prefix: &str, key: &str) -> Option<Vec<Vec<f64>>> {
        let path = join(prefix, key);
        let Value::Array(rows) = t.get(key)? else {
            self.err(path, "expected an array of arrays");
            return None;
        };
        let mut out = Vec::with_capacity(rows.len());
        let mut ok = true;
        for (i, r) in rows.iter().enumerate() {
            match self.floats(r, &format!("{path}[{i}]")) {
                Some(r) => out.push(r),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn parsed<T: std::str::FromStr>(&mut self, v: &Value, path: &str, what: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        match v {
            Value::String(s) => match s.parse() {
                Ok(x) => Some(x),
                Err(e) => {
                    self.err(path, format!("{e}"));
                    None
                }
            },
            Value::Integer(0) => "0".parse().ok(),
            _ => {
                self.err(path, format!("expected {what} as a string"));
                None
            }
        }
    }

    fn list<T: std::str::FromStr>(&mut self, t: &Table, prefix: &str, key: &str, what: &str) -> Option<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let path = join(prefix, key);
        let Value::Array(items) = t.get(key)? else {
            self.err(path, format!("expected an array of {what}s"));
            return None;
        };
        if items.is_empty() {
            self.err(path, "must not be empty");
            return None;
        }
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, v) in items.iter().enumerate() {
            match self.parsed(v, &format!("{path}[{i}]"), what) {
                Some(x) => out.push(x),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn stage_times(&mut self, t: &Table, prefix: &str, key: &str, into: &mut StageTimes) {
        let path = join(prefix, key);
        let Some(st) = self.table(t, prefix, key) else { return };
        self.unknown_keys(st, &path, &["t0", "t_theta", "t_pm", "t_c"]);
        for (k, slot) in
            [("t0", &mut into.t0), ("t_theta", &mut into.t_theta), ("t_pm", &mut into.t_pm), ("t_c", &mut into.t_c)]
        {
            if let Some(v) = self.float(st, &path, k) {
                *slot = v;
            }
        }
    }
}

fn binary_labels() -> Vec<Setting> {
    vec![Setting::Index(0), Setting::Index(1)]
}

fn distinct<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().all(|(i, a)| !v[..i].contains(a))
}

/// Parses and validates a configuration document. Keys left out take the
/// defaults of [`ExperimentConfig::default`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![FieldError { path: "<document>".into(), reason: e.message().to_string() }])
    })?;
    let mut w = Walker { errors: Vec::new() };
    let mut cfg = ExperimentConfig::default();
    w.unknown_keys(&root, "", &["seed", "n", "threads", "model", "chsh", "policy", "schedule", "q", "mode", "report"]);

    if let Some(v) = w.count(&root, "", "seed", 0) {
        cfg.seed = v;
    }
    if let Some(v) = w.count(&root, "", "n", 1) {
        cfg.n = v;
    }
    if let Some(v) = w.count(&root, "", "threads", 1) {
        cfg.threads = Some(v as usize);
    }

    let mut grids: Option<(Vec<Setting>, Vec<Setting>)> = None;
    match w.table(&root, "", "model") {
        None if root.contains_key("model") => {}
        None => {
            let o = ChshSettings::singlet_optimal();
            grids = Some((o.grid_a(), o.grid_b()));
        }
        Some(m) => {
            let kind = w.string(m, "model", "kind");
            if kind.is_none() && !m.contains_key("kind") {
                w.err("model.kind", "missing (one of: singlet, pr-box, lhv, file)");
            }
            match kind {
                Some("singlet") => {
                    w.unknown_keys(m, "model", &["kind", "grid_a", "grid_b"]);
                    let opt = ChshSettings::singlet_optimal();
                    let default = |v: Vec<Setting>| v.into_iter().filter_map(Setting::angle).collect::<Vec<_>>();
                    let ga = if m.contains_key("grid_a") {
                        w.list::<Angle>(m, "model", "grid_a", "angle")
                    } else {
                        Some(default(opt.grid_a()))
                    };
                    let gb = if m.contains_key("grid_b") {
                        w.list::<Angle>(m, "model", "grid_b", "angle")
                    } else {
                        Some(default(opt.grid_b()))
                    };
                    for (k, g) in [("grid_a", &ga), ("grid_b", &gb)] {
                        if let Some(g) = g {
                            if !distinct(g) {
                                w.err(join("model", k), "angles must be distinct");
                            }
                        }
                    }
                    if let (Some(ga), Some(gb)) = (ga, gb) {
                        grids = Some((
                            ga.iter().copied().map(Setting::Angle).collect(),
                            gb.iter().copied().map(Setting::Angle).collect(),
                        ));
                        cfg.model = ModelSpec::Singlet { grid_a: ga, grid_b: gb };
                    }
                }
                Some("pr-box") => {
                    w.unknown_keys(m, "model", &["kind"]);
                    cfg.model = ModelSpec::PrBox;
                    grids = Some((binary_labels(), binary_labels()));
                }
                Some("lhv") => {
                    w.unknown_keys(m, "model", &["kind", "prior", "response_a", "response_b"]);
                    let prior = match m.get("prior") {
                        Some(v) => w.floats(v, "model.prior"),
                        None => {
                            w.err("model.prior", "missing");
                            None
                        }
                    };
                    let ra = w.float_rows(m, "model", "response_a");
                    let rb = w.float_rows(m, "model", "response_b");
                    for (k, r) in [("response_a", &ra), ("response_b", &rb)] {
                        if r.is_none() && !m.contains_key(k) {
                            w.err(join("model", k), "missing");
                        }
                    }
                    if let (Some(prior), Some(ra), Some(rb)) = (prior, ra, rb) {
                        match LhvModel::new(binary_labels(), binary_labels(), prior, ra, rb) {
                            Ok(lhv) => {
                                cfg.model = ModelSpec::Lhv(lhv);
                                grids = Some((binary_labels(), binary_labels()));
                            }
                            Err(e) => w.err("model", e.to_string()),
                        }
                    }
                }
                Some("file") => {
                    w.unknown_keys(m, "model", &["kind", "path"]);
                    match w.string(m, "model", "path") {
                        Some(p) => cfg.model = ModelSpec::File { path: PathBuf::from(p) },
                        None if !m.contains_key("path") => w.err("model.path", "missing"),
                        None => {}
                    }
                }
                Some(other) => {
                    w.err("model.kind", format!("unknown model {other:?} (one of: singlet, pr-box, lhv, file)"))
                }
                None => {}
            }
        }
    }

    if let Some(c) = w.table(&root, "", "chsh") {
        w.unknown_keys(c, "chsh", &["x0", "x1", "y0", "y1"]);
        let mut s = Vec::with_capacity(4);
        for k in ["x0", "x1", "y0", "y1"] {
            match c.get(k) {
                Some(v) => s.extend(w.parsed::<Setting>(v, &join("chsh", k), "a setting")),
                None => w.err(join("chsh", k), "missing"),
            }
        }
        if let [x0, x1, y0, y1] = s[..] {
            match ChshSettings::new(x0, x1, y0, y1) {
                Ok(ch) => {
                    if let Some((ga, gb)) = &grids {
                        for (k, v, g) in [("x0", x0, ga), ("x1", x1, ga), ("y0", y0, gb), ("y1", y1, gb)] {
                            if !g.contains(&v) {
                                w.err(join("chsh", k), format!("setting {v} is not in the model's grid"));
                            }
                        }
                    }
                    cfg.chsh = Some(ch);
                }
                Err(e) => w.err("chsh", e.to_string()),
            }
        }
    }

    if root.contains_key("policy") {
        let pairs = grids.as_ref().map(|(a, b)| (a.len(), b.len()));
        match root.get("policy") {
            Some(Value::String(s)) if s == "per-pair" => cfg.policy = Policy::PerPair,
            Some(Value::String(s)) if s == "random" => cfg.policy = Policy::Random { prior_a: None, prior_b: None },
            Some(Value::Table(p)) => {
                w.unknown_keys(p, "policy", &["kind", "prior_a", "prior_b"]);
                match w.string(p, "policy", "kind") {
                    Some("per-pair") => cfg.policy = Policy::PerPair,
                    Some("random") => {
                        let mut priors = [None, None];
                        for (i, k) in ["prior_a", "prior_b"].into_iter().enumerate() {
                            let path = join("policy", k);
                            let Some(v) = p.get(k) else { continue };
                            let Some(pr) = w.floats(v, &path) else { continue };
                            let expect = pairs.map(|(a, b)| if i == 0 { a } else { b });
                            if pr.iter().any(|x| !(*x >= 0.0)) || (pr.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                                w.err(path, "must be nonnegative weights summing to 1");
                            } else if expect.is_some_and(|n| n != pr.len()) {
                                w.err(path, format!("needs one weight per setting ({})", expect.unwrap_or(0)));
                            } else {
                                priors[i] = Some(pr);
                            }
                        }
                        let [prior_a, prior_b] = priors;
                        cfg.policy = Policy::Random { prior_a, prior_b };
                    }
                    Some(other) => w.err("policy.kind", format!("unknown policy {other:?} (per-pair or random)")),
                    None if !p.contains_key("kind") => w.err("policy.kind", "missing"),
                    None => {}
                }
            }
            _ => w.err("policy", "expected \"per-pair\", \"random\" or a table"),
        }
    }

    let mut schedule_ok = true;
    if let Some(s) = w.table(&root, "", "schedule") {
        let before = w.errors.len();
        w.unknown_keys(s, "schedule", &["x_alice", "x_bob", "c", "message_speed", "alice", "bob"]);
        let sc = &mut cfg.schedule;
        for (k, slot) in [
            ("x_alice", &mut sc.x_alice),
            ("x_bob", &mut sc.x_bob),
            ("c", &mut sc.c),
            ("message_speed", &mut sc.message_speed),
        ] {
            if let Some(v) = w.float(s, "schedule", k) {
                *slot = v;
            }
        }
        let (mut ta, mut tb) = (sc.times_alice, sc.times_bob);
        w.stage_times(s, "schedule", "alice", &mut ta);
        w.stage_times(s, "schedule", "bob", &mut tb);
        cfg.schedule.times_alice = ta;
        cfg.schedule.times_bob = tb;
        schedule_ok = w.errors.len() == before;
    }
    if schedule_ok {
        if let Err(e) = Schedule::build(cfg.schedule) {
            w.err("schedule", e.to_string());
        }
    }

    if let Some(q) = w.table(&root, "", "q") {
        w.unknown_keys(q, "q", &["setting_width", "unresolved_local_setting"]);
        if let Some(v) = w.float(q, "q", "setting_width") {
            if v >= 0.0 && v.is_finite() {
                cfg.q.setting_width = v;
            } else {
                w.err("q.setting_width", format!("must be a finite width >= 0, got {v}"));
            }
        }
        if let Some(v) = w.boolean(q, "q", "unresolved_local_setting") {
            cfg.q.unresolved_local_setting = v;
        }
    }

    if let Some(m) = w.table(&root, "", "mode") {
        w.unknown_keys(m, "mode", &["preset", "replay"]);
        if let Some(v) = w.boolean(m, "mode", "preset") {
            cfg.preset = v;
        }
        match w.string(m, "mode", "replay") {
            Some("observers") => cfg.replay = Replay::Observers,
            Some("sampling-only") => cfg.replay = Replay::SamplingOnly,
            Some(other) => w.err("mode.replay", format!("unknown replay {other:?} (observers or sampling-only)")),
            None => {}
        }
    }

    if let Some(r) = w.table(&root, "", "report") {
        w.unknown_keys(r, "report", &["traced_runs", "dataset", "plot", "curve_points"]);
        if let Some(v) = w.count(r, "report", "traced_runs", 1) {
            cfg.report.traced_runs = v;
        }
        if let Some(v) = w.boolean(r, "report", "dataset") {
            cfg.report.write_dataset = v;
        }
        if let Some(v) = w.boolean(r, "report", "plot") {
            cfg.report.plot = v;
        }
        if let Some(v) = w.count(r, "report", "curve_points", 2) {
            cfg.report.curve_points = v.min(u64::from(u32::MAX)) as u32;
        }
    }

    if cfg.report.traced_runs > cfg.n {
        w.err("report.traced_runs", format!("cannot exceed n = {}", cfg.n));
    }

    if w.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(w.errors))
    }
}
