//! Run descriptions in TOML.
//!
//! ```toml
//! [domain]
//! kind = "interval"      # interval | annulus | rectangle
//! length = 1.0
//! n = 400
//!
//! [reaction]
//! kind = "power"         # zero | power | sum_powers | exp_power
//! q = 3.0
//!
//! [solver]
//! p = 1.5
//!
//! [initial]
//! profile = "hat"
//! ```
//!
//! Every key is either consumed or rejected by name.

use std::path::PathBuf;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::mesh::{Domain, Resolution, Vec2};
use crate::model::Nonlinearity;
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Flat { c: f64 },
    Hat { amplitude: f64 },
    Bump { center: Vec2, width: f64, amplitude: f64 },
    /// `scale · t_p(φ_k) φ_k` for the `k`-th bump of the default dictionary.
    Dictionary { index: usize, scale: f64 },
    /// Mesh dump with one value column.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub trajectory: String,
    pub summary: String,
    pub dump_states: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditConfig {
    pub energy: bool,
    pub residual: bool,
    pub well: bool,
    pub l2: bool,
    pub gradient_bound: bool,
    pub growth: bool,
    pub radial: bool,
    pub reaction: bool,
    pub dictionary_size: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            energy: true,
            residual: true,
            well: true,
            l2: true,
            gradient_bound: true,
            growth: true,
            radial: true,
            reaction: true,
            dictionary_size: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationConfig {
    pub p_sequence: Vec<f64>,
    pub eps_schedule: Vec<f64>,
    pub checkpoints: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: Domain,
    pub resolution: Resolution,
    pub nl: Nonlinearity,
    pub p0: Option<f64>,
    /// `p` is meaningful only without a continuation section.
    pub solver: SolverConfig,
    pub initial: InitialProfile,
    pub output: OutputConfig,
    pub audits: AuditConfig,
    pub continuation: Option<ContinuationConfig>,
}

/// A table whose keys are ticked off as they are read.
struct Section {
    name: String,
    table: Table,
}

impl Section {
    fn new(name: &str, value: Option<Value>) -> Result<Section> {
        let table = match value {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(_) => return Err(Error::config(name, "expected a table")),
        };
        Ok(Section { name: name.into(), table })
    }

    fn key(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.table.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<Value> {
        self.take(key).ok_or_else(|| Error::config(&self.key(key), "missing required key"))
    }

    fn number(&self, key: &str, v: Value) -> Result<f64> {
        match v {
            Value::Float(x) => Ok(x),
            Value::Integer(i) => Ok(i as f64),
            Value::String(s) if s == "inf" => Ok(f64::INFINITY),
            other => Err(Error::config(&self.key(key), format!("expected a number, found {other}"))),
        }
    }

    fn f64(&mut self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        self.number(key, v)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key).map(|v| self.number(key, v)).transpose()
    }

    fn usize(&self, key: &str, v: Value) -> Result<usize> {
        match v {
            Value::Integer(i) if i >= 0 => Ok(i as usize),
            other => Err(Error::config(&self.key(key), format!("expected a non-negative integer, found {other}"))),
        }
    }

    fn opt_usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key).map(|v| self.usize(key, v)).transpose()
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(b),
            Some(other) => Err(Error::config(&self.key(key), format!("expected true or false, found {other}"))),
        }
    }

    fn opt_string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(Error::config(&self.key(key), format!("expected a string, found {other}"))),
        }
    }

    fn string(&mut self, key: &str) -> Result<String> {
        self.opt_string(key)?.ok_or_else(|| Error::config(&self.key(key), "missing required key"))
    }

    fn opt_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a.into_iter().map(|v| self.number(key, v)).collect::<Result<_>>().map(Some),
            Some(other) => Err(Error::config(&self.key(key), format!("expected a list of numbers, found {other}"))),
        }
    }

    /// Fails on the first key nobody asked for.
    fn finish(self) -> Result<()> {
        match self.table.keys().next() {
            Some(k) => Err(Error::config(&format!("{}.{k}", self.name), "unknown key")),
            None => Ok(()),
        }
    }
}

const SECTIONS: [&str; 8] = ["domain", "reaction", "solver", "initial", "output", "audits", "continuation", "format_version"];

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
    config_from_table(table)
}

pub fn config_from_table(mut table: Table) -> Result<RunConfig> {
    if let Some(k) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(Error::config(k, "unknown section"));
    }
    if let Some(v) = table.remove("format_version") {
        if v.as_integer() != Some(1) {
            return Err(Error::config("format_version", format!("unsupported version {v}")));
        }
    }
    let (domain, resolution) = parse_domain(Section::new("domain", table.remove("domain"))?)?;
    let (nl, p0) = parse_reaction(Section::new("reaction", table.remove("reaction"))?)?;
    let continuation = match table.remove("continuation") {
        None => None,
        Some(v) => Some(parse_continuation(Section::new("continuation", Some(v))?)?),
    };
    let solver = parse_solver(Section::new("solver", table.remove("solver"))?, &domain, continuation.is_some())?;
    let initial = parse_initial(Section::new("initial", table.remove("initial"))?, &domain)?;
    let output = parse_output(Section::new("output", table.remove("output"))?)?;
    let audits = parse_audits(Section::new("audits", table.remove("audits"))?)?;
    let cfg = RunConfig { domain, resolution, nl, p0, solver, initial, output, audits, continuation };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_domain(mut s: Section) -> Result<(Domain, Resolution)> {
    let kind = s.string("kind")?;
    let out = match kind.as_str() {
        "interval" => {
            let length = s.f64_or("length", 1.0)?;
            let n = s.opt_usize("n")?.unwrap_or(400);
            (Domain::Interval { length }, Resolution::Uniform(n))
        }
        "annulus" => {
            let inner = s.f64("a")?;
            let outer = s.f64("b")?;
            let dim = s.opt_usize("N")?.unwrap_or(2);
            let n = s.opt_usize("n")?.unwrap_or(400);
            if !(inner < outer) {
                return Err(Error::config("domain.a", format!("need a < b, got a = {inner}, b = {outer}")));
            }
            (Domain::Annulus { inner, outer, dim }, Resolution::Uniform(n))
        }
        "rectangle" => {
            let width = s.f64_or("width", 1.0)?;
            let height = s.f64_or("height", 1.0)?;
            let nx = s.opt_usize("nx")?.unwrap_or(32);
            let ny = s.opt_usize("ny")?.unwrap_or(nx);
            (Domain::Rectangle { width, height }, Resolution::Grid(nx, ny))
        }
        other => return Err(Error::config("domain.kind", format!("unknown domain kind `{other}`"))),
    };
    s.finish()?;
    out.0.validate().map_err(|e| Error::config("domain", e.to_string()))?;
    Ok(out)
}

fn parse_reaction(mut s: Section) -> Result<(Nonlinearity, Option<f64>)> {
    let kind = s.opt_string("kind")?.unwrap_or_else(|| "zero".into());
    let nl = match kind.as_str() {
        "zero" => Nonlinearity::Zero,
        "power" => Nonlinearity::Power { q: s.f64("q")? },
        "sum_powers" => Nonlinearity::SumPowers { q: s.f64("q")?, s: s.f64("s")? },
        "exp_power" => Nonlinearity::ExpPower { q: s.f64("q")?, alpha: s.f64("alpha")? },
        other => return Err(Error::config("reaction.kind", format!("unknown reaction kind `{other}`"))),
    };
    let p0 = s.opt_f64("p0")?;
    s.finish()?;
    nl.validate().map_err(|e| match e {
        Error::Config { key, message } => Error::config(&format!("reaction.{key}"), message),
        e => e,
    })?;
    if let Some(p0) = p0 {
        if !(p0 > 1.0 && p0 < 2.0) {
            return Err(Error::config("reaction.p0", format!("p0 = {p0} must lie in (1, 2)")));
        }
    }
    Ok((nl, p0))
}

fn parse_solver(mut s: Section, domain: &Domain, continuation: bool) -> Result<SolverConfig> {
    let p = if continuation { s.opt_f64("p")?.unwrap_or(2.0) } else { s.f64("p")? };
    let d = SolverConfig::new(p, domain.diameter());
    let cfg = SolverConfig {
        p,
        eps: s.f64_or("eps", d.eps)?,
        dt0: s.f64_or("dt0", d.dt0)?,
        dt_min: s.f64_or("dt_min", d.dt_min)?,
        t_end: s.f64_or("t_end", d.t_end)?,
        u_max: s.f64_or("u_max", d.u_max)?,
        tol_ext: s.f64_or("tol_ext", d.tol_ext)?,
        energy_residual_tol: s.f64_or("energy_residual_tol", d.energy_residual_tol)?,
        adapt: s.bool_or("adapt", d.adapt)?,
        store_stride: s.opt_usize("store_stride")?.unwrap_or(d.store_stride),
        checkpoints: s.opt_list("checkpoints")?.unwrap_or_default(),
        max_steps: s.opt_usize("max_steps")?.unwrap_or(d.max_steps),
    };
    s.finish()?;
    if !(p > 1.0) {
        return Err(Error::config("solver.p", format!("p = {p} violates p > 1")));
    }
    cfg.validate().map_err(|e| Error::config("solver", e.to_string()))?;
    Ok(cfg)
}

fn parse_initial(mut s: Section, domain: &Domain) -> Result<InitialProfile> {
    let profile = s.opt_string("profile")?.unwrap_or_else(|| "hat".into());
    let out = match profile.as_str() {
        "flat" => InitialProfile::Flat { c: s.f64_or("c", 1.0)? },
        "hat" => InitialProfile::Hat { amplitude: s.f64_or("amplitude", 1.0)? },
        "bump" => {
            let center = match s.opt_list("center")? {
                None => match *domain {
                    Domain::Interval { length } => [length / 2.0, 0.0],
                    Domain::Annulus { inner, outer, .. } => [(inner + outer) / 2.0, 0.0],
                    Domain::Rectangle { width, height } => [width / 2.0, height / 2.0],
                },
                Some(c) if c.len() == domain.grad_dim() => [c[0], c.get(1).copied().unwrap_or(0.0)],
                Some(c) => {
                    return Err(Error::config(
                        "initial.center",
                        format!("expected {} coordinates, found {}", domain.grad_dim(), c.len()),
                    ))
                }
            };
            InitialProfile::Bump { center, width: s.f64("width")?, amplitude: s.f64_or("amplitude", 1.0)? }
        }
        "dictionary" => {
            let index = s.opt_usize("index")?.unwrap_or(0);
            InitialProfile::Dictionary { index, scale: s.f64_or("scale", 0.5)? }
        }
        "file" => InitialProfile::File { path: PathBuf::from(s.string("path")?) },
        other => return Err(Error::config("initial.profile", format!("unknown profile `{other}`"))),
    };
    s.finish()?;
    Ok(out)
}

fn parse_output(mut s: Section) -> Result<OutputConfig> {
    let out = OutputConfig {
        dir: PathBuf::from(s.opt_string("dir")?.unwrap_or_else(|| "out".into())),
        trajectory: s.opt_string("trajectory")?.unwrap_or_else(|| "trajectory.csv".into()),
        summary: s.opt_string("summary")?.unwrap_or_else(|| "summary.json".into()),
        dump_states: s.bool_or("dump_states", false)?,
    };
    s.finish()?;
    Ok(out)
}

fn parse_audits(mut s: Section) -> Result<AuditConfig> {
    let d = AuditConfig::default();
    let out = AuditConfig {
        energy: s.bool_or("energy", d.energy)?,
        residual: s.bool_or("residual", d.residual)?,
        well: s.bool_or("well", d.well)?,
        l2: s.bool_or("l2", d.l2)?,
        gradient_bound: s.bool_or("gradient_bound", d.gradient_bound)?,
        growth: s.bool_or("growth", d.growth)?,
        radial: s.bool_or("radial", d.radial)?,
        reaction: s.bool_or("reaction", d.reaction)?,
        dictionary_size: s.opt_usize("dictionary_size")?.unwrap_or(d.dictionary_size),
    };
    s.finish()?;
    Ok(out)
}

fn parse_continuation(mut s: Section) -> Result<ContinuationConfig> {
    let p_sequence = match (s.opt_list("p_sequence")?, s.opt_usize("members")?) {
        (Some(_), Some(_)) => {
            return Err(Error::config("continuation.members", "give either members or p_sequence"))
        }
        (Some(p), None) => p,
        (None, m) => crate::limit::default_p_sequence(m.unwrap_or(6)),
    };
    let eps_schedule =
        s.opt_list("eps_schedule")?.unwrap_or_else(|| crate::limit::default_eps_schedule(&p_sequence));
    let checkpoints = s.opt_list("checkpoints")?.unwrap_or_else(|| vec![0.1, 0.25, 0.4]);
    s.finish()?;
    Ok(ContinuationConfig { p_sequence, eps_schedule, checkpoints })
}

impl RunConfig {
    /// Exponents this run will use.
    pub fn exponents(&self) -> Vec<f64> {
        match &self.continuation {
            Some(c) => c.p_sequence.clone(),
            None => vec![self.solver.p],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let key = if self.continuation.is_some() { "continuation.p_sequence" } else { "solver.p" };
        for p in self.exponents() {
            if !(p > 1.0) {
                return Err(Error::config(key, format!("p = {p} violates p > 1")));
            }
            if let Some(theta) = self.nl.theta() {
                if !(p < theta) {
                    return Err(Error::config(key, format!("p = {p} violates p < θ = {theta}")));
                }
            }
        }
        if matches!(self.domain, Domain::Annulus { .. }) {
            let p0 = self.p0.ok_or_else(|| Error::config("reaction.p0", "missing required key for annulus runs"))?;
            if let Some(p) = self.exponents().into_iter().find(|&p| !(p < p0)) {
                return Err(Error::config(key, format!("p = {p} violates p < p0 = {p0}")));
            }
        }
        if let Some(c) = &self.continuation {
            if c.eps_schedule.len() != c.p_sequence.len() {
                return Err(Error::config("continuation.eps_schedule", "needs one entry per exponent"));
            }
            if c.p_sequence.is_empty() || c.p_sequence.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(Error::config("continuation.p_sequence", "must be non-empty and strictly decreasing"));
            }
            if c.checkpoints.iter().any(|&t| !(t > 0.0 && t <= self.solver.t_end)) {
                return Err(Error::config("continuation.checkpoints", "checkpoints must lie in (0, T_end]"));
            }
        }
        if let InitialProfile::Dictionary { index, .. } = self.initial {
            if index >= self.audits.dictionary_size {
                return Err(Error::config("initial.index", "index must be below audits.dictionary_size"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[domain]\nkind = \"interval\"\nlength = 1\n[reaction]\nkind = \"zero\"\n[solver]\np = 1.5\n";

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.solver.dt0, 1e-3);
        assert_eq!(c.solver.t_end, 1.0);
        assert_eq!(c.solver.u_max, 1e6);
        assert_eq!(c.nl, Nonlinearity::Zero);
        assert_eq!(c.domain, Domain::Interval { length: 1.0 });
        assert_eq!(c.initial, InitialProfile::Hat { amplitude: 1.0 });
    }

    #[test]
    fn rejects_p_not_above_one() {
        let e = parse_config(&MINIMAL.replace("p = 1.5", "p = 0.9")).unwrap_err();
        assert!(e.to_string().contains("p > 1"));
        assert_eq!(key_of(e), "solver.p");
    }

    #[test]
    fn power_reaction_records_theta() {
        let c = parse_config(&MINIMAL.replace("kind = \"zero\"", "kind = \"power\"\nq = 3")).unwrap();
        assert_eq!(c.nl, Nonlinearity::Power { q: 3.0 });
        assert_eq!(c.nl.theta(), Some(3.0));
        let e = parse_config(&MINIMAL.replace("kind = \"zero\"", "kind = \"power\"\nq = 1.4")).unwrap_err();
        assert_eq!(key_of(e), "solver.p");
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = parse_config(&format!("{MINIMAL}fuzz_key = 1\n")).unwrap_err();
        assert_eq!(key_of(e), "solver.fuzz_key");
        let e = parse_config(&format!("{MINIMAL}[extra]\nx = 1\n")).unwrap_err();
        assert_eq!(key_of(e), "extra");
        let e = parse_config(&MINIMAL.replace("\"zero\"", "\"cubic\"")).unwrap_err();
        assert_eq!(key_of(e), "reaction.kind");
        let e = parse_config(&MINIMAL.replace("p = 1.5\n", "")).unwrap_err();
        assert_eq!(key_of(e), "solver.p");
    }

    #[test]
    fn annulus_rules() {
        let annulus = "[domain]\nkind = \"annulus\"\na = 2\nb = 1\n[solver]\np = 1.2\n[reaction]\np0 = 1.5\n";
        assert_eq!(key_of(parse_config(annulus).unwrap_err()), "domain.a");
        let ok = annulus.replace("a = 2\nb = 1", "a = 1\nb = 2");
        assert!(parse_config(&ok).is_ok());
        assert_eq!(key_of(parse_config(&ok.replace("p = 1.2", "p = 1.6")).unwrap_err()), "solver.p");
        assert_eq!(key_of(parse_config(&ok.replace("p0 = 1.5", "")).unwrap_err()), "reaction.p0");
    }

    #[test]
    fn continuation_section() {
        let c = parse_config(&format!("{MINIMAL}[continuation]\nmembers = 3\n")).unwrap();
        let plan = c.continuation.unwrap();
        assert_eq!(plan.p_sequence, vec![1.5, 1.25, 1.125]);
        assert_eq!(plan.eps_schedule, vec![0.25, 0.0625, 0.015625]);
        let e = parse_config(&format!("{MINIMAL}[continuation]\np_sequence = [1.1, 1.2]\n")).unwrap_err();
        assert_eq!(key_of(e), "continuation.p_sequence");
    }
}
