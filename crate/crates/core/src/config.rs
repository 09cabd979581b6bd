//! Plain-text `key = value` experiment configuration.
//!
//! ```text
//! # diagonal model, theoretical basis
//! model.delta1 = 2.4
//! n_grid = 15000, 35000
//! N = 100
//! estimators = componentwise, bosq, guillas
//! truncation = power_alpha(6)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{BasisTag, TruncationRule};
use crate::smoothing::{PenalizedFpcaConfig, Penalty};
use crate::spectral_model::{Interval, OperatorModel};
use crate::wavelet::WaveletFamily;

const KEYS: &[&str] = &[
    "table",
    "model.kind",
    "model.delta1",
    "model.delta2",
    "model.epsilon",
    "model.a",
    "model.b",
    "model.M",
    "model.components",
    "model.burn_in",
    "n_grid",
    "N",
    "seed",
    "out",
    "estimators",
    "metrics",
    "truncation",
    "truncation.kind",
    "truncation.params",
    "a_n.beta",
    "basis",
    "grid.h_t",
    "grid.p",
    "kernel.h_n",
    "fpca.q",
    "fpca.l",
    "spline.lambda",
    "wavelet.family",
    "wavelet.j0",
    "wavelet.M",
    "wavelet.alpha_rule",
];

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key {k:?}", no + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {k:?}", no + 1)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Diagonal,
    /// Banded transition and innovation matrices.
    NonDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Componentwise,
    Bosq,
    Guillas,
    BosqFull,
    GuillasFull,
    Kernel(f64),
    Fpca,
    Wavelet,
}

impl Method {
    /// Linear projection estimators share the basis and truncation machinery.
    pub fn is_projection(&self) -> bool {
        !matches!(self, Method::Kernel(_) | Method::Fpca)
    }

    fn needs_curves(&self) -> bool {
        matches!(self, Method::Kernel(_) | Method::Fpca | Method::Wavelet)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Componentwise => write!(f, "componentwise"),
            Method::Bosq => write!(f, "bosq"),
            Method::Guillas => write!(f, "guillas"),
            Method::BosqFull => write!(f, "bosq_full"),
            Method::GuillasFull => write!(f, "guillas_full"),
            Method::Kernel(h) => write!(f, "kernel_h{h}"),
            Method::Fpca => write!(f, "fpca"),
            Method::Wavelet => write!(f, "wavelet"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    /// Truncated mean-square error of the operator coefficients.
    Emse,
    /// `sqrt(EMSE) * sigma_X`.
    Ub,
    /// Mean `H`-norm error of the one-step prediction.
    Error,
    /// Mean grid-averaged squared error against the next observed curve.
    Emae,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Emse => "emse",
            Metric::Ub => "ub",
            Metric::Error => "error",
            Metric::Emae => "emae",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "emse" => Ok(Metric::Emse),
            "ub" => Ok(Metric::Ub),
            "error" => Ok(Metric::Error),
            "emae" => Ok(Metric::Emae),
            o => Err(Error::Config(format!("unknown metric {o:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    Step(f64),
    Points(usize),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Label written in the `table` column.
    pub table: String,
    pub model: OperatorModel<f64>,
    pub kind: ModelKind,
    /// Number of simulated components.
    pub components: usize,
    pub burn_in: usize,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub methods: Vec<Method>,
    /// Empty means every metric that applies to a method.
    pub metrics: Vec<Metric>,
    pub rules: Vec<TruncationRule>,
    pub basis: BasisTag,
    pub grid: GridSpec,
    pub a_n_beta: f64,
    pub fpca: PenalizedFpcaConfig,
    pub spline_lambda: f64,
    pub wavelet_family: WaveletFamily,
    pub wavelet_j0: usize,
    pub wavelet_m: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            table: "custom".into(),
            model: OperatorModel::default(),
            kind: ModelKind::Diagonal,
            components: 50,
            burn_in: 0,
            n_grid: vec![15000],
            replications: 100,
            methods: vec![Method::Componentwise],
            metrics: Vec::new(),
            rules: vec![TruncationRule::PowerAlpha { alpha: 6.0 }],
            basis: BasisTag::Theoretical,
            grid: GridSpec::Step(0.015),
            a_n_beta: 0.5,
            fpca: PenalizedFpcaConfig::default(),
            spline_lambda: 0.0,
            wavelet_family: WaveletFamily::Daubechies4,
            wavelet_j0: 3,
            wavelet_m: 50,
            seed: 1,
            out: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s)).collect()
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_key_values(&parse_key_values(text)?)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_key_values(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = Self::default();
        let get = |k: &str| kv.get(k).map(String::as_str);
        if let Some(v) = get("table") {
            c.table = v.to_string();
        }
        if let Some(v) = get("model.kind") {
            c.kind = match v {
                "diagonal" => ModelKind::Diagonal,
                "nondiagonal" => ModelKind::NonDiagonal,
                o => return Err(Error::Config(format!("model.kind: unknown {o:?}"))),
            };
        }
        let mut m = c.model;
        if let Some(v) = get("model.delta1") {
            m.delta1 = num("model.delta1", v)?;
        }
        if let Some(v) = get("model.delta2") {
            m.delta2 = num("model.delta2", v)?;
        }
        if let Some(v) = get("model.epsilon") {
            m.epsilon = num("model.epsilon", v)?;
        }
        let a = get("model.a").map(|v| num("model.a", v)).transpose()?.unwrap_or(m.interval.a);
        let b = get("model.b").map(|v| num("model.b", v)).transpose()?.unwrap_or(m.interval.b);
        m.interval = Interval::new(a, b).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(v) = get("model.M") {
            m.m = num("model.M", v)?;
        }
        c.model = m;
        c.components = match get("model.components") {
            Some(v) => num("model.components", v)?,
            None => m.m,
        };
        if let Some(v) = get("model.burn_in") {
            c.burn_in = num("model.burn_in", v)?;
        }
        if let Some(v) = get("n_grid") {
            c.n_grid = list::<f64>("n_grid", v)?.into_iter().map(|x| x.round() as usize).collect();
        }
        if let Some(v) = get("N") {
            c.replications = num("N", v)?;
        }
        if let Some(v) = get("seed") {
            c.seed = num("seed", v)?;
        }
        if let Some(v) = get("out") {
            c.out = Some(PathBuf::from(v));
        }
        let bandwidths: Vec<f64> = match get("kernel.h_n") {
            Some(v) => list("kernel.h_n", v)?,
            None => vec![0.1],
        };
        if let Some(v) = get("estimators") {
            c.methods.clear();
            for name in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                match name {
                    "componentwise" => c.methods.push(Method::Componentwise),
                    "bosq" => c.methods.push(Method::Bosq),
                    "guillas" => c.methods.push(Method::Guillas),
                    "bosq_full" => c.methods.push(Method::BosqFull),
                    "guillas_full" => c.methods.push(Method::GuillasFull),
                    "kernel" => c.methods.extend(bandwidths.iter().map(|&h| Method::Kernel(h))),
                    "fpca" => c.methods.push(Method::Fpca),
                    "wavelet" => c.methods.push(Method::Wavelet),
                    o => return Err(Error::Config(format!("estimators: unknown {o:?}"))),
                }
            }
        }
        if let Some(v) = get("metrics") {
            c.metrics = v.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
        }
        if let Some(v) = get("truncation") {
            c.rules = v.split(';').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
        } else if let Some(kind) = get("truncation.kind") {
            let params = get("truncation.params").unwrap_or("");
            c.rules = vec![format!("{kind}({params})").replace("()", "").parse()?];
        }
        if let Some(v) = get("wavelet.alpha_rule") {
            c.rules = list::<f64>("wavelet.alpha_rule", v)?
                .into_iter()
                .map(|alpha| TruncationRule::PowerAlpha { alpha })
                .collect();
            for r in &c.rules {
                r.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if let Some(v) = get("a_n.beta") {
            c.a_n_beta = num("a_n.beta", v)?;
        }
        if let Some(v) = get("basis") {
            c.basis = match v {
                "theoretical" => BasisTag::Theoretical,
                "empirical" => BasisTag::Empirical,
                o => return Err(Error::Config(format!("basis: unknown {o:?}"))),
            };
        }
        match (get("grid.h_t"), get("grid.p")) {
            (Some(_), Some(_)) => return Err(Error::Config("set only one of grid.h_t and grid.p".into())),
            (Some(v), None) => c.grid = GridSpec::Step(num("grid.h_t", v)?),
            (None, Some(v)) => c.grid = GridSpec::Points(num("grid.p", v)?),
            (None, None) => {}
        }
        if let Some(v) = get("fpca.q") {
            c.fpca.q = num("fpca.q", v)?;
        }
        if let Some(v) = get("fpca.l") {
            c.fpca.l = v.parse::<Penalty>().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(v) = get("spline.lambda") {
            c.spline_lambda = num("spline.lambda", v)?;
        }
        if let Some(v) = get("wavelet.family") {
            c.wavelet_family = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
        }
        if let Some(v) = get("wavelet.j0") {
            c.wavelet_j0 = num("wavelet.j0", v)?;
        }
        if let Some(v) = get("wavelet.M") {
            c.wavelet_m = num("wavelet.M", v)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Canonical key-value form; parsing it back yields the same config.
    pub fn to_key_values(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            kv.insert(k.to_string(), v);
        };
        let join = |v: Vec<String>, sep: &str| v.join(sep);
        put("table", self.table.clone());
        put(
            "model.kind",
            match self.kind {
                ModelKind::Diagonal => "diagonal".into(),
                ModelKind::NonDiagonal => "nondiagonal".into(),
            },
        );
        put("model.delta1", format!("{:?}", self.model.delta1));
        put("model.delta2", format!("{:?}", self.model.delta2));
        put("model.epsilon", format!("{:?}", self.model.epsilon));
        put("model.a", format!("{:?}", self.model.interval.a));
        put("model.b", format!("{:?}", self.model.interval.b));
        put("model.M", self.model.m.to_string());
        put("model.components", self.components.to_string());
        put("model.burn_in", self.burn_in.to_string());
        put("n_grid", join(self.n_grid.iter().map(|n| n.to_string()).collect(), ","));
        put("N", self.replications.to_string());
        put("seed", self.seed.to_string());
        if let Some(o) = &self.out {
            put("out", o.display().to_string());
        }
        let mut names: Vec<String> = Vec::new();
        let mut hs: Vec<String> = Vec::new();
        for m in &self.methods {
            match m {
                Method::Kernel(h) => {
                    hs.push(format!("{h:?}"));
                    if !names.iter().any(|n| n == "kernel") {
                        names.push("kernel".into());
                    }
                }
                o => names.push(o.to_string()),
            }
        }
        put("estimators", names.join(","));
        if !hs.is_empty() {
            put("kernel.h_n", hs.join(","));
        }
        if !self.metrics.is_empty() {
            put("metrics", join(self.metrics.iter().map(|m| m.to_string()).collect(), ","));
        }
        put("truncation", join(self.rules.iter().map(|r| r.to_string()).collect(), ";"));
        put("a_n.beta", format!("{:?}", self.a_n_beta));
        put(
            "basis",
            match self.basis {
                BasisTag::Theoretical => "theoretical".into(),
                BasisTag::Empirical => "empirical".into(),
            },
        );
        match self.grid {
            GridSpec::Step(h) => put("grid.h_t", format!("{h:?}")),
            GridSpec::Points(p) => put("grid.p", p.to_string()),
        }
        put("fpca.q", self.fpca.q.to_string());
        put("fpca.l", self.fpca.l.to_string());
        put("spline.lambda", format!("{:?}", self.spline_lambda));
        put("wavelet.family", self.wavelet_family.to_string());
        put("wavelet.j0", self.wavelet_j0.to_string());
        put("wavelet.M", self.wavelet_m.to_string());
        kv
    }

    pub fn to_text(&self) -> String {
        self.to_key_values().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the canonical text, excluding the output location.
    pub fn hash(&self) -> String {
        let mut kv = self.to_key_values();
        kv.remove("out");
        let text: String = kv.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replications < 1 {
            return bad("N must be at least 1".into());
        }
        if self.n_grid.is_empty() {
            return bad("n_grid is empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be strictly ascending".into());
        }
        if self.methods.is_empty() {
            return bad("no estimators selected".into());
        }
        if self.rules.is_empty() && self.methods.iter().any(Method::is_projection) {
            return bad("no truncation rule".into());
        }
        if self.components < 1 {
            return bad("model.components must be at least 1".into());
        }
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        let curves = self.methods.iter().any(Method::needs_curves);
        if self.kind == ModelKind::NonDiagonal && (self.basis == BasisTag::Empirical || curves) {
            return bad("the non-diagonal model supports theoretical-basis estimators only".into());
        }
        if self.basis == BasisTag::Theoretical && curves {
            return bad("kernel, fpca and wavelet need basis = empirical".into());
        }
        if self.basis == BasisTag::Empirical
            && self.methods.iter().any(|m| matches!(m, Method::BosqFull | Method::GuillasFull))
        {
            return bad("bosq_full and guillas_full need basis = theoretical".into());
        }
        match self.grid {
            GridSpec::Step(h) if !(h > 0.0) => return bad(format!("grid.h_t must be positive, got {h}")),
            GridSpec::Points(p) if p < 3 => return bad(format!("grid.p must be at least 3, got {p}")),
            _ => {}
        }
        for m in &self.methods {
            if let Method::Kernel(h) = m {
                if !(*h > 0.0) {
                    return bad(format!("kernel bandwidth must be positive, got {h}"));
                }
            }
        }
        if !(self.a_n_beta > 0.0) {
            return bad("a_n.beta must be positive".into());
        }
        if !(self.spline_lambda >= 0.0) {
            return bad("spline.lambda must be nonnegative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let c = ExperimentConfig::from_text(
            "# comment\nn_grid = 750, 1250 # trailing\nN=7\nestimators = componentwise, kernel, fpca\nkernel.h_n = 0.1, 0.3\nbasis = empirical\n",
        )
        .unwrap();
        assert_eq!(c.n_grid, vec![750, 1250]);
        assert_eq!(c.replications, 7);
        assert_eq!(c.methods, vec![Method::Componentwise, Method::Kernel(0.1), Method::Kernel(0.3), Method::Fpca]);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "bogus = 1",
            "N = 0",
            "n_grid = 100, 50",
            "N = x",
            "noequals",
            "N = 1\nN = 2",
            "truncation = power_alpha(-1)",
            "estimators = magic",
            "estimators = kernel",
            "grid.h_t = 0.1\ngrid.p = 10",
            "model.kind = nondiagonal\nbasis = empirical",
        ] {
            let e = ExperimentConfig::from_text(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}: {e}");
        }
    }

    #[test]
    fn truncation_forms() {
        let c = ExperimentConfig::from_text("truncation.kind = power_alpha\ntruncation.params = 5").unwrap();
        assert_eq!(c.rules, vec![TruncationRule::PowerAlpha { alpha: 5.0 }]);
        let c = ExperimentConfig::from_text("truncation = power_alpha(5); log_n").unwrap();
        assert_eq!(c.rules.len(), 2);
        let c = ExperimentConfig::from_text("truncation.kind = log_n").unwrap();
        assert_eq!(c.rules, vec![TruncationRule::LogN]);
    }

    #[test]
    fn canonical_round_trip_and_hash() {
        let text = "n_grid = 750, 1250\nestimators = kernel, fpca, wavelet\nkernel.h_n = 0.1, 0.3\nbasis = empirical\ngrid.p = 256\ntruncation = power_alpha(6); power_alpha(10)\nseed = 9\n";
        let a = ExperimentConfig::from_text(text).unwrap();
        let b = ExperimentConfig::from_text(&a.to_text()).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.out = Some("elsewhere".into());
        assert_eq!(a.hash(), c.hash());
        c.seed = 10;
        assert_ne!(a.hash(), c.hash());
    }
}
