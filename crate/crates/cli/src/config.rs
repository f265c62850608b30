//! `key = value` run configuration with flag overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mlrh::trainer::{Hyperparams, SylvesterForm};
use mlrh::{Error, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "alpha",
    "beta",
    "lambda",
    "bits",
    "runs",
    "max_outer",
    "dcc_sweeps",
    "rel_tol",
    "seed",
    "sylvester_form",
    "rbf_m",
    "db_codes",
    "map_cutoff",
    "features",
    "labels",
    "csv",
    "class_ids",
    "model",
    "trace",
    "provenance",
    "codes",
];

/// Parsed config file contents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Usage(format!("config line {}: expected `key = value`", i + 1))
            })?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Usage(format!("config line {}: unknown key {key:?}", i + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| e.context(path.display()))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Usage(format!("config value {raw:?} is not valid for {key}"))),
        }
    }
}

/// Effective settings: a flag wins over the file, the file over the default.
#[derive(Debug, Default)]
pub struct Resolver {
    file: ConfigFile,
    effective: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Ok(Self {
            file,
            effective: BTreeMap::new(),
        })
    }

    pub fn value<T: FromStr + ToString>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let v = match flag {
            Some(v) => v,
            None => self.file.get(key)?.unwrap_or(default),
        };
        self.effective.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn optional<T: FromStr + ToString>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file.get(key)?,
        };
        if let Some(v) = &v {
            self.effective.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file.get::<String>(key)?.map(PathBuf::from),
        };
        if let Some(p) = &v {
            self.effective.insert(key.to_string(), p.display().to_string());
        }
        Ok(v)
    }

    /// Record a setting that has no config-file key (e.g. gen parameters).
    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.effective.insert(key.to_string(), value.to_string());
    }

    pub fn hyperparams(&mut self, flags: &HyperFlags) -> Result<Hyperparams> {
        let d = Hyperparams::default();
        let hp = Hyperparams {
            alpha: self.value("alpha", flags.alpha, d.alpha)?,
            beta: self.value("beta", flags.beta, d.beta)?,
            lambda: self.value("lambda", flags.lambda, d.lambda)?,
            bits: self.value("bits", flags.bits, d.bits)?,
            max_outer: self.value("max_outer", flags.max_outer, d.max_outer)?,
            dcc_sweeps: self.value("dcc_sweeps", flags.dcc_sweeps, d.dcc_sweeps)?,
            rel_tol: self.value("rel_tol", flags.rel_tol, d.rel_tol)?,
            seed: self.value("seed", flags.seed, d.seed)?,
            sylvester_form: self.value::<SylvesterForm>(
                "sylvester_form",
                flags.sylvester_form,
                d.sylvester_form,
            )?,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// The effective configuration in config-file syntax.
    pub fn render(&self, command: &str) -> String {
        let mut out = format!("# effective configuration of `mlrh {command}`\n");
        for (k, v) in &self.effective {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }
}

/// Hyperparameter flags shared by `train`, `boost` and `bench`.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct HyperFlags {
    /// Weight of the labels-to-codes regression term.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Weight of the features-to-codes regression term.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Ridge regulariser on both projections.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Code length.
    #[arg(long)]
    pub bits: Option<usize>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub dcc_sweeps: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `exact` (monotone descent) or `paper`.
    #[arg(long)]
    pub sylvester_form: Option<SylvesterForm>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let file = ConfigFile::parse("# demo\nalpha = 2.5\nbits=16 # trailing\n\nsylvester-form = paper\n").unwrap();
        let mut r = Resolver {
            file,
            effective: BTreeMap::new(),
        };
        let flags = HyperFlags {
            bits: Some(48),
            ..HyperFlags::default()
        };
        let hp = r.hyperparams(&flags).unwrap();
        assert_eq!(hp.alpha, 2.5);
        assert_eq!(hp.bits, 48);
        assert_eq!(hp.sylvester_form, SylvesterForm::Paper);
        assert_eq!(hp.beta, 1e-5);
        let text = r.render("train");
        assert!(text.contains("bits = 48"));
        assert!(text.contains("alpha = 2.5"));
        // The rendered config parses back to the same settings.
        let again = ConfigFile::parse(&text).unwrap();
        assert_eq!(again.get::<usize>("bits").unwrap(), Some(48));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ConfigFile::parse("gamma = 1").is_err());
        assert!(ConfigFile::parse("alpha 1").is_err());
        let f = ConfigFile::parse("bits = many").unwrap();
        assert!(f.get::<usize>("bits").is_err());
    }
}
