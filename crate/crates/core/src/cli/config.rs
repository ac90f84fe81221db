use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::CliError;

pub const SEED_ENV: &str = "METAFORGE_SEED";

/// Every key a config file may set; each mirrors the flag of the same name.
pub const KEYS: &[&str] = &[
    "seed",
    "jobs",
    "input",
    "out",
    "corpus",
    "model",
    "gold",
    "pred",
    "test",
    // synth
    "templates",
    "n",
    "raster-dir",
    "dpi",
    "jitter",
    "corruption",
    // align
    "gateway",
    "rejects",
    "threshold",
    "doi-threshold",
    // train
    "method",
    "embeddings",
    "sigma2",
    "max-iters",
    "tol",
    "dim",
    "emb-epochs",
    "hidden",
    "layers",
    "head",
    "shape",
    "epochs",
    "lr",
    "batch",
    "width",
    "channels",
    "heads",
    "det-hidden",
    "mode",
    "geometry",
    // bench
    "repeats",
];

/// Flag, then environment (seed only), then config file, then default.
#[derive(Debug, Default)]
pub struct Layers {
    file: BTreeMap<String, String>,
    origin: String,
}

impl Layers {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Layers::default());
        };
        let origin = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Self::parse(&text, &origin)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("{origin}: {}", e.message())))?;
        let mut file = BTreeMap::new();
        for (k, v) in table {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Usage(format!("{origin}: unknown key {k:?}")));
            }
            let v = match v {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                _ => return Err(CliError::Usage(format!("{origin}: key {k:?} must be a scalar"))),
            };
            file.insert(k, v);
        }
        Ok(Layers {
            file,
            origin: origin.to_string(),
        })
    }

    fn from_file<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        debug_assert!(KEYS.contains(&key), "{key}");
        self.file
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Usage(format!("{}: {key} = {v:?}: {e}", self.origin))))
            .transpose()
    }

    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.from_file(key),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.pick(key, flag)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.pick(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required --{key}")))
    }

    pub fn seed(&self, flag: Option<u64>, env: Option<&str>) -> Result<u64, CliError> {
        if let Some(s) = flag {
            return Ok(s);
        }
        if let Some(v) = env {
            return v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer")));
        }
        Ok(self.from_file("seed")?.unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_layers_resolve_in_order() {
        let l = Layers::parse("epochs = 7\nlr = 0.25\n", "c.toml").unwrap();
        assert_eq!(l.get::<usize>("epochs", Some(9), 1).unwrap(), 9);
        assert_eq!(l.get::<usize>("epochs", None, 1).unwrap(), 7);
        assert_eq!(l.get::<usize>("batch", None, 4).unwrap(), 4);
        assert_eq!(l.get::<f64>("lr", None, 0.1).unwrap(), 0.25);
    }

    #[test]
    fn seed_prefers_flag_then_env_then_file() {
        let l = Layers::parse("seed = 3", "c.toml").unwrap();
        assert_eq!(l.seed(Some(1), Some("2")).unwrap(), 1);
        assert_eq!(l.seed(None, Some("2")).unwrap(), 2);
        assert_eq!(l.seed(None, None).unwrap(), 3);
        assert_eq!(Layers::default().seed(None, None).unwrap(), 0);
        assert!(l.seed(None, Some("x")).is_err());
    }

    #[test]
    fn bad_files_are_usage_errors() {
        assert!(matches!(Layers::parse("colour = 1", "c"), Err(CliError::Usage(_))));
        assert!(matches!(Layers::parse("epochs = [1]", "c"), Err(CliError::Usage(_))));
        assert!(matches!(Layers::parse("epochs = ", "c"), Err(CliError::Usage(_))));
        let l = Layers::parse("epochs = \"many\"", "c").unwrap();
        assert!(matches!(l.get::<usize>("epochs", None, 1), Err(CliError::Usage(_))));
    }
}
