use std::fs;
use std::path::{Path, PathBuf};

use hdrcloudseg_core::baselines::BaselineParams;
use hdrcloudseg_core::color::ChannelId;
use hdrcloudseg_core::eval::{ImageType, Method};
use hdrcloudseg_core::segment::SegParams;
use hdrcloudseg_core::tonemap::TonemapParams;
use serde::{Deserialize, Deserializer, Serialize};

use crate::args::{Cli, Command, EvalCommand, ParamArgs};
use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveSource {
    #[default]
    Recover,
    Load,
}

/// Recover once from every stack of the dataset, or once per stack.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CurveScope {
    #[default]
    Dataset,
    Stack,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseConfig {
    pub source: CurveSource,
    pub scope: CurveScope,
    /// Curve CSV, required when `source` is `load`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub sample_count: usize,
    pub lambda: f64,
}

impl Default for ResponseConfig {
    fn default() -> Self {
        let p = hdrcloudseg_core::ResponseParams::default();
        Self {
            source: CurveSource::Recover,
            scope: CurveScope::Dataset,
            path: None,
            sample_count: p.sample_count,
            lambda: p.lambda,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentOptions {
    pub method: Method,
    pub image_type: ImageType,
    /// Channel used by the proposed method.
    pub channel: ChannelId,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            method: Method::Proposed,
            image_type: ImageType::Hdr,
            channel: ChannelId::NORMALIZED_BR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RocOptions {
    #[serde(deserialize_with = "alphas_from_json")]
    pub alphas: Vec<f64>,
}

impl Default for RocOptions {
    fn default() -> Self {
        Self {
            alphas: parse_alphas("0.6:0.99:0.01").expect("default grid parses"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelOptions {
    pub channels: Vec<ChannelId>,
    pub image_type: ImageType,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        Self {
            channels: ChannelId::all().collect(),
            image_type: ImageType::Hdr,
        }
    }
}

/// Resolved settings of one run: built-in defaults, overlaid by the JSON
/// config, overlaid by command-line flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub seg: SegParams,
    pub baseline: BaselineParams,
    pub tonemap: TonemapParams,
    pub response: ResponseConfig,
    pub segment: SegmentOptions,
    pub roc: RocOptions,
    pub channels: ChannelOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            out: PathBuf::from("out"),
            jobs: None,
            seed: None,
            seg: SegParams::default(),
            baseline: BaselineParams::default(),
            tonemap: TonemapParams::default(),
            response: ResponseConfig::default(),
            segment: SegmentOptions::default(),
            roc: RocOptions::default(),
            channels: ChannelOptions::default(),
        }
    }
}

fn alphas_from_json<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Spec {
        Text(String),
        List(Vec<f64>),
    }
    match Spec::deserialize(d)? {
        Spec::Text(s) => parse_alphas(&s).map_err(serde::de::Error::custom),
        Spec::List(v) => Ok(v),
    }
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_alphas(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?} in {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
                return Err(format!("grid {s:?} needs step > 0 and stop >= start"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(format!("expected start:stop:step or a comma list, got {s:?}")),
    }
}

fn resolve_against(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

impl RunConfig {
    /// Reads a JSON config. Relative paths inside it are taken relative to
    /// the config file.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty());
        cfg.dataset = cfg.dataset.map(|p| resolve_against(base, p));
        cfg.out = resolve_against(base, cfg.out);
        cfg.response.path = cfg.response.path.map(|p| resolve_against(base, p));
        Ok(cfg)
    }

    /// Defaults, then the config file (flag or environment), then flags.
    pub fn resolve(cli: &Cli) -> Result<Self, CliError> {
        let mut cfg = match &cli.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        if let Some(p) = &cli.dataset {
            cfg.dataset = Some(p.clone());
        }
        if let Some(p) = &cli.out {
            cfg.out = p.clone();
        }
        if cli.jobs.is_some() {
            cfg.jobs = cli.jobs;
        }
        if cli.seed.is_some() {
            cfg.seed = cli.seed;
        }
        cfg.apply(&cli.params);
        match &cli.command {
            Command::Segment { method, image_type, channel } => {
                if let Some(m) = method {
                    cfg.segment.method = *m;
                }
                if let Some(t) = image_type {
                    cfg.segment.image_type = *t;
                }
                if let Some(c) = channel {
                    cfg.segment.channel = *c;
                }
            }
            Command::Evaluate { what: EvalCommand::Roc { alphas: Some(a) } } => cfg.roc.alphas = a.0.clone(),
            Command::Evaluate { what: EvalCommand::Channels { channels, image_type } } => {
                if let Some(c) = channels {
                    cfg.channels.channels = c.clone();
                }
                if let Some(t) = image_type {
                    cfg.channels.image_type = *t;
                }
            }
            _ => {}
        }
        Ok(cfg)
    }

    fn apply(&mut self, p: &ParamArgs) {
        macro_rules! set {
            ($($src:ident => $dst:expr),* $(,)?) => {
                $(if let Some(v) = p.$src.clone() { $dst = v; })*
            };
        }
        set! {
            alpha => self.seg.alpha,
            mu => self.seg.mu,
            neighborhood => self.seg.neighborhood,
            fuzzifier => self.seg.fcm_fuzzifier,
            fcm_tol => self.seg.fcm_tol,
            fcm_max_iter => self.seg.fcm_max_iter,
            long_threshold => self.baseline.long_rb_threshold,
            souza_threshold => self.baseline.souza_sat_threshold,
            li_std_threshold => self.baseline.li_std_threshold,
            li_fixed_threshold => self.baseline.li_fixed_threshold,
            tonemap => self.tonemap.method,
            clip_limit => self.tonemap.clahe_clip_limit,
            tiles => self.tonemap.clahe_tiles,
            key => self.tonemap.key_a,
            response_scope => self.response.scope,
            samples => self.response.sample_count,
            lambda => self.response.lambda,
        }
        if let Some(s) = p.sigma {
            self.seg.sigma = Some(s);
        }
        if let Some(path) = &p.response {
            self.response.source = CurveSource::Load;
            self.response.path = Some(path.clone());
        }
    }

    /// Parameter invariants, and existence of every referenced input path.
    pub fn validate(&self, needs_dataset: bool) -> Result<(), CliError> {
        let usage = |e: hdrcloudseg_core::Error| CliError::Usage(e.to_string());
        self.seg.validate().map_err(usage)?;
        self.baseline.validate().map_err(usage)?;
        self.tonemap.validate().map_err(usage)?;
        if self.jobs == Some(0) {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        if self.response.source == CurveSource::Load {
            match &self.response.path {
                Some(p) if p.is_file() => {}
                Some(p) => return Err(CliError::Usage(format!("response curve {} not found", p.display()))),
                None => return Err(CliError::Usage("response source \"load\" needs a path".into())),
            }
        } else {
            if self.response.sample_count < hdrcloudseg_core::radiance::MIN_SAMPLE_COUNT {
                return Err(CliError::Usage(format!(
                    "response sample count must be at least {}",
                    hdrcloudseg_core::radiance::MIN_SAMPLE_COUNT
                )));
            }
            if !(self.response.lambda > 0.0 && self.response.lambda.is_finite()) {
                return Err(CliError::Usage("response lambda must be positive".into()));
            }
        }
        if needs_dataset {
            match &self.dataset {
                Some(p) if p.exists() => {}
                Some(p) => return Err(CliError::Usage(format!("dataset {} not found", p.display()))),
                None => return Err(CliError::Usage("no dataset given (--dataset or config)".into())),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_grids() {
        let g = parse_alphas("0.6:0.99:0.01").unwrap();
        assert_eq!(g.len(), 40);
        assert_eq!(g[0], 0.6);
        assert_eq!(*g.last().unwrap(), 0.99);
        assert_eq!(parse_alphas("0.88").unwrap(), vec![0.88]);
        assert_eq!(parse_alphas("0.7, 0.8").unwrap(), vec![0.7, 0.8]);
        assert!(parse_alphas("0.9:0.6:0.1").is_err());
        assert!(parse_alphas("0.6:0.9:0").is_err());
        assert!(parse_alphas("a,b").is_err());
    }

    #[test]
    fn config_json_accepts_grid_strings_and_rejects_unknown_keys() {
        let cfg: RunConfig = serde_json::from_str(r#"{"roc": {"alphas": "0.6:0.7:0.05"}}"#).unwrap();
        assert_eq!(cfg.roc.alphas, vec![0.6, 0.65, 0.7]);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sge": {}}"#).is_err());
    }
}
