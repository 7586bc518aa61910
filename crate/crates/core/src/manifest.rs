//! Experiment manifests: TOML with one block per concern, dotted
//! `key=value` overrides, and a resolved echo with every default filled in.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::SamplerConfig;
use crate::numfmt::NumberFormat;
use crate::point_process::ProcessSpec;
use crate::quench::{BoundarySection, DesignPoint, LocalKind};
use crate::spin::ModelParams;
use crate::window::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    GraphStats,
    Correlation,
    KernelCheck,
    Dlr,
    Moments,
    Annealed,
    Cesaro,
}

impl StudyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StudyKind::GraphStats => "graph-stats",
            StudyKind::Correlation => "correlation",
            StudyKind::KernelCheck => "kernel-check",
            StudyKind::Dlr => "dlr",
            StudyKind::Moments => "moments",
            StudyKind::Annealed => "annealed",
            StudyKind::Cesaro => "cesaro",
        }
    }

    pub fn needs_model(&self) -> bool {
        !matches!(self, StudyKind::GraphStats | StudyKind::Correlation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowBlock {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
}

impl WindowBlock {
    pub fn build(&self) -> Result<Window> {
        match &self.origin {
            Some(o) => Window::with_origin(self.lower.clone(), self.upper.clone(), o.clone()),
            None => Window::new(self.lower.clone(), self.upper.clone()),
        }
    }
}

/// Where the quenched configuration comes from. With neither field set it
/// is drawn from the process.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigurationBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeBlock {
    pub count: usize,
    pub ratio: f64,
}

impl Default for VolumeBlock {
    fn default() -> Self {
        Self { count: 8, ratio: 1.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphStatsBlock {
    pub radius: f64,
    pub alpha: f64,
    pub r: f64,
    #[serde(rename = "M")]
    pub m: u32,
    /// Extra process draws for the integrability summary; 0 skips it.
    pub samples: usize,
}

impl Default for GraphStatsBlock {
    fn default() -> Self {
        Self {
            radius: 1.0,
            alpha: 0.5,
            r: 2.0,
            m: 6,
            samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationBlock {
    pub samples: usize,
    pub cell_size: f64,
}

impl Default for CorrelationBlock {
    fn default() -> Self {
        Self {
            samples: 1000,
            cell_size: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelCheckBlock {
    pub sites: Vec<usize>,
    pub nodes: usize,
    pub u_max: f64,
    pub proposal_sd: f64,
}

impl Default for KernelCheckBlock {
    fn default() -> Self {
        Self {
            sites: vec![0],
            nodes: 201,
            u_max: 3.0,
            proposal_sd: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DlrBlock {
    pub eta1: Vec<usize>,
    pub eta2: Vec<usize>,
    pub nodes: usize,
    pub u_max: f64,
}

impl Default for DlrBlock {
    fn default() -> Self {
        Self {
            eta1: vec![1],
            eta2: vec![0, 1, 2],
            nodes: 201,
            u_max: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsBlock {
    pub extra_design: Vec<DesignPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub min_ess_fraction: f64,
    pub trend_level: f64,
}

impl Default for MomentsBlock {
    fn default() -> Self {
        Self {
            extra_design: Vec::new(),
            lambda: None,
            min_ess_fraction: 0.1,
            trend_level: 0.01,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealedBlock {
    /// `Δ`; the whole window when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<WindowBlock>,
    pub num_disorder: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CesaroBlock {
    pub observables: Vec<LocalKind>,
}

impl Default for CesaroBlock {
    fn default() -> Self {
        Self {
            observables: vec![
                LocalKind::Tanh { site: 0, comp: 0 },
                LocalKind::Cos { site: 0, comp: 0 },
                LocalKind::Constant { value: 1.0 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub study: StudyKind,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub number_format: NumberFormat,
    pub window: WindowBlock,
    #[serde(default = "default_process")]
    pub process: ProcessSpec,
    #[serde(default)]
    pub configuration: ConfigurationBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelParams>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub volumes: VolumeBlock,
    #[serde(default)]
    pub section: BoundarySection,
    #[serde(default)]
    pub graph_stats: GraphStatsBlock,
    #[serde(default)]
    pub correlation: CorrelationBlock,
    #[serde(default)]
    pub kernel_check: KernelCheckBlock,
    #[serde(default)]
    pub dlr: DlrBlock,
    #[serde(default)]
    pub moments: MomentsBlock,
    #[serde(default = "default_annealed")]
    pub annealed: AnnealedBlock,
    #[serde(default)]
    pub cesaro: CesaroBlock,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_process() -> ProcessSpec {
    ProcessSpec::poisson(1.0)
}

fn default_annealed() -> AnnealedBlock {
    AnnealedBlock {
        volume: None,
        num_disorder: 100,
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn toml_error(text: &str, e: toml::de::Error) -> Error {
    match e.span() {
        Some(span) => Error::parse(line_of(text, span.start), e.message().trim().to_string()),
        None => Error::Manifest {
            field: "manifest".into(),
            message: e.message().trim().to_string(),
        },
    }
}

/// Parses `key.path=value`; the value is read as a TOML literal and falls
/// back to a bare string.
pub fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, value) = spec.split_once('=').ok_or_else(|| Error::Manifest {
        field: spec.to_string(),
        message: "override must look like key=value".into(),
    })?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(Error::Manifest {
            field: key.to_string(),
            message: "empty key segment".into(),
        });
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((path, parsed))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for (depth, key) in parents.iter().enumerate() {
        let entry = cur
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::Manifest {
            field: path[..=depth].join("."),
            message: "is not a table".into(),
        })?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(text, e))
    }

    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Self::from_toml(text);
        }
        let mut table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut table, &path, value)?;
        }
        let merged = toml::to_string(&table).map_err(|e| Error::Manifest {
            field: "override".into(),
            message: e.to_string(),
        })?;
        toml::from_str(&merged).map_err(|e| Error::Manifest {
            field: "override".into(),
            message: e.message().trim().to_string(),
        })
    }

    /// Reads a manifest and resolves `model_file` and `configuration.path`
    /// relative to the manifest's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut m = Self::from_toml_with_overrides(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = m.configuration.path.take() {
            m.configuration.path = Some(if p.is_absolute() { p } else { base.join(p) });
        }
        if let Some(file) = m.model_file.take() {
            let full = if file.is_absolute() { file } else { base.join(file) };
            if m.model.is_some() {
                return Err(Error::Manifest {
                    field: "model_file".into(),
                    message: "give either an inline [model] block or model_file, not both".into(),
                });
            }
            let text = std::fs::read_to_string(&full)?;
            m.model = Some(ModelParams::from_toml(&text)?);
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn window(&self) -> Result<Window> {
        self.window.build().map_err(|e| e.context("window"))
    }

    pub fn model(&self) -> Result<&ModelParams> {
        self.model.as_ref().ok_or_else(|| Error::Manifest {
            field: "model".into(),
            message: format!("study `{}` needs a model", self.study.as_str()),
        })
    }
}
