//! Project manifests: one TOML file naming every input of a run.
//!
//! ```toml
//! isa = "isa.toml"
//! timing = "timing.toml"          # optional, built-in table otherwise
//! ppa = "ppa.toml"                # optional, built-in coefficients otherwise
//! programs = ["programs/vector_sum.s"]
//! tests = ["tests/instructions.toml"]
//! dse = "dse.toml"                # optional
//!
//! [configs]                       # optional named processor configs
//! tiny = "configs/tiny.toml"
//!
//! [generation]                    # optional
//! template = "gen/prompt.txt"
//! samples = 9
//! ```
//!
//! Paths are relative to the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nanoop_core::isa::{assemble, auto_fuse, Isa, Program};
use nanoop_core::llm::{GenerationConfig, Shot};
use nanoop_core::ppa::Coefficients;
use nanoop_core::timing::DEFAULT_MAX_PATTERN_SIZE;
use nanoop_core::uarch::ProcessorConfig;
use serde::Deserialize;

use crate::data;
use crate::formats::{self, FormatError, IsaManifest, Timing, TestSuite};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationRow {
    pub template: Option<PathBuf>,
    pub regulations: Option<PathBuf>,
    pub shots: Option<PathBuf>,
    pub model: Option<String>,
    pub samples: Option<usize>,
    pub feedback_rounds: Option<usize>,
    pub temperature: Option<f64>,
    pub random_states: Option<usize>,
    pub retries: Option<usize>,
    pub prefilter: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    isa: PathBuf,
    timing: Option<PathBuf>,
    ppa: Option<PathBuf>,
    #[serde(default)]
    programs: Vec<PathBuf>,
    #[serde(default)]
    tests: Vec<PathBuf>,
    dse: Option<PathBuf>,
    #[serde(default)]
    configs: BTreeMap<String, PathBuf>,
    #[serde(default)]
    generation: GenerationRow,
}

/// Prompt pieces for generation.
#[derive(Debug, Clone)]
pub struct PromptParts {
    pub template: String,
    pub regulations: String,
    pub shots: Vec<Shot>,
}

#[derive(Debug, Clone)]
pub struct Project {
    pub path: PathBuf,
    pub root: PathBuf,
    manifest: Manifest,
}

impl Project {
    /// Reads the manifest and checks that every referenced file exists.
    pub fn open(path: &Path) -> Result<Project, FormatError> {
        let manifest: Manifest = formats::parse_toml(&formats::read(path)?, path)?;
        let root = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        let p = Project { path: path.to_path_buf(), root, manifest };
        for f in p.referenced_files() {
            if !f.is_file() {
                return Err(FormatError::invalid(path, format!("referenced file {} does not exist", f.display())));
            }
        }
        Ok(p)
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    fn referenced_files(&self) -> Vec<PathBuf> {
        let m = &self.manifest;
        let g = &m.generation;
        let mut v = vec![m.isa.clone()];
        v.extend(m.timing.iter().cloned());
        v.extend(m.ppa.iter().cloned());
        v.extend(m.programs.iter().cloned());
        v.extend(m.tests.iter().cloned());
        v.extend(m.dse.iter().cloned());
        v.extend(m.configs.values().cloned());
        v.extend([&g.template, &g.regulations, &g.shots].into_iter().flatten().cloned());
        v.into_iter().map(|p| self.resolve(&p)).collect()
    }

    /// Parses every referenced file.
    pub fn check(&self) -> Result<(), FormatError> {
        let isa = self.isa()?;
        self.timing()?;
        self.ppa()?;
        self.programs(&isa.isa)?;
        self.tests()?;
        if self.manifest.dse.is_some() {
            self.dse()?;
        }
        for name in self.manifest.configs.keys() {
            self.config(name)?;
        }
        self.prompt_parts()?;
        Ok(())
    }

    pub fn isa(&self) -> Result<IsaManifest, FormatError> {
        formats::load_isa(&self.resolve(&self.manifest.isa))
    }

    pub fn timing(&self) -> Result<Timing, FormatError> {
        match &self.manifest.timing {
            None => Ok(data::timing()),
            Some(p) => {
                let p = self.resolve(p);
                formats::parse_timing(&formats::read(&p)?, &p)
            }
        }
    }

    /// Area and power coefficients.
    pub fn ppa(&self) -> Result<(Coefficients, Coefficients), FormatError> {
        match &self.manifest.ppa {
            None => Ok(data::ppa()),
            Some(p) => {
                let p = self.resolve(p);
                formats::parse_ppa(&formats::read(&p)?, &p)
            }
        }
    }

    /// The manifest's ISA with its fusion settings applied, or `gain`
    /// instead when given.
    pub fn fused_isa(&self, manifest: &IsaManifest, timing: &Timing, gain: Option<f64>) -> Result<Isa, FormatError> {
        let size = manifest.fusion.as_ref().and_then(|f| f.max_pattern_size).unwrap_or(DEFAULT_MAX_PATTERN_SIZE);
        match gain.or(manifest.fusion.as_ref().map(|f| f.gain)) {
            None => Ok(manifest.isa.clone()),
            Some(g) => auto_fuse(&manifest.isa, g, &timing.table, size)
                .map_err(|e| FormatError::invalid(&self.resolve(&self.manifest.isa), e.to_string())),
        }
    }

    pub fn program_paths(&self) -> Vec<PathBuf> {
        self.manifest.programs.iter().map(|p| self.resolve(p)).collect()
    }

    /// Assembles every listed program against `isa`.
    pub fn programs(&self, isa: &Isa) -> Result<Vec<(PathBuf, Program)>, FormatError> {
        self.program_paths().into_iter().map(|p| assemble_file(&p, isa).map(|prog| (p, prog))).collect()
    }

    pub fn tests(&self) -> Result<TestSuite, FormatError> {
        let mut all = TestSuite::default();
        for p in &self.manifest.tests {
            all.extend(formats::load_tests(&self.resolve(p))?);
        }
        Ok(all)
    }

    pub fn dse(&self) -> Result<formats::DseRun, FormatError> {
        match &self.manifest.dse {
            None => Err(FormatError::invalid(&self.path, "no `dse` settings file in the manifest")),
            Some(p) => formats::load_dse(&self.resolve(p)),
        }
    }

    /// A preset name, a named config from the manifest, or a config file path.
    pub fn config(&self, name: &str) -> Result<ProcessorConfig, FormatError> {
        if let Some(c) = ProcessorConfig::preset(name) {
            return Ok(c);
        }
        let path = match self.manifest.configs.get(name) {
            Some(p) => self.resolve(p),
            None => PathBuf::from(name),
        };
        if !path.is_file() {
            return Err(FormatError::invalid(
                &self.path,
                format!("`{name}` is not a preset (small, large, giga), a named config or a file"),
            ));
        }
        formats::parse_config(&formats::read(&path)?, &path)
    }

    pub fn generation_config(&self) -> (GenerationConfig, u64) {
        let g = &self.manifest.generation;
        let d = GenerationConfig::default();
        let cfg = GenerationConfig {
            model: g.model.clone().unwrap_or(d.model),
            shots: d.shots,
            temperature: g.temperature.unwrap_or(d.temperature),
            max_feedback_rounds: g.feedback_rounds.unwrap_or(d.max_feedback_rounds),
            samples: g.samples.unwrap_or(d.samples),
            random_states: g.random_states.unwrap_or(d.random_states),
            retries: g.retries.unwrap_or(d.retries),
            prefilter: g.prefilter.unwrap_or(d.prefilter),
        };
        (cfg, g.seed.unwrap_or(0))
    }

    pub fn prompt_parts(&self) -> Result<PromptParts, FormatError> {
        let g = &self.manifest.generation;
        let text = |p: &Option<PathBuf>, default: &str| -> Result<String, FormatError> {
            match p {
                None => Ok(default.to_string()),
                Some(p) => formats::read(&self.resolve(p)),
            }
        };
        let shots = match &g.shots {
            None => data::shots(),
            Some(p) => {
                let p = self.resolve(p);
                data::parse_shots(&formats::read(&p)?, &p)?
            }
        };
        Ok(PromptParts { template: text(&g.template, data::PROMPT)?, regulations: text(&g.regulations, data::REGULATIONS)?, shots })
    }
}

pub fn assemble_file(path: &Path, isa: &Isa) -> Result<Program, FormatError> {
    assemble(&formats::read(path)?, isa).map_err(|e| FormatError::invalid(path, e.to_string()))
}
