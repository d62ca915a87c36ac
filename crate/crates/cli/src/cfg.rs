//! Run-config loading: strict key/value sections shared with the material
//! file format. Unknown sections and keys are rejected.

use std::path::{Path, PathBuf};

use sqzforge_core::config::{parse_config, RawConfig, SectionReader};
use sqzforge_core::material::{CrossSection, LayerStack, MaterialDb};
use sqzforge_core::phasematch::DEFAULT_SIDEWALL_DEG;
use sqzforge_core::{Error, Result};

pub struct RunConfig {
    pub raw: RawConfig,
    pub materials: MaterialDb,
    pub stack: LayerStack,
    pub geometry: CrossSection,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let raw = parse_config(&text)?;

        // one config file may serve several commands; sections outside the
        // known set are still rejected
        for section in &raw.sections {
            let name = section.name.as_str();
            let known = name.starts_with("material.")
                || matches!(name, "run" | "stack" | "geometry" | "modes" | "cavity");
            if !known {
                return Err(Error::ConfigAt {
                    line: section.line,
                    msg: format!("unknown section [{name}]"),
                });
            }
        }

        // run section
        let (out_dir, seed, jobs, material_file) = match raw.section("run") {
            Some(s) => {
                let mut r = SectionReader::new(s);
                let out = r.str_or("out_dir", "out");
                let seed = r.u64_or("seed", 1)?;
                let jobs = r.u64_or("jobs", 0)? as usize;
                let mat = r.str_or("material_file", "");
                r.finish()?;
                (out, seed, if jobs == 0 { None } else { Some(jobs) }, mat)
            }
            None => ("out".to_string(), 1, None, String::new()),
        };

        // materials: embedded defaults, a file, or inline [material.*] sections
        let materials = if !material_file.is_empty() {
            let mat_path = path.parent().unwrap_or(Path::new(".")).join(&material_file);
            let text = std::fs::read_to_string(&mat_path).map_err(|e| {
                Error::Config(format!("cannot read material file {}: {e}", mat_path.display()))
            })?;
            MaterialDb::from_text(&text)?
        } else if raw.sections_with_prefix("material.").next().is_some() {
            MaterialDb::from_raw(&raw)?
        } else {
            MaterialDb::builtin()
        };

        let stack = match raw.section("stack") {
            Some(s) => {
                let mut r = SectionReader::new(s);
                let stack = LayerStack::from_section(&mut r)?;
                r.finish()?;
                stack
            }
            None => LayerStack::default(),
        };
        // referenced materials must exist
        for id in [&stack.substrate, &stack.film, &stack.cladding] {
            materials.get(id)?;
        }

        let geometry = match raw.section("geometry") {
            Some(s) => {
                let mut r = SectionReader::new(s);
                let width = r.f64_or("top_width_um", 1.02)?;
                let angle = r.f64_or("sidewall_angle_deg", DEFAULT_SIDEWALL_DEG)?;
                r.finish()?;
                CrossSection::new(width, angle, stack.clone())?
            }
            None => CrossSection::new(1.02, DEFAULT_SIDEWALL_DEG, stack.clone())?,
        };

        Ok(RunConfig {
            raw,
            materials,
            stack,
            geometry,
            out_dir: PathBuf::from(out_dir),
            seed,
            jobs,
        })
    }
}

/// `start:step:count` width specification.
pub fn parse_widths(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "width spec `{spec}` must be start:step:count"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad width start `{}`", parts[0])))?;
    let step: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad width step `{}`", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad width count `{}`", parts[2])))?;
    if count == 0 || (count > 1 && step <= 0.0) {
        return Err(Error::Config("width spec needs count >= 1 and positive step".into()));
    }
    Ok((0..count).map(|i| start + step * i as f64).collect())
}
