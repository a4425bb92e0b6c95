//! Experiment configuration: one flat JSON document per run.

use std::path::{Path, PathBuf};

use phicgc::problems::{heat1d, heat3d, HeatProblem};
use phicgc::transfer::TransferMethod;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Heat1d,
    Heat3d,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferChoice {
    Linear,
    #[default]
    CubicSpline,
}

impl TransferChoice {
    pub fn method(self) -> TransferMethod {
        match self {
            TransferChoice::Linear => TransferMethod::Linear,
            TransferChoice::CubicSpline => TransferMethod::CubicSpline,
        }
    }
}

/// One experiment. Omitted optional fields fall back to the problem's
/// defaults (T, rel_tol) or the solver's (krylov_max_dim).
#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub extents: Vec<usize>,
    /// End of the integration interval; defaults to the problem's T.
    #[serde(rename = "T", alias = "t", default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    /// Grid levels for the correction run (1 = baseline only).
    pub levels: usize,
    #[serde(default)]
    pub transfer_method: TransferChoice,
    #[serde(default)]
    pub krylov_max_dim: Option<usize>,
    /// Recorded for provenance; the solver itself is deterministic and the
    /// randomized checks live in `phicgc verify`.
    #[serde(default)]
    pub seed: u64,
    /// Where report.csv / report.md go; defaults to the current directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if cfg.levels == 0 {
        return Err("levels must be ≥ 1".into());
    }
    let expected_dims = match cfg.problem {
        ProblemKind::Heat1d => 1,
        ProblemKind::Heat3d => 3,
    };
    if cfg.extents.len() != expected_dims {
        return Err(format!(
            "extents has {} entries, problem needs {expected_dims}",
            cfg.extents.len()
        ));
    }
    if let Some(t) = cfg.t_end {
        if !(t.is_finite() && t >= 0.0) {
            return Err(format!("T must be a finite nonnegative real, got {t}"));
        }
    }
    if let Some(tol) = cfg.rel_tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(format!("rel_tol must be a finite positive real, got {tol}"));
        }
    }
    if let Some(m) = cfg.krylov_max_dim {
        if m < 2 {
            return Err(format!("krylov_max_dim must be ≥ 2, got {m}"));
        }
    }
    Ok(cfg)
}

/// Build the configured problem, applying the T / rel_tol overrides.
/// Constructor failures (odd or too-small extents) are config errors.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<HeatProblem, String> {
    let mut p = match cfg.problem {
        ProblemKind::Heat1d => heat1d(cfg.extents[0]),
        ProblemKind::Heat3d => heat3d(cfg.extents[0], cfg.extents[1], cfg.extents[2]),
    }
    .map_err(|e| e.to_string())?;
    if let Some(t) = cfg.t_end {
        p.t_end = t;
    }
    if let Some(tol) = cfg.rel_tol {
        p.rel_tol = tol;
    }
    Ok(p)
}

/// Deterministic output stem, e.g. `heat1d-1024-L2` or `heat3d-80x88x96-L3`.
pub fn output_stem(cfg: &ExperimentConfig) -> String {
    let kind = match cfg.problem {
        ProblemKind::Heat1d => "heat1d",
        ProblemKind::Heat3d => "heat3d",
    };
    let ext = cfg
        .extents
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("x");
    format!("{kind}-{ext}-L{}", cfg.levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_minimal_config() {
        let f = write_tmp(r#"{"problem":"heat1d","extents":[64],"levels":2}"#);
        let cfg = load(f.path()).unwrap();
        assert_eq!(cfg.extents, vec![64]);
        assert!(cfg.t_end.is_none());
        assert_eq!(output_stem(&cfg), "heat1d-64-L2");
    }

    #[test]
    fn accepts_both_t_spellings() {
        for key in ["T", "t"] {
            let f = write_tmp(&format!(
                r#"{{"problem":"heat1d","extents":[64],"levels":1,"{key}":0.5}}"#
            ));
            assert_eq!(load(f.path()).unwrap().t_end, Some(0.5));
        }
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        let bad = [
            r#"{"problem":"heat1d","extents":[64],"levels":2,"bogus":1}"#,
            r#"{"problem":"heat1d","extents":[64],"levels":0}"#,
            r#"{"problem":"heat3d","extents":[64],"levels":2}"#,
            r#"{"problem":"heat1d","extents":[64],"levels":2,"rel_tol":-1.0}"#,
        ];
        for text in bad {
            let f = write_tmp(text);
            assert!(load(f.path()).is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn problem_overrides_apply() {
        let f = write_tmp(
            r#"{"problem":"heat1d","extents":[64],"levels":2,"T":0.5,"rel_tol":1e-4}"#,
        );
        let cfg = load(f.path()).unwrap();
        let p = build_problem(&cfg).unwrap();
        assert_eq!(p.t_end, 0.5);
        assert_eq!(p.rel_tol, 1e-4);
    }

    #[test]
    fn odd_extent_is_config_error() {
        let f = write_tmp(r#"{"problem":"heat1d","extents":[63],"levels":2}"#);
        let cfg = load(f.path()).unwrap();
        assert!(build_problem(&cfg).is_err());
    }
}
