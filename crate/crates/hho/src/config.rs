//! Flat TOML run configuration.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use hho_core::convergence::{MeshFamily, MeshKind};
use hho_core::localops::{BcMode, Scheme, StabScaling, Variant};
use hho_core::manufactured::ManufacturedCase;
use hho_core::solve::{SolveConfig, SolveMethod};
use serde::{Deserialize, Serialize};

use crate::error::{HhoError, Result};

pub const MAX_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[value(rename_all = "UPPER")]
pub enum VariantName {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BcName {
    Strong,
    Nitsche,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MeshKindName {
    Rect,
    Tri,
    Voronoi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingName {
    Plain,
    K2All,
    K2Hm1Only,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverName {
    Direct,
    Cg,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::A => Variant::A,
            VariantName::B => Variant::B,
            VariantName::C => Variant::C,
        }
    }
}

impl From<BcName> for BcMode {
    fn from(b: BcName) -> Self {
        match b {
            BcName::Strong => BcMode::Strong,
            BcName::Nitsche => BcMode::Nitsche,
        }
    }
}

impl From<ScalingName> for StabScaling {
    fn from(s: ScalingName) -> Self {
        match s {
            ScalingName::Plain => StabScaling::Plain,
            ScalingName::K2All => StabScaling::K2All,
            ScalingName::K2Hm1Only => StabScaling::K2Hm1Only,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: VariantName,
    pub k: usize,
    pub bc: BcName,
    pub mesh_kind: MeshKindName,
    /// Squares per side (rect, tri) or number of cells (voronoi).
    pub mesh_n: usize,
    pub mesh_seed: u64,
    pub lloyd_iters: usize,
    /// Mesh JSON file used by `solve` instead of a generated mesh.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh_file: Option<PathBuf>,
    /// Resolutions of the refinement family (`convergence`, `compare`).
    pub levels: Vec<usize>,
    /// 0: polynomial patch test of degree k+2; 1: sin²; 2: sin² + Gaussian.
    pub case: u32,
    pub scaling: ScalingName,
    pub rhs_extra_degree: usize,
    pub solver: SolverName,
    pub cg_tol: f64,
    pub max_iters: usize,
    pub output_dir: PathBuf,
    /// 0 lets the thread pool decide.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: VariantName::A,
            k: 1,
            bc: BcName::Strong,
            mesh_kind: MeshKindName::Rect,
            mesh_n: 16,
            mesh_seed: 42,
            lloyd_iters: 20,
            mesh_file: None,
            levels: vec![8, 16, 32, 64],
            case: 1,
            scaling: ScalingName::K2All,
            rhs_extra_degree: 2,
            solver: SolverName::Direct,
            cg_tol: 1e-12,
            max_iters: 100_000,
            output_dir: PathBuf::from("out"),
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HhoError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HhoError::Config(m));
        if self.k > MAX_K {
            return bad(format!("k = {} outside [0, {MAX_K}]", self.k));
        }
        if self.bc == BcName::Nitsche && self.variant == VariantName::C {
            return bad("variant C does not support the nitsche boundary mode".into());
        }
        if self.mesh_n == 0 || self.levels.contains(&0) {
            return bad("mesh resolutions must be positive".into());
        }
        if ManufacturedCase::from_id(self.case).is_none() {
            return bad(format!("unknown manufactured case {}", self.case));
        }
        if !(self.cg_tol > 0.0) {
            return bad(format!("cg_tol must be positive, got {}", self.cg_tol));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        Ok(())
    }

    pub fn scheme(&self) -> Scheme {
        let mut s = Scheme::new(self.variant.into(), self.k, self.bc.into());
        s.scaling = self.scaling.into();
        s.rhs_extra_degree = self.rhs_extra_degree;
        s
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            method: match self.solver {
                SolverName::Direct => SolveMethod::Direct,
                SolverName::Cg => SolveMethod::ConjugateGradient,
            },
            cg_tol: self.cg_tol,
            max_iters: self.max_iters,
        }
    }

    pub fn case(&self) -> ManufacturedCase {
        ManufacturedCase::from_id(self.case).expect("validated")
    }

    pub fn mesh_kind(&self) -> MeshKind {
        match self.mesh_kind {
            MeshKindName::Rect => MeshKind::Rect,
            MeshKindName::Tri => MeshKind::Tri,
            MeshKindName::Voronoi => MeshKind::Voronoi {
                seed: self.mesh_seed,
                lloyd_iters: self.lloyd_iters,
            },
        }
    }

    pub fn family(&self) -> MeshFamily {
        MeshFamily {
            kind: self.mesh_kind(),
            levels: self.levels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml("variant = \"B\"\nk = 3\nbc = \"nitsche\"\nscaling = \"k2-hm1-only\"\n").unwrap();
        assert_eq!(c.variant, VariantName::B);
        assert_eq!(c.scheme().scaling, StabScaling::K2Hm1Only);
        assert_eq!(c.mesh_n, 16);
    }

    #[test]
    fn invalid_settings() {
        assert!(RunConfig::from_toml("unknown_key = 1").is_err());
        let mut c = RunConfig {
            k: 6,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.k = 1;
        c.variant = VariantName::C;
        c.bc = BcName::Nitsche;
        assert!(c.validate().is_err());
        c.bc = BcName::Strong;
        c.case = 9;
        assert!(c.validate().is_err());
    }
}
