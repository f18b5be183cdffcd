//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use bguide::design::{default_step, InvisibilitySearch};
use bguide::geometry::{build_branched_guide, build_straight_guide, BranchedGuide, Domain, DEFAULT_MODES, DEFAULT_XMAX, DEFAULT_Y_CUT};
use bguide::mesh::{Method, Numerics};
use bguide::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    /// Central branch width `ℓ`.
    pub ell: f64,
    /// Central branch top `L`.
    pub height: f64,
    /// Side branch top `γ`; side branches exist only when set.
    pub gamma: Option<f64>,
    /// Side branch centres `±ϑ`.
    pub theta: f64,
    pub side_width: f64,
    pub xmax: f64,
    pub y_cut: f64,
    /// Plain strip: no branch at all.
    pub straight: bool,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { ell: 1.0, height: 3.3649, gamma: None, theta: 1.5, side_width: 1.0, xmax: DEFAULT_XMAX, y_cut: DEFAULT_Y_CUT, straight: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub k: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics { k: 0.8 * PI }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    pub h: f64,
    /// Transverse modes kept at each port.
    pub modes: usize,
    pub method: Method,
    /// Condition estimate above which a trapped mode is suspected.
    pub trapped_threshold: f64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let n = Numerics::default();
        NumericsConfig { h: n.h, modes: DEFAULT_MODES, method: n.method, trapped_threshold: n.trapped_threshold, threads: 0 }
    }
}

/// Window in `L` for sweeps and asymptotic tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub from: f64,
    pub to: f64,
    /// Defaults to `π/(50k)`.
    pub step: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { from: 2.0, to: 10.0, step: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub height_window: (f64, f64),
    /// Window in `L` of the second stage of the invisibility search.
    pub invisible_height_window: (f64, f64),
    pub gamma_window: (f64, f64),
    pub count: usize,
    pub tol: f64,
    pub joint_refine: bool,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig { height_window: (2.0, 10.0), invisible_height_window: (5.0, 10.0), gamma_window: (1.0, 10.0), count: 1, tol: 1e-3, joint_refine: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    /// Table destination; stdout when unset.
    pub csv: Option<PathBuf>,
    /// Nodal field dump.
    pub field: Option<PathBuf>,
    /// Record destination; stdout when unset.
    pub record: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub geometry: Geometry,
    pub physics: Physics,
    pub numerics: NumericsConfig,
    pub sweep: SweepConfig,
    pub design: DesignConfig,
    pub output: Output,
}

fn check(ok: bool, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(msg.into()))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Validation(format!("bad config {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Validation(format!("cannot encode config: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))
    }

    /// Checks the parameters every command relies on. Module-level
    /// preconditions are checked again when the geometry is built.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        check(self.physics.k > 0.0 && self.physics.k < PI, format!("k must lie in (0, π), got {}", self.physics.k))?;
        check(g.ell > 0.0 && g.ell.is_finite(), format!("ℓ must be positive, got {}", g.ell))?;
        check(g.height > 1.0 && g.height.is_finite(), format!("L must exceed 1, got {}", g.height))?;
        check(g.xmax > 0.0 && g.xmax.is_finite(), "xmax must be positive")?;
        check(g.y_cut > 1.0 && g.y_cut.is_finite(), "y_cut must exceed 1")?;
        if let Some(gamma) = g.gamma {
            check(gamma > 1.0 && gamma.is_finite(), format!("γ must exceed 1, got {gamma}"))?;
        }
        check(self.numerics.modes >= 1, "at least one mode per port is required")?;
        self.numerics().validate()?;
        if let Some(s) = self.sweep.step {
            check(s > 0.0 && s.is_finite(), "sweep step must be positive")?;
        }
        check(self.sweep.from.is_finite() && self.sweep.to.is_finite(), "sweep window must be finite")?;
        check(self.design.tol > 0.0, "design tolerance must be positive")?;
        Ok(())
    }

    pub fn numerics(&self) -> Numerics {
        Numerics { h: self.numerics.h, method: self.numerics.method, trapped_threshold: self.numerics.trapped_threshold }
    }

    /// The full truncated domain of the run.
    pub fn domain(&self) -> Result<Domain> {
        if self.geometry.straight {
            build_straight_guide(self.physics.k, self.geometry.xmax, self.numerics.modes)
        } else {
            build_branched_guide(&self.guide())
        }
    }

    pub fn guide(&self) -> BranchedGuide {
        let g = &self.geometry;
        let mut b = BranchedGuide::new(g.ell, g.height, self.physics.k);
        b.xmax = g.xmax;
        b.modes = self.numerics.modes;
        if let Some(gamma) = g.gamma {
            b = b.with_side_branch(g.theta, g.side_width, gamma);
        }
        b
    }

    /// Heights of the sweep window; empty when `from ≥ to`.
    pub fn sweep_heights(&self) -> Vec<f64> {
        let s = &self.sweep;
        if s.to.partial_cmp(&s.from) != Some(std::cmp::Ordering::Greater) {
            return Vec::new();
        }
        let step = s.step.unwrap_or_else(|| default_step(self.physics.k));
        let n = ((s.to - s.from) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| s.from + i as f64 * step).collect()
    }

    pub fn invisibility(&self) -> InvisibilitySearch {
        let g = &self.geometry;
        InvisibilitySearch {
            ell: g.ell,
            k: self.physics.k,
            offset: g.theta,
            width: g.side_width,
            gamma_window: self.design.gamma_window,
            height_window: self.design.invisible_height_window,
            tol: self.design.tol,
            joint_refine: self.design.joint_refine,
        }
    }
}
