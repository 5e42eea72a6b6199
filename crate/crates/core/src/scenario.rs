//! Declarative run description and its INI-style config file format.
//!
//! The file is a flat key/value document in sections:
//!
//! ```ini
//! [geometry]
//! mode = dns            ; or homogenized
//! width = 10
//! height = 4
//! block_origin_x = 3
//! block_origin_y = 0
//! block_cols = 4
//! block_rows = 4
//! radius = 0.25
//! rotation = 0.0
//! target_h = 0.125
//! rve_h = 0.125
//!
//! [fluid]
//! model = newtonian     ; or bingham (mu0, tau0, m)
//! mu = 1.0
//!
//! [bc]
//! inlet_velocity = 1.0
//! outlet_pressure = 0.0
//!
//! [interface]
//! beta = 0.0            ; or from_boundary_layer
//!
//! [output]
//! dir = out
//! profile_mid = 0 2 10 2 pressure 200
//! ```
//!
//! Unknown keys are rejected.

use crate::constitutive::FluidLaw;
use crate::error::{Error, Result};
use crate::mesh::{ObstacleGrid, Point};
use crate::solver::NewtonConfig;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dns,
    Homogenized,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Dns => "dns",
            Mode::Homogenized => "homogenized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSpec {
    Value(f64),
    FromBoundaryLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileField {
    VelocityX,
    VelocityY,
    Pressure,
    MacroPressure,
    ReconstructedPressure,
}

impl ProfileField {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileField::VelocityX => "ux",
            ProfileField::VelocityY => "uy",
            ProfileField::Pressure => "pressure",
            ProfileField::MacroPressure => "macro_pressure",
            ProfileField::ReconstructedPressure => "reconstructed_pressure",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "ux" => ProfileField::VelocityX,
            "uy" => ProfileField::VelocityY,
            "pressure" => ProfileField::Pressure,
            "macro_pressure" => ProfileField::MacroPressure,
            "reconstructed_pressure" => ProfileField::ReconstructedPressure,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ProfileRequest {
    pub name: String,
    pub start: Point,
    pub end: Point,
    pub field: ProfileField,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub mode: Mode,
    pub width: f64,
    pub height: f64,
    pub grid: ObstacleGrid,
    pub target_h: f64,
    /// Cell-mesh resolution for the homogenized law.
    pub rve_h: f64,
    pub law: FluidLaw,
    /// Prescribed inward normal velocity at the inlet (`u . n = -û_n`).
    pub inlet_velocity: f64,
    pub outlet_pressure: f64,
    pub body_force: [f64; 2],
    pub beta: BetaSpec,
    pub bl_free_cells: usize,
    pub bl_h: f64,
    pub newton: NewtonConfig,
    pub output_dir: Option<PathBuf>,
    pub profiles: Vec<ProfileRequest>,
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Scenario::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Scenario> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        let mut section = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_owned();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", ln + 1)))?;
            let full = if section.is_empty() {
                key.trim().to_owned()
            } else {
                format!("{section}.{}", key.trim())
            };
            if kv.insert(full.clone(), value.trim().to_owned()).is_some() {
                return Err(Error::Config(format!("duplicate key '{full}'")));
            }
        }
        Scenario::from_map(kv)
    }

    fn from_map(mut kv: BTreeMap<String, String>) -> Result<Scenario> {
        let mut take = |key: &str| kv.remove(key);
        let req = |opt: Option<String>, key: &str| {
            opt.ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
        };
        let num = |s: String, key: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Config(format!("key '{key}': expected a number, got '{s}'")))
        };
        let int = |s: String, key: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Config(format!("key '{key}': expected an integer, got '{s}'")))
        };

        let mode = match req(take("geometry.mode"), "geometry.mode")?.as_str() {
            "dns" => Mode::Dns,
            "homogenized" => Mode::Homogenized,
            other => {
                return Err(Error::Config(format!(
                    "geometry.mode must be 'dns' or 'homogenized', got '{other}'"
                )))
            }
        };
        let width = num(req(take("geometry.width"), "geometry.width")?, "geometry.width")?;
        let height = num(req(take("geometry.height"), "geometry.height")?, "geometry.height")?;
        let grid = ObstacleGrid {
            cols: int(req(take("geometry.block_cols"), "geometry.block_cols")?, "geometry.block_cols")?,
            rows: int(req(take("geometry.block_rows"), "geometry.block_rows")?, "geometry.block_rows")?,
            cell_size: match take("geometry.cell_size") {
                Some(s) => num(s, "geometry.cell_size")?,
                None => 1.0,
            },
            radius: num(req(take("geometry.radius"), "geometry.radius")?, "geometry.radius")?,
            origin: Point::new(
                num(req(take("geometry.block_origin_x"), "geometry.block_origin_x")?, "geometry.block_origin_x")?,
                num(req(take("geometry.block_origin_y"), "geometry.block_origin_y")?, "geometry.block_origin_y")?,
            ),
            rotation_angle: match take("geometry.rotation") {
                Some(s) => num(s, "geometry.rotation")?,
                None => 0.0,
            },
        };
        let target_h = num(req(take("geometry.target_h"), "geometry.target_h")?, "geometry.target_h")?;
        let rve_h = match take("geometry.rve_h") {
            Some(s) => num(s, "geometry.rve_h")?,
            None => 0.125,
        };

        let law = match req(take("fluid.model"), "fluid.model")?.as_str() {
            "newtonian" => FluidLaw::Newtonian {
                mu: num(req(take("fluid.mu"), "fluid.mu")?, "fluid.mu")?,
            },
            "bingham" => FluidLaw::Bingham {
                mu0: num(req(take("fluid.mu0"), "fluid.mu0")?, "fluid.mu0")?,
                tau0: num(req(take("fluid.tau0"), "fluid.tau0")?, "fluid.tau0")?,
                m: num(req(take("fluid.m"), "fluid.m")?, "fluid.m")?,
            },
            other => {
                return Err(Error::Config(format!(
                    "fluid.model must be 'newtonian' or 'bingham', got '{other}'"
                )))
            }
        };
        law.validate().map_err(Error::Config)?;

        let inlet_velocity =
            num(req(take("bc.inlet_velocity"), "bc.inlet_velocity")?, "bc.inlet_velocity")?;
        let outlet_pressure = match take("bc.outlet_pressure") {
            Some(s) => num(s, "bc.outlet_pressure")?,
            None => 0.0,
        };
        let body_force = [
            match take("bc.body_force_x") {
                Some(s) => num(s, "bc.body_force_x")?,
                None => 0.0,
            },
            match take("bc.body_force_y") {
                Some(s) => num(s, "bc.body_force_y")?,
                None => 0.0,
            },
        ];

        let beta = match take("interface.beta") {
            None => BetaSpec::Value(0.0),
            Some(s) if s == "from_boundary_layer" => BetaSpec::FromBoundaryLayer,
            Some(s) => BetaSpec::Value(num(s, "interface.beta")?),
        };
        let bl_free_cells = match take("interface.bl_free_cells") {
            Some(s) => int(s, "interface.bl_free_cells")?,
            None => 4,
        };
        let bl_h = match take("interface.bl_h") {
            Some(s) => num(s, "interface.bl_h")?,
            None => 0.25,
        };

        let mut newton = NewtonConfig::default();
        if let Some(s) = take("solver.tol_rel") {
            newton.tol_rel = num(s, "solver.tol_rel")?;
        }
        if let Some(s) = take("solver.tol_abs") {
            newton.tol_abs = num(s, "solver.tol_abs")?;
        }
        if let Some(s) = take("solver.max_newton") {
            newton.max_iter = int(s, "solver.max_newton")?;
        }
        if let Some(s) = take("solver.sigma") {
            newton.sigma = num(s, "solver.sigma")?;
        }
        if let Some(s) = take("solver.rho_ls") {
            newton.backtrack = num(s, "solver.rho_ls")?;
        }

        let output_dir = take("output.dir").map(PathBuf::from);
        let mut profiles = Vec::new();
        let profile_keys: Vec<String> = kv
            .keys()
            .filter(|k| k.starts_with("output.profile_"))
            .cloned()
            .collect();
        for key in profile_keys {
            let value = kv.remove(&key).unwrap();
            let name = key.trim_start_matches("output.profile_").to_owned();
            let toks: Vec<&str> = value.split_whitespace().collect();
            if toks.len() != 6 {
                return Err(Error::Config(format!(
                    "key '{key}': expected 'x0 y0 x1 y1 field samples'"
                )));
            }
            let c: Vec<f64> = toks[..4]
                .iter()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Config(format!("key '{key}': bad coordinate '{t}'")))
                })
                .collect::<Result<_>>()?;
            let field = ProfileField::from_name(toks[4]).ok_or_else(|| {
                Error::Config(format!("key '{key}': unknown field '{}'", toks[4]))
            })?;
            let samples: usize = toks[5]
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': bad sample count")))?;
            profiles.push(ProfileRequest {
                name,
                start: Point::new(c[0], c[1]),
                end: Point::new(c[2], c[3]),
                field,
                samples,
            });
        }

        if let Some(unknown) = kv.keys().next() {
            return Err(Error::Config(format!("unknown key '{unknown}'")));
        }

        let scenario = Scenario {
            mode,
            width,
            height,
            grid,
            target_h,
            rve_h,
            law,
            inlet_velocity,
            outlet_pressure,
            body_force,
            beta,
            bl_free_cells,
            bl_h,
            newton,
            output_dir,
            profiles,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.inlet_velocity.is_finite() {
            return Err(Error::Config("bc.inlet_velocity must be finite".into()));
        }
        if let BetaSpec::Value(b) = self.beta {
            if !(b >= 0.0) {
                return Err(Error::Config(format!(
                    "interface.beta must be non-negative, got {b}"
                )));
            }
        }
        if !(self.target_h > 0.0 && self.rve_h > 0.0) {
            return Err(Error::Config("mesh resolutions must be positive".into()));
        }
        if self.bl_free_cells == 0 {
            return Err(Error::Config("interface.bl_free_cells must be at least 1".into()));
        }
        self.grid
            .validate(self.width, self.height)
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Normalized config text (written next to run outputs so comparisons
    /// can recover the geometry).
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write;
        let _ = writeln!(s, "[geometry]");
        let _ = writeln!(s, "mode = {}", self.mode.name());
        let _ = writeln!(s, "width = {:.17e}", self.width);
        let _ = writeln!(s, "height = {:.17e}", self.height);
        let _ = writeln!(s, "block_origin_x = {:.17e}", self.grid.origin.x);
        let _ = writeln!(s, "block_origin_y = {:.17e}", self.grid.origin.y);
        let _ = writeln!(s, "block_cols = {}", self.grid.cols);
        let _ = writeln!(s, "block_rows = {}", self.grid.rows);
        let _ = writeln!(s, "cell_size = {:.17e}", self.grid.cell_size);
        let _ = writeln!(s, "radius = {:.17e}", self.grid.radius);
        let _ = writeln!(s, "rotation = {:.17e}", self.grid.rotation_angle);
        let _ = writeln!(s, "target_h = {:.17e}", self.target_h);
        let _ = writeln!(s, "rve_h = {:.17e}", self.rve_h);
        let _ = writeln!(s, "\n[fluid]");
        match self.law {
            FluidLaw::Newtonian { mu } => {
                let _ = writeln!(s, "model = newtonian");
                let _ = writeln!(s, "mu = {mu:.17e}");
            }
            FluidLaw::Bingham { mu0, tau0, m } => {
                let _ = writeln!(s, "model = bingham");
                let _ = writeln!(s, "mu0 = {mu0:.17e}");
                let _ = writeln!(s, "tau0 = {tau0:.17e}");
                let _ = writeln!(s, "m = {m:.17e}");
            }
        }
        let _ = writeln!(s, "\n[bc]");
        let _ = writeln!(s, "inlet_velocity = {:.17e}", self.inlet_velocity);
        let _ = writeln!(s, "outlet_pressure = {:.17e}", self.outlet_pressure);
        let _ = writeln!(s, "body_force_x = {:.17e}", self.body_force[0]);
        let _ = writeln!(s, "body_force_y = {:.17e}", self.body_force[1]);
        let _ = writeln!(s, "\n[interface]");
        match self.beta {
            BetaSpec::Value(b) => {
                let _ = writeln!(s, "beta = {b:.17e}");
            }
            BetaSpec::FromBoundaryLayer => {
                let _ = writeln!(s, "beta = from_boundary_layer");
            }
        }
        let _ = writeln!(s, "bl_free_cells = {}", self.bl_free_cells);
        let _ = writeln!(s, "bl_h = {:.17e}", self.bl_h);
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "tol_rel = {:.17e}", self.newton.tol_rel);
        let _ = writeln!(s, "tol_abs = {:.17e}", self.newton.tol_abs);
        let _ = writeln!(s, "max_newton = {}", self.newton.max_iter);
        let _ = writeln!(s, "sigma = {:.17e}", self.newton.sigma);
        let _ = writeln!(s, "rho_ls = {:.17e}", self.newton.backtrack);
        s
    }
}
