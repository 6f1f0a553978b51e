//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, lists are comma separated.
//! Radii and `k_cap` are in units of `κ`, energies in the units of `κ²`
//! implied by `box_length`.

use std::collections::HashMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{CutoffKind, CutoffScheme, ModelParams};

pub const KEYS: [&str; 21] = [
    "box_length",
    "impurity_mass",
    "binding_energy",
    "fermi_energy",
    "cutoff_kind",
    "cutoff_radius",
    "basis_radius",
    "k_cap",
    "tolerance",
    "twobody_tolerance",
    "twobody_ladder",
    "e_b_grid",
    "sharp_ladder",
    "gaussian_ladder",
    "molecule_ladder",
    "delta_ladder",
    "suite_models",
    "suite_energies",
    "seed",
    "threads",
    "output",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ModelParams,
    pub cutoff_kind: CutoffKind,
    pub cutoff_radius: f64,
    pub basis_radius: f64,
    pub k_cap: f64,
    /// Certified accuracy requested from renormalized sums.
    pub tolerance: f64,
    pub twobody_tolerance: f64,
    pub twobody_ladder: Vec<f64>,
    pub e_b_grid: Vec<f64>,
    pub sharp_ladder: Vec<f64>,
    pub gaussian_ladder: Vec<f64>,
    pub molecule_ladder: Vec<f64>,
    pub delta_ladder: Vec<f64>,
    pub suite_models: usize,
    pub suite_energies: usize,
    pub seed: u64,
    /// Zero means one worker per core.
    pub threads: usize,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::unit_lattice(1.0, -1.0, 0.0).expect("default parameters are valid"),
            cutoff_kind: CutoffKind::Sharp,
            cutoff_radius: 8.0,
            basis_radius: 8.0,
            k_cap: 4.0,
            tolerance: crate::molecule::G_TOL,
            twobody_tolerance: 1e-10,
            twobody_ladder: vec![4.0, 8.0, 16.0],
            e_b_grid: vec![-0.25, -1.0, -4.0, -16.0],
            sharp_ladder: crate::convergence::SHARP_LADDER.to_vec(),
            gaussian_ladder: crate::convergence::GAUSSIAN_LADDER.to_vec(),
            molecule_ladder: crate::molecule::DEFAULT_LADDER.to_vec(),
            delta_ladder: crate::delta::DEFAULT_LADDER.to_vec(),
            suite_models: 100,
            suite_energies: 20,
            seed: crate::suite::DEFAULT_SEED,
            threads: 0,
            output: None,
        }
    }
}

impl RunConfig {
    /// The cutoff scheme named by `cutoff_kind` and `cutoff_radius`.
    pub fn scheme(&self) -> Result<CutoffScheme> {
        CutoffScheme::new(self.cutoff_kind, self.cutoff_radius * self.params.kappa, self.params.kappa)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: HashMap<String, (usize, String)> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(bad(line, format!("expected `key = value`, got `{content}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(bad(line, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(bad(line, format!("`{key}` has no value")));
            }
            if let Some((first, _)) = seen.get(key) {
                return Err(bad(line, format!("`{key}` already set on line {first}")));
            }
            seen.insert(key.to_string(), (line, value.to_string()));
        }
        let f = Fields(seen);
        let d = RunConfig::default();

        let box_length = f.positive("box_length")?.unwrap_or(d.params.box_length);
        let impurity_mass = f.positive("impurity_mass")?.unwrap_or(d.params.impurity_mass);
        let binding_energy = f.negative("binding_energy")?.unwrap_or(d.params.binding_energy);
        let fermi_energy = f.real("fermi_energy")?.unwrap_or(d.params.fermi_energy);
        let params = ModelParams::new(box_length, impurity_mass, binding_energy, fermi_energy)?;

        let cutoff_kind = match f.get("cutoff_kind") {
            Some((line, v)) => CutoffKind::parse(v)
                .ok_or_else(|| bad(line, format!("cutoff_kind must be sharp, gaussian or beta_only, got `{v}`")))?,
            None => d.cutoff_kind,
        };
        let cutoff_radius = f.positive("cutoff_radius")?.unwrap_or(d.cutoff_radius);
        let basis_radius = f.positive("basis_radius")?.unwrap_or(cutoff_radius);
        if basis_radius < cutoff_radius {
            let line = f.get("basis_radius").map_or(0, |(l, _)| l);
            return Err(bad(
                line,
                format!("basis_radius {basis_radius} is smaller than cutoff_radius {cutoff_radius}"),
            ));
        }

        let config = RunConfig {
            params,
            cutoff_kind,
            cutoff_radius,
            basis_radius,
            k_cap: f.positive("k_cap")?.unwrap_or(d.k_cap),
            tolerance: f.positive("tolerance")?.unwrap_or(d.tolerance),
            twobody_tolerance: f.positive("twobody_tolerance")?.unwrap_or(d.twobody_tolerance),
            twobody_ladder: f.list("twobody_ladder", |x| x > 0.0)?.unwrap_or(d.twobody_ladder),
            e_b_grid: f.list("e_b_grid", |x| x < 0.0)?.unwrap_or(d.e_b_grid),
            sharp_ladder: f.list("sharp_ladder", |x| x > 0.0)?.unwrap_or(d.sharp_ladder),
            gaussian_ladder: f.list("gaussian_ladder", |x| x > 0.0)?.unwrap_or(d.gaussian_ladder),
            molecule_ladder: f.list("molecule_ladder", |x| x > 0.0)?.unwrap_or(d.molecule_ladder),
            delta_ladder: f.list("delta_ladder", |x| x > 0.0)?.unwrap_or(d.delta_ladder),
            suite_models: f.integer("suite_models")?.unwrap_or(d.suite_models as u64) as usize,
            suite_energies: f.integer("suite_energies")?.unwrap_or(d.suite_energies as u64) as usize,
            seed: f.integer("seed")?.unwrap_or(d.seed),
            threads: f.integer("threads")?.unwrap_or(0) as usize,
            output: f.get("output").map(|(_, v)| PathBuf::from(v)),
        };
        config.scheme()?;
        Ok(config)
    }
}

fn bad(line: usize, message: String) -> Error {
    Error::Config { line, message }
}

struct Fields(HashMap<String, (usize, String)>);

impl Fields {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.0.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn number(line: usize, key: &str, v: &str) -> Result<f64> {
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(bad(line, format!("`{key}` expects a finite number, got `{v}`"))),
        }
    }

    fn checked(&self, key: &str, ok: impl Fn(f64) -> bool, what: &str) -> Result<Option<f64>> {
        let Some((line, v)) = self.get(key) else {
            return Ok(None);
        };
        let x = Self::number(line, key, v)?;
        if !ok(x) {
            return Err(bad(line, format!("`{key}` must be {what}, got {x}")));
        }
        Ok(Some(x))
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        self.checked(key, |_| true, "finite")
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        self.checked(key, |x| x > 0.0, "positive")
    }

    fn negative(&self, key: &str) -> Result<Option<f64>> {
        self.checked(key, |x| x < 0.0, "negative")
    }

    fn integer(&self, key: &str) -> Result<Option<u64>> {
        let Some((line, v)) = self.get(key) else {
            return Ok(None);
        };
        v.parse::<u64>()
            .map(Some)
            .map_err(|_| bad(line, format!("`{key}` expects a nonnegative integer, got `{v}`")))
    }

    fn list(&self, key: &str, ok: impl Fn(f64) -> bool) -> Result<Option<Vec<f64>>> {
        let Some((line, v)) = self.get(key) else {
            return Ok(None);
        };
        let values = v
            .split(',')
            .map(|s| Self::number(line, key, s.trim()))
            .collect::<Result<Vec<_>>>()?;
        if let Some(x) = values.iter().find(|&&x| !ok(x)) {
            return Err(bad(line, format!("`{key}` has an out-of-range entry {x}")));
        }
        Ok(Some(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn reads_values_and_lists() {
        let c = RunConfig::parse(
            "binding_energy = -4   # κ² units\ncutoff_kind = gaussian\nbasis_radius = 12\ne_b_grid = -1, -2\n",
        )
        .unwrap();
        assert_eq!(c.params.binding_energy, -4.0);
        assert_eq!(c.cutoff_kind, CutoffKind::Gaussian);
        assert_eq!(c.basis_radius, 12.0);
        assert_eq!(c.e_b_grid, vec![-1.0, -2.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |text: &str| match RunConfig::parse(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line_of("seed = 1\nnonsense\n"), 2);
        assert_eq!(line_of("\n\nbinding_energy = 1\n"), 3);
        assert_eq!(line_of("colour = red\n"), 1);
        assert_eq!(line_of("seed = 1\nseed = 2\n"), 2);
        assert_eq!(line_of("cutoff_radius = 8\nbasis_radius = 4\n"), 2);
        assert_eq!(line_of("k_cap = -1\n"), 1);
    }
}
