//! Experiment configuration files (TOML).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::Region;
use crate::error::{Error, Result};
use crate::grid::{coords, BBox, Point, SpaceParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Capacity,
    Fatness,
    Perfectness,
    Hardy,
    Mazya,
    Cover,
    Equivalence,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Capacity => "capacity",
            Command::Fatness => "fatness",
            Command::Perfectness => "perfectness",
            Command::Hardy => "hardy",
            Command::Mazya => "mazya",
            Command::Cover => "cover",
            Command::Equivalence => "equivalence",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Defaults to the volume of the unit ball.
    pub regularity: Option<f64>,
    pub bbox: BBox,
}

fn default_dim() -> usize {
    2
}

impl SpaceConfig {
    pub fn params(&self, spacing: f64) -> SpaceParams {
        let regularity = self.regularity.unwrap_or(match self.dim {
            3 => 4.0 * std::f64::consts::PI / 3.0,
            _ => std::f64::consts::PI,
        });
        SpaceParams { dim: self.dim, regularity, spacing, bbox: self.bbox }
    }
}

/// Which finite point set a command works on.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSource {
    /// Complement cells face-adjacent to the domain.
    #[default]
    Boundary,
    Complement,
    /// Cells of the domain region itself.
    Domain,
    /// Exact interval endpoints of a Cantor construction along `a`..`b`.
    CantorEndpoints {
        ratio: f64,
        depth: u32,
        #[serde(with = "coords")]
        a: Point,
        #[serde(with = "coords")]
        b: Point,
    },
    List {
        #[serde(with = "point_list")]
        points: Vec<Point>,
    },
}

mod point_list {
    use super::Point;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Point], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|p| if p[2] == 0.0 { p[..2].to_vec() } else { p.to_vec() }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Point>, D::Error> {
        Vec::<Vec<f64>>::deserialize(d)?
            .into_iter()
            .map(|v| match v.len() {
                2 => Ok([v[0], v[1], 0.0]),
                3 => Ok([v[0], v[1], v[2]]),
                n => Err(D::Error::custom(format!("expected 2 or 3 coordinates, got {n}"))),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    /// Defaults to the domain's complement, which suits zero-capacity
    /// probes with a small domain hole.
    pub plate: Option<Region>,
    /// Defaults to the domain.
    pub environment: Option<Region>,
    pub tol: Option<f64>,
    /// Also evaluate the content/capacity comparison at this exponent `s`
    /// for the plate inside `B(x, r)`.
    pub content: Option<ContentConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentConfig {
    pub s: f64,
    #[serde(with = "coords")]
    pub center: Point,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FatnessConfig {
    pub radii: Vec<f64>,
    pub centers: usize,
    /// Cells the scan centers are drawn from; the plate is always the
    /// whole complement.
    pub candidates: PointSource,
}

impl Default for FatnessConfig {
    fn default() -> Self {
        FatnessConfig { radii: vec![0.125, 0.25], centers: 6, candidates: PointSource::Boundary }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerfectnessConfig {
    pub source: PointSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusConfig {
    #[serde(with = "coords")]
    pub center: Point,
    pub r0: f64,
    pub m: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HardyConfig {
    /// Estimate Hardy constants; off for annulus-only runs.
    pub estimate: bool,
    pub restarts: usize,
    pub probe_iters: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Exponents besides `p`.
    pub extra_exponents: Vec<f64>,
    pub annulus: Option<AnnulusConfig>,
}

impl Default for HardyConfig {
    fn default() -> Self {
        let d = crate::hardy::HardyOptions::default();
        HardyConfig {
            estimate: true,
            restarts: d.restarts,
            probe_iters: d.probe_iters,
            max_iters: d.max_iters,
            tol: d.tol,
            extra_exponents: Vec::new(),
            annulus: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MazyaConfig {
    /// Compact sets `K`; an empty list means no Maz'ya quotients.
    pub sets: Vec<Region>,
    /// Run the level-set decomposition on this many random tent sums, on
    /// the coarsest grid.
    pub tents: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverConfig {
    pub source: PointSource,
    pub alpha: f64,
    /// Measured from the point set when absent.
    pub c_up: Option<f64>,
    /// Fraction of the merge threshold used as the exponent.
    pub eps_fraction: f64,
    pub covers: usize,
    /// Initial radii are drawn from `[lo, hi]` times the grid spacing.
    pub radius_cells: [f64; 2],
    #[serde(with = "opt_coords")]
    pub x0: Option<Point>,
    pub r0: Option<f64>,
}

impl Default for CoverConfig {
    fn default() -> Self {
        CoverConfig {
            source: PointSource::Domain,
            alpha: 2.0,
            c_up: None,
            eps_fraction: 0.9,
            covers: 50,
            radius_cells: [0.5, 2.0],
            x0: None,
            r0: None,
        }
    }
}

mod opt_coords {
    use super::Point;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Option<Point>, s: S) -> Result<S::Ok, S::Error> {
        match p {
            Some(p) => crate::grid::coords::serialize(p, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Point>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "crate::grid::coords")] Point);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceConfig {
    /// Fatness is also scanned at `Q - offset` for each offset.
    pub fat_offsets: Vec<f64>,
    /// Hardy is also estimated at these exponents.
    pub hardy_extra: Vec<f64>,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        EquivalenceConfig { fat_offsets: vec![0.1, 0.25], hardy_extra: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to `Q`.
    pub p: Option<f64>,
    /// Grid spacings, strictly decreasing.
    pub ladder: Vec<f64>,
    pub space: SpaceConfig,
    pub domain: Region,
    pub output: Option<String>,
    #[serde(default)]
    pub capacity: CapacityConfig,
    #[serde(default)]
    pub fatness: FatnessConfig,
    #[serde(default)]
    pub perfectness: PerfectnessConfig,
    #[serde(default)]
    pub hardy: HardyConfig,
    #[serde(default)]
    pub mazya: MazyaConfig,
    #[serde(default)]
    pub cover: CoverConfig,
    #[serde(default)]
    pub equivalence: EquivalenceConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::Config("ladder must hold at least one spacing".into()));
        }
        if self.ladder.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::Config("ladder spacings must be positive".into()));
        }
        if self.ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("ladder must be strictly decreasing".into()));
        }
        if let Some(p) = self.p {
            if !(p > 1.0) || !p.is_finite() {
                return Err(Error::Config(format!("p must exceed 1, got {p}")));
            }
        }
        if self.space.dim != 2 && self.space.dim != 3 {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {}", self.space.dim)));
        }
        Ok(())
    }

    pub fn p(&self) -> f64 {
        self.p.unwrap_or(self.space.dim as f64)
    }

    /// The ladder cut or extended by halving to `n` levels.
    pub fn with_refinements(&mut self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Config("at least one refinement level is needed".into()));
        }
        self.ladder.truncate(n);
        while self.ladder.len() < n {
            let last = *self.ladder.last().unwrap();
            self.ladder.push(last / 2.0);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
command = "hardy"
ladder = [0.125, 0.0625]

[space]
bbox = { lo = [-1.5, -1.5], hi = [1.5, 1.5] }

[domain]
kind = "difference"
base = { kind = "box", lo = [-1, -1], hi = [1, 1] }
remove = [{ kind = "point", at = [0, 0] }]
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.command, Command::Hardy);
        assert_eq!(cfg.p(), 2.0);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.hardy.restarts, 10);
        assert_eq!(cfg.space.params(0.125).regularity, std::f64::consts::PI);
    }

    #[test]
    fn ladder_must_decrease() {
        let text = MINIMAL.replace("[0.125, 0.0625]", "[0.0625, 0.125]");
        assert!(matches!(ExperimentConfig::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_and_commands_are_rejected() {
        assert!(ExperimentConfig::parse(&MINIMAL.replace("\"hardy\"", "\"bogus\"")).is_err());
        assert!(ExperimentConfig::parse(&format!("foo = 1\n{MINIMAL}")).is_err());
    }

    #[test]
    fn refinements_extend_by_halving() {
        let mut cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        cfg.with_refinements(4).unwrap();
        assert_eq!(cfg.ladder, vec![0.125, 0.0625, 0.03125, 0.015625]);
        cfg.with_refinements(1).unwrap();
        assert_eq!(cfg.ladder, vec![0.125]);
    }
}
