use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{ParamVector, ParameterSpace, LEVER_CODES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Bandicoot,
    Fox,
}

/// A value held separately for prey and predators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerSpecies<T> {
    pub bandicoot: T,
    pub fox: T,
}

impl<T: Copy> PerSpecies<T> {
    pub fn new(bandicoot: T, fox: T) -> Self {
        PerSpecies { bandicoot, fox }
    }

    pub fn get(&self, species: Species) -> T {
        match species {
            Species::Bandicoot => self.bandicoot,
            Species::Fox => self.fox,
        }
    }
}

/// Model constants that the experiment does not vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeciesConstants {
    pub init_count: PerSpecies<usize>,
    pub max_age: PerSpecies<u32>,
    pub repro_age: PerSpecies<u32>,
    pub repro_prob: f64,
    pub max_offspring: u32,
    /// Cells moved per tick, per axis.
    pub stride: i32,
    pub cluster_centers: usize,
    /// Spatial decay rate of fertility around cluster centers.
    pub decay_k: f64,
    /// Per-tick death probability on a hunting patch is
    /// `min(1, hazard_scale * quota / 100)`.
    pub hazard_scale: f64,
    /// Births are suppressed once a species reaches this head count.
    pub max_population: PerSpecies<usize>,
}

impl Default for SpeciesConstants {
    fn default() -> Self {
        SpeciesConstants {
            init_count: PerSpecies::new(100, 30),
            max_age: PerSpecies::new(200, 300),
            repro_age: PerSpecies::new(5, 5),
            repro_prob: 0.5,
            max_offspring: 5,
            stride: 1,
            cluster_centers: 5,
            decay_k: 0.15,
            hazard_scale: 3.0,
            max_population: PerSpecies::new(3000, 1000),
        }
    }
}

impl SpeciesConstants {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.repro_prob) {
            return Err(Error::InvalidConfig(format!(
                "repro_prob must lie in [0, 1], got {}",
                self.repro_prob
            )));
        }
        if !(self.decay_k > 0.0 && self.decay_k.is_finite()) {
            return Err(Error::InvalidConfig(format!("decay_k must be positive, got {}", self.decay_k)));
        }
        if !(self.hazard_scale >= 0.0 && self.hazard_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "hazard_scale must be finite and non-negative, got {}",
                self.hazard_scale
            )));
        }
        if self.stride < 1 {
            return Err(Error::InvalidConfig("stride must be at least one cell".into()));
        }
        Ok(())
    }
}

/// The thirteen experimental levers under their model roles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levers {
    /// Gr, percent of the map that is fertile.
    pub grass_cover: f64,
    /// PH, percent of fertile patches that are hunting zones.
    pub hunting_share: f64,
    /// PM
    pub grass_max: f64,
    /// PR
    pub grass_growth: f64,
    /// BF, grass removed by one bandicoot meal.
    pub bandicoot_intake: f64,
    pub bandicoot_gain: f64,
    pub bandicoot_repro_energy: f64,
    pub bandicoot_quota: f64,
    pub bandicoot_view: f64,
    pub fox_gain: f64,
    pub fox_repro_energy: f64,
    pub fox_quota: f64,
    pub fox_view: f64,
}

impl Levers {
    /// Reads every lever by code; the space must define all thirteen.
    pub fn from_params(space: &ParameterSpace, params: &ParamVector) -> Result<Self> {
        let mut v = [0.0; 13];
        for (slot, code) in v.iter_mut().zip(LEVER_CODES) {
            *slot = params.get(space, code).ok_or_else(|| {
                Error::InvalidConfig(format!("parameter space lacks lever {code}"))
            })?;
        }
        Ok(Self::from_array(v))
    }

    /// Values in canonical column order.
    pub fn from_array(v: [f64; 13]) -> Self {
        Levers {
            grass_cover: v[0],
            hunting_share: v[1],
            grass_max: v[2],
            grass_growth: v[3],
            bandicoot_intake: v[4],
            bandicoot_gain: v[5],
            bandicoot_repro_energy: v[6],
            bandicoot_quota: v[7],
            bandicoot_view: v[8],
            fox_gain: v[9],
            fox_repro_energy: v[10],
            fox_quota: v[11],
            fox_view: v[12],
        }
    }

    pub fn to_array(&self) -> [f64; 13] {
        [
            self.grass_cover,
            self.hunting_share,
            self.grass_max,
            self.grass_growth,
            self.bandicoot_intake,
            self.bandicoot_gain,
            self.bandicoot_repro_energy,
            self.bandicoot_quota,
            self.bandicoot_view,
            self.fox_gain,
            self.fox_repro_energy,
            self.fox_quota,
            self.fox_view,
        ]
    }

    /// Midpoint of the full exploration box.
    pub fn midpoint() -> Self {
        let space = ParameterSpace::standard();
        let mid: Vec<f64> = space.dims.iter().map(|d| 0.5 * (d.lower + d.upper)).collect();
        Self::from_array(mid.try_into().expect("thirteen levers"))
    }

    pub fn gain(&self, s: Species) -> f64 {
        match s {
            Species::Bandicoot => self.bandicoot_gain,
            Species::Fox => self.fox_gain,
        }
    }

    pub fn repro_energy(&self, s: Species) -> f64 {
        match s {
            Species::Bandicoot => self.bandicoot_repro_energy,
            Species::Fox => self.fox_repro_energy,
        }
    }

    pub fn quota(&self, s: Species) -> f64 {
        match s {
            Species::Bandicoot => self.bandicoot_quota,
            Species::Fox => self.fox_quota,
        }
    }

    pub fn view(&self, s: Species) -> f64 {
        match s {
            Species::Bandicoot => self.bandicoot_view,
            Species::Fox => self.fox_view,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pct = |name: &str, v: f64| {
            if (0.0..=100.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must lie in [0, 100], got {v}")))
            }
        };
        pct("Gr", self.grass_cover)?;
        pct("PH", self.hunting_share)?;
        pct("BH", self.bandicoot_quota)?;
        pct("FH", self.fox_quota)?;
        for (name, v) in [
            ("PM", self.grass_max),
            ("PR", self.grass_growth),
            ("BF", self.bandicoot_intake),
            ("BG", self.bandicoot_gain),
            ("BR", self.bandicoot_repro_energy),
            ("BV", self.bandicoot_view),
            ("FG", self.fox_gain),
            ("FR", self.fox_repro_energy),
            ("FV", self.fox_view),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.bandicoot_repro_energy <= 0.0 || self.fox_repro_energy <= 0.0 {
            return Err(Error::InvalidConfig("reproduction energy must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub levers: Levers,
    pub seed: u64,
    pub grid_side: usize,
    pub max_ticks: u32,
    pub constants: SpeciesConstants,
}

impl SimConfig {
    pub fn new(levers: Levers, seed: u64) -> Self {
        SimConfig {
            levers,
            seed,
            grid_side: 60,
            max_ticks: 1000,
            constants: SpeciesConstants::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_side == 0 || self.grid_side > u16::MAX as usize {
            return Err(Error::InvalidConfig(format!("grid_side out of range: {}", self.grid_side)));
        }
        if self.max_ticks == 0 {
            return Err(Error::InvalidConfig("max_ticks must be positive".into()));
        }
        self.levers.validate()?;
        self.constants.validate()
    }
}

/// Settings shared by every run of a batch; levers and seed vary per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimTemplate {
    pub grid_side: usize,
    pub max_ticks: u32,
    pub constants: SpeciesConstants,
}

impl Default for SimTemplate {
    fn default() -> Self {
        SimTemplate {
            grid_side: 60,
            max_ticks: 1000,
            constants: SpeciesConstants::default(),
        }
    }
}

impl SimTemplate {
    pub fn config(&self, levers: Levers, seed: u64) -> SimConfig {
        SimConfig {
            levers,
            seed,
            grid_side: self.grid_side,
            max_ticks: self.max_ticks,
            constants: self.constants.clone(),
        }
    }
}
