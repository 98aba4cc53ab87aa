use std::hash::{Hash, Hasher};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Levers, PerSpecies, SimConfig, Species};

/// The eight Moore directions used for random walks and offspring placement.
const MOORE: [(i32, i32); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Patch {
    pub grass: f64,
    pub fertile: bool,
    pub hunting_zone: bool,
}

impl Patch {
    pub const BARREN: Patch = Patch {
        grass: 0.0,
        fertile: false,
        hunting_zone: false,
    };
}

/// One tick of regrowth, capped at `max`. Barren patches never grow.
pub fn grow_grass(patch: Patch, growth: f64, max: f64) -> Patch {
    if !patch.fertile {
        return patch;
    }
    Patch {
        grass: (patch.grass + growth).min(max),
        ..patch
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agent {
    pub species: Species,
    pub row: i32,
    pub col: i32,
    pub energy: f64,
    pub age: u32,
    alive: bool,
}

impl Agent {
    pub fn new(species: Species, row: i32, col: i32, energy: f64) -> Self {
        Agent {
            species,
            row,
            col,
            energy,
            age: 0,
            alive: true,
        }
    }
}

/// Cell offsets within a perception radius, nearest first.
#[derive(Debug, Clone)]
struct Neighborhood {
    /// Groups of offsets sharing one squared distance.
    rings: Vec<Vec<(i32, i32)>>,
}

impl Neighborhood {
    fn new(radius: f64, side: usize) -> Self {
        let reach = radius.floor().max(0.0) as i32;
        let r2 = radius * radius;
        let mut offsets: Vec<(i32, i32, i32)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let d2 = dr * dr + dc * dc;
                if d2 as f64 <= r2 {
                    // small grids can alias two offsets onto one cell
                    let key = (dr.rem_euclid(side as i32), dc.rem_euclid(side as i32));
                    if seen.insert(key) {
                        offsets.push((d2, dr, dc));
                    }
                }
            }
        }
        offsets.sort();
        let mut rings: Vec<Vec<(i32, i32)>> = Vec::new();
        let mut last = -1;
        for (d2, dr, dc) in offsets {
            if d2 != last {
                rings.push(Vec::new());
                last = d2;
            }
            rings.last_mut().unwrap().push((dr, dc));
        }
        Neighborhood { rings }
    }
}

/// Grid state, agent population and the run's random stream.
#[derive(Debug, Clone)]
pub struct World {
    side: usize,
    patches: Vec<Patch>,
    agents: Vec<Agent>,
    tick: u32,
    rng: ChaCha8Rng,
    sight: PerSpecies<usize>,
    neighborhoods: Vec<Neighborhood>,
    prey_at: Vec<Vec<u32>>,
}

/// Stream seed for one run: the replicate seed folded with the lever values.
fn stream_seed(levers: &Levers, seed: u64) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in levers.to_array() {
        h = splitmix(h ^ v.to_bits());
    }
    splitmix(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl World {
    /// A barren world with no agents, seeded from `cfg`.
    pub fn empty(cfg: &SimConfig) -> Self {
        let side = cfg.grid_side;
        let bv = Neighborhood::new(cfg.levers.bandicoot_view, side);
        let fv = Neighborhood::new(cfg.levers.fox_view, side);
        World {
            side,
            patches: vec![Patch::BARREN; side * side],
            agents: Vec::new(),
            tick: 0,
            rng: ChaCha8Rng::seed_from_u64(stream_seed(&cfg.levers, cfg.seed)),
            sight: PerSpecies::new(0, 1),
            neighborhoods: vec![bv, fv],
            prey_at: vec![Vec::new(); side * side],
        }
    }

    /// Builds the initial landscape and populations for `cfg`.
    pub fn init(cfg: &SimConfig) -> Self {
        let mut world = World::empty(cfg);
        let n = world.patches.len();
        let side = world.side;
        let levers = &cfg.levers;
        let consts = &cfg.constants;

        let centers: Vec<(i32, i32)> = (0..consts.cluster_centers)
            .map(|_| {
                (
                    world.rng.gen_range(0..side) as i32,
                    world.rng.gen_range(0..side) as i32,
                )
            })
            .collect();

        // Weighted sampling without replacement: keep the `target` largest
        // keys ln(u) / w with w = exp(-k d).
        let target = ((levers.grass_cover / 100.0) * n as f64).round().clamp(0.0, n as f64) as usize;
        let mut keys: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let (r, c) = ((i / side) as i32, (i % side) as i32);
                let d = centers
                    .iter()
                    .map(|&(cr, cc)| world.distance((r, c), (cr, cc)))
                    .fold(f64::INFINITY, f64::min);
                let d = if d.is_finite() { d } else { 0.0 };
                let u: f64 = world.rng.gen::<f64>().max(f64::MIN_POSITIVE);
                (u.ln() * (consts.decay_k * d).exp(), i)
            })
            .collect();
        keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut fertile: Vec<usize> = keys[..target].iter().map(|&(_, i)| i).collect();
        fertile.sort_unstable();
        for &i in &fertile {
            world.patches[i] = Patch {
                grass: levers.grass_max,
                fertile: true,
                hunting_zone: false,
            };
        }

        let hunting = ((levers.hunting_share / 100.0) * fertile.len() as f64).round() as usize;
        let amount = hunting.min(fertile.len());
        let (zones, _) = fertile.partial_shuffle(&mut world.rng, amount);
        for &i in zones.iter() {
            world.patches[i].hunting_zone = true;
        }

        for species in [Species::Bandicoot, Species::Fox] {
            let e_rep = levers.repro_energy(species).max(1.0);
            for _ in 0..consts.init_count.get(species) {
                let row = world.rng.gen_range(0..side) as i32;
                let col = world.rng.gen_range(0..side) as i32;
                let energy = if e_rep > 1.0 { world.rng.gen_range(1.0..e_rep) } else { 1.0 };
                world.agents.push(Agent::new(species, row, col, energy));
            }
        }
        world
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn patch(&self, row: i32, col: i32) -> &Patch {
        &self.patches[self.index(row, col)]
    }

    pub fn patch_mut(&mut self, row: i32, col: i32) -> &mut Patch {
        let i = self.index(row, col);
        &mut self.patches[i]
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn add_agent(&mut self, agent: Agent) {
        let mut agent = agent;
        agent.row = self.wrap(agent.row);
        agent.col = self.wrap(agent.col);
        self.agents.push(agent);
    }

    pub fn count(&self, species: Species) -> usize {
        self.agents.iter().filter(|a| a.species == species).count()
    }

    pub fn total_grass(&self) -> f64 {
        self.patches.iter().map(|p| p.grass).sum()
    }

    pub fn fertile_count(&self) -> usize {
        self.patches.iter().filter(|p| p.fertile).count()
    }

    pub fn hunting_count(&self) -> usize {
        self.patches.iter().filter(|p| p.hunting_zone).count()
    }

    fn wrap(&self, v: i32) -> i32 {
        v.rem_euclid(self.side as i32)
    }

    fn index(&self, row: i32, col: i32) -> usize {
        self.wrap(row) as usize * self.side + self.wrap(col) as usize
    }

    /// Shortest signed displacement from `a` to `b` on a ring of `side` cells.
    fn delta(&self, a: i32, b: i32) -> i32 {
        let side = self.side as i32;
        let d = (b - a).rem_euclid(side);
        if d > side / 2 {
            d - side
        } else {
            d
        }
    }

    /// Euclidean distance on the torus.
    pub fn distance(&self, a: (i32, i32), b: (i32, i32)) -> f64 {
        let dr = self.delta(a.0, b.0) as f64;
        let dc = self.delta(a.1, b.1) as f64;
        (dr * dr + dc * dc).sqrt()
    }

    /// Nearest cell within the species' perception radius satisfying
    /// `wanted`; equidistant candidates resolve to the lowest (row, col).
    /// Grazers skip their own cell so they keep moving every tick.
    fn nearest(&self, species: Species, row: i32, col: i32, wanted: impl Fn(usize) -> bool) -> Option<(i32, i32)> {
        let hood = &self.neighborhoods[self.sight.get(species)];
        let skip = usize::from(species == Species::Bandicoot);
        for ring in hood.rings.iter().skip(skip) {
            let best = ring
                .iter()
                .map(|&(dr, dc)| (self.wrap(row + dr), self.wrap(col + dc)))
                .filter(|&(r, c)| wanted(self.index(r, c)))
                .min();
            if best.is_some() {
                return best;
            }
        }
        None
    }

    fn rebuild_prey_index(&mut self) {
        for cell in &mut self.prey_at {
            cell.clear();
        }
        for (i, a) in self.agents.iter().enumerate() {
            if a.alive && a.species == Species::Bandicoot {
                let idx = self.index(a.row, a.col);
                self.prey_at[idx].push(i as u32);
            }
        }
    }

    fn unindex_prey(&mut self, cell: usize, agent: usize) {
        let list = &mut self.prey_at[cell];
        if let Some(pos) = list.iter().position(|&a| a as usize == agent) {
            list.swap_remove(pos);
        }
    }

    /// Moves agent `i` one stride toward `target`, or randomly if none.
    fn move_agent(&mut self, i: usize, target: Option<(i32, i32)>, stride: i32) {
        let (row, col) = (self.agents[i].row, self.agents[i].col);
        let (dr, dc) = match target {
            Some((tr, tc)) => (
                self.delta(row, tr).clamp(-stride, stride),
                self.delta(col, tc).clamp(-stride, stride),
            ),
            None => {
                let (dr, dc) = MOORE[self.rng.gen_range(0..MOORE.len())];
                (dr * stride, dc * stride)
            }
        };
        let (nr, nc) = (self.wrap(row + dr), self.wrap(col + dc));
        if self.agents[i].species == Species::Bandicoot && (nr, nc) != (row, col) {
            let from = self.index(row, col);
            let to = self.index(nr, nc);
            self.unindex_prey(from, i);
            self.prey_at[to].push(i as u32);
        }
        self.agents[i].row = nr;
        self.agents[i].col = nc;
    }

    /// Advances one tick. Returns false without changes once `max_ticks` is reached.
    pub fn step(&mut self, cfg: &SimConfig) -> bool {
        if self.tick >= cfg.max_ticks {
            return false;
        }
        let levers = &cfg.levers;
        let consts = &cfg.constants;
        let stride = consts.stride;

        for p in &mut self.patches {
            *p = grow_grass(*p, levers.grass_growth, levers.grass_max);
        }

        self.rebuild_prey_index();
        let mut order: Vec<usize> = (0..self.agents.len()).collect();
        order.shuffle(&mut self.rng);
        for i in order {
            if !self.agents[i].alive {
                continue;
            }
            let Agent { species, row, col, .. } = self.agents[i];
            match species {
                Species::Bandicoot => {
                    let intake = levers.bandicoot_intake;
                    let target = self.nearest(species, row, col, |c| self.patches[c].grass >= intake);
                    self.move_agent(i, target, stride);
                    let cell = self.index(self.agents[i].row, self.agents[i].col);
                    if self.patches[cell].grass >= intake {
                        self.patches[cell].grass -= intake;
                        self.agents[i].energy += levers.bandicoot_gain;
                    }
                }
                Species::Fox => {
                    let target = self.nearest(species, row, col, |c| !self.prey_at[c].is_empty());
                    self.move_agent(i, target, stride);
                    let cell = self.index(self.agents[i].row, self.agents[i].col);
                    let here = self.prey_at[cell].len();
                    if here > 0 {
                        let pick = self.rng.gen_range(0..here);
                        let prey = self.prey_at[cell].swap_remove(pick) as usize;
                        self.agents[prey].alive = false;
                        self.agents[i].energy += levers.fox_gain;
                    }
                }
            }
            let a = &mut self.agents[i];
            a.energy -= 1.0;
            a.age += 1;
        }

        // Hunting pressure. One uniform draw per exposed agent regardless of
        // the quota, so a larger quota never changes the random stream.
        for i in 0..self.agents.len() {
            let a = self.agents[i];
            if !a.alive || !self.patches[self.index(a.row, a.col)].hunting_zone {
                continue;
            }
            let p = (consts.hazard_scale * levers.quota(a.species) / 100.0).min(1.0);
            let u: f64 = self.rng.gen();
            if u < p {
                self.agents[i].alive = false;
            }
        }

        for a in &mut self.agents {
            if a.energy < 0.0 || a.age > consts.max_age.get(a.species) {
                a.alive = false;
            }
        }
        self.agents.retain(|a| a.alive);

        let mut heads = PerSpecies::new(self.count(Species::Bandicoot), self.count(Species::Fox));
        let mut births = Vec::new();
        for i in 0..self.agents.len() {
            let species = self.agents[i].species;
            let e_rep = levers.repro_energy(species);
            let a = self.agents[i];
            if a.energy < e_rep || a.age < consts.repro_age.get(species) {
                continue;
            }
            if self.rng.gen::<f64>() >= consts.repro_prob {
                continue;
            }
            let room = consts.max_population.get(species).saturating_sub(heads.get(species));
            let affordable = (a.energy / e_rep).floor() as usize;
            let cap = affordable.min(consts.max_offspring as usize).min(room);
            if cap == 0 {
                continue;
            }
            let litter = self.rng.gen_range(1..=cap);
            for _ in 0..litter {
                let (dr, dc) = MOORE[self.rng.gen_range(0..MOORE.len())];
                let child = Agent::new(
                    species,
                    self.wrap(a.row + dr * consts.stride),
                    self.wrap(a.col + dc * consts.stride),
                    e_rep,
                );
                births.push(child);
            }
            self.agents[i].energy -= e_rep * litter as f64;
            match species {
                Species::Bandicoot => heads.bandicoot += litter,
                Species::Fox => heads.fox += litter,
            }
        }
        self.agents.extend(births);
        self.tick += 1;
        true
    }

    /// Stable digest of the full world state.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::hash::DefaultHasher::new();
        self.tick.hash(&mut h);
        for p in &self.patches {
            p.grass.to_bits().hash(&mut h);
            p.fertile.hash(&mut h);
            p.hunting_zone.hash(&mut h);
        }
        for a in &self.agents {
            a.species.hash(&mut h);
            a.row.hash(&mut h);
            a.col.hash(&mut h);
            a.energy.to_bits().hash(&mut h);
            a.age.hash(&mut h);
        }
        h.finish()
    }
}
