//! Venue geometry, agents, mobility, contacts and infection spread.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::identity::NodeId;
use crate::signal::Beacon;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Venue {
    pub width: f64,
    pub height: f64,
    pub zone_size: f64,
    pub beacons: Vec<Beacon>,
}

impl Default for Venue {
    /// 10 x 10 m floor in 0.5 m zones with a 4 x 4 beacon grid at 4 m pitch.
    /// The grid spans 12 m, so it is centred on the floor and the outer
    /// rows and columns sit 1 m outside the walls. The two lower rows face
    /// +y and the two upper rows face -y.
    fn default() -> Self {
        let coords = [-1.0, 3.0, 7.0, 11.0];
        let mut beacons = Vec::with_capacity(16);
        for (r, &y) in coords.iter().enumerate() {
            for &x in &coords {
                beacons.push(Beacon {
                    id: beacons.len() as u32,
                    position: [x, y],
                    facing_deg: if r < 2 { 0.0 } else { 180.0 },
                });
            }
        }
        Venue { width: 10.0, height: 10.0, zone_size: 0.5, beacons }
    }
}

impl Venue {
    pub fn zones_x(&self) -> usize {
        libm::round(self.width / self.zone_size) as usize
    }

    pub fn zones_y(&self) -> usize {
        libm::round(self.height / self.zone_size) as usize
    }

    pub fn n_zones(&self) -> usize {
        self.zones_x() * self.zones_y()
    }

    /// Row-major zone index of a point inside the venue.
    pub fn zone_of(&self, p: [f64; 2]) -> usize {
        let zx = ((p[0] / self.zone_size) as usize).min(self.zones_x() - 1);
        let zy = ((p[1] / self.zone_size) as usize).min(self.zones_y() - 1);
        zy * self.zones_x() + zx
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0.0..=self.width).contains(&p[0]) && (0.0..=self.height).contains(&p[1])
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        [rng.gen_range(0.0..=self.width), rng.gen_range(0.0..=self.height)]
    }
}

/// Folds `x` back into `[0, len]` as if reflected by both walls.
pub fn reflect(x: f64, len: f64) -> f64 {
    if (0.0..=len).contains(&x) {
        return x;
    }
    let period = 2.0 * len;
    let mut y = x % period;
    if y < 0.0 {
        y += period;
    }
    if y > len {
        period - y
    } else {
        y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfectionState {
    Susceptible,
    Infected,
    /// Diagnosed and reported. Still counts as infected.
    Notified,
}

impl InfectionState {
    pub fn is_infected(self) -> bool {
        self != InfectionState::Susceptible
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Honest,
    /// Drifts towards the nearest agent and keeps mixing after diagnosis.
    DistanceViolator,
    /// Submits a trace claim without a diagnosis.
    FalseClaimer,
    /// Submits a forged block.
    Attacker,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub id: NodeId,
    pub position: [f64; 2],
    pub infection: InfectionState,
    pub behavior: Behavior,
}

impl Agent {
    /// Diagnosed honest agents stay home and drop out of contact sensing.
    pub fn is_isolated(&self) -> bool {
        self.infection == InfectionState::Notified && self.behavior != Behavior::DistanceViolator
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub venue: Venue,
    pub agents: Vec<Agent>,
    pub step_std: f64,
    pub tick: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    libm::sqrt(dx * dx + dy * dy)
}

/// Moves every agent by an isotropic Gaussian step, reflected at the walls.
/// Distance violators add a pull of up to one `step_std` towards their
/// nearest neighbour.
pub fn step_mobility<R: Rng + ?Sized>(world: &mut WorldState, rng: &mut R) {
    let sigma = world.step_std;
    let (w, h) = (world.venue.width, world.venue.height);
    let pulls: Vec<[f64; 2]> = world
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if a.behavior != Behavior::DistanceViolator {
                return [0.0, 0.0];
            }
            let nearest = world
                .agents
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| (distance(a.position, b.position), b.position))
                .min_by(|x, y| x.0.total_cmp(&y.0));
            match nearest {
                Some((d, p)) if d > 0.0 => {
                    let k = sigma.min(d / 2.0) / d;
                    [(p[0] - a.position[0]) * k, (p[1] - a.position[1]) * k]
                }
                _ => [0.0, 0.0],
            }
        })
        .collect();
    for (a, pull) in world.agents.iter_mut().zip(pulls) {
        let dx: f64 = StandardNormal.sample(rng);
        let dy: f64 = StandardNormal.sample(rng);
        a.position =
            [reflect(a.position[0] + sigma * dx + pull[0], w), reflect(a.position[1] + sigma * dy + pull[1], h)];
    }
    world.tick += 1;
}

/// Unordered pairs `i < j` within `radius`, in lexicographic order.
pub fn extract_contacts(world: &WorldState, radius: f64) -> Vec<Contact> {
    let agents = &world.agents;
    let mut out = Vec::new();
    for i in 0..agents.len() {
        for j in i + 1..agents.len() {
            let d = distance(agents[i].position, agents[j].position);
            if d <= radius {
                out.push(Contact { i, j, distance: d });
            }
        }
    }
    out
}

/// `1 - (1 - p)^k`: chance that at least one of `k` exposures transmits.
pub fn infection_probability(p_inf: f64, exposures: u32) -> f64 {
    if exposures == 0 {
        0.0
    } else {
        1.0 - libm::pow(1.0 - p_inf, f64::from(exposures))
    }
}

/// One synchronous infection round: every susceptible agent with `k`
/// infected agents within `radius` becomes infected with probability
/// `infection_probability(p_inf, k)`. One uniform is drawn per agent.
/// Returns the number of new infections.
pub fn spread_infection<R: Rng + ?Sized>(world: &mut WorldState, radius: f64, p_inf: f64, rng: &mut R) -> usize {
    let n = world.agents.len();
    let mut exposures = vec![0u32; n];
    for c in extract_contacts(world, radius) {
        if world.agents[c.j].infection.is_infected() {
            exposures[c.i] += 1;
        }
        if world.agents[c.i].infection.is_infected() {
            exposures[c.j] += 1;
        }
    }
    let mut new = 0;
    for (a, k) in world.agents.iter_mut().zip(exposures) {
        let u: f64 = rng.gen();
        if a.infection == InfectionState::Susceptible && u < infection_probability(p_inf, k) {
            a.infection = InfectionState::Infected;
            new += 1;
        }
    }
    new
}
