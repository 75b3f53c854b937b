//! Bounded grid environment with contagion.
//!
//! Carriers move one step in the 9-cell neighbourhood (staying put
//! included), clamped at the edges. A healthy individual within Chebyshev
//! distance `radius` of a carrier is infected with probability `p`, one
//! draw per in-range (carrier, individual) pair in ascending pair order.
//! Individuals never recover.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::rng::SimRng;
use crate::model::AgentId;

pub type Cell = (u32, u32);

pub const INFECTION_STREAM: &str = "infection";

pub fn move_stream(agent: &AgentId) -> String {
    format!("move:{agent}")
}

pub fn chebyshev(a: Cell, b: Cell) -> u32 {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("cell ({x}, {y}) of {agent} is outside the {width}x{height} grid")]
    OutOfBounds {
        agent: AgentId,
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
    #[error("grid must have positive width and height")]
    Empty,
    #[error("infection probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("{0} is placed twice")]
    Duplicate(AgentId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Infection {
    pub source: AgentId,
    pub target: AgentId,
    pub disease: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub agent: AgentId,
    pub from: Cell,
    pub to: Cell,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    width: u32,
    height: u32,
    radius: u32,
    probability: f64,
    movement: bool,
    positions: BTreeMap<AgentId, Cell>,
    carriers: BTreeMap<AgentId, String>,
    healthy: BTreeSet<AgentId>,
    individuals: BTreeSet<AgentId>,
    move_rngs: BTreeMap<AgentId, SimRng>,
    infection_rng: SimRng,
}

impl Grid {
    pub fn new(
        width: u32,
        height: u32,
        radius: u32,
        probability: f64,
        movement: bool,
        seed: u64,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::Empty);
        }
        if !(0.0..=1.0).contains(&probability) {
            return Err(GridError::Probability(probability));
        }
        Ok(Grid {
            width,
            height,
            radius,
            probability,
            movement,
            positions: BTreeMap::new(),
            carriers: BTreeMap::new(),
            healthy: BTreeSet::new(),
            individuals: BTreeSet::new(),
            move_rngs: BTreeMap::new(),
            infection_rng: SimRng::substream(seed, INFECTION_STREAM),
        })
    }

    fn place(&mut self, agent: &AgentId, at: Cell, seed: u64) -> Result<(), GridError> {
        if at.0 >= self.width || at.1 >= self.height {
            return Err(GridError::OutOfBounds {
                agent: agent.clone(),
                x: at.0,
                y: at.1,
                width: self.width,
                height: self.height,
            });
        }
        if self.positions.contains_key(agent) {
            return Err(GridError::Duplicate(agent.clone()));
        }
        self.positions.insert(agent.clone(), at);
        self.move_rngs
            .insert(agent.clone(), SimRng::substream(seed, &move_stream(agent)));
        Ok(())
    }

    pub fn add_carrier(
        &mut self,
        agent: &AgentId,
        at: Cell,
        disease: &str,
        seed: u64,
    ) -> Result<(), GridError> {
        self.place(agent, at, seed)?;
        self.carriers.insert(agent.clone(), disease.into());
        Ok(())
    }

    pub fn add_individual(
        &mut self,
        agent: &AgentId,
        at: Cell,
        seed: u64,
    ) -> Result<(), GridError> {
        self.place(agent, at, seed)?;
        self.healthy.insert(agent.clone());
        self.individuals.insert(agent.clone());
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn movement(&self) -> bool {
        self.movement
    }

    pub fn position(&self, agent: &AgentId) -> Option<Cell> {
        self.positions.get(agent).copied()
    }

    pub fn carriers(&self) -> &BTreeMap<AgentId, String> {
        &self.carriers
    }

    pub fn is_carrier(&self, agent: &AgentId) -> bool {
        self.carriers.contains_key(agent)
    }

    pub fn healthy(&self) -> &BTreeSet<AgentId> {
        &self.healthy
    }

    pub fn individuals(&self) -> &BTreeSet<AgentId> {
        &self.individuals
    }

    /// Individuals that have been infected so far.
    pub fn infected(&self) -> BTreeSet<AgentId> {
        self.individuals
            .difference(&self.healthy)
            .cloned()
            .collect()
    }

    /// Moves each of `movers` that is a carrier, in ascending order, each
    /// with one draw from its own stream. No draws when movement is off.
    pub fn move_carriers(&mut self, movers: &BTreeSet<AgentId>) -> Vec<Move> {
        let mut out = Vec::new();
        if !self.movement {
            return out;
        }
        for a in movers {
            if !self.carriers.contains_key(a) {
                continue;
            }
            let (Some(rng), Some(from)) =
                (self.move_rngs.get_mut(a), self.positions.get(a).copied())
            else {
                continue;
            };
            let k = rng.below(9) as i64;
            let clamp = |v: u32, d: i64, n: u32| (v as i64 + d).clamp(0, n as i64 - 1) as u32;
            let to = (
                clamp(from.0, k % 3 - 1, self.width),
                clamp(from.1, k / 3 - 1, self.height),
            );
            self.positions.insert(a.clone(), to);
            if to != from {
                out.push(Move {
                    agent: a.clone(),
                    from,
                    to,
                });
            }
        }
        out
    }

    /// Infection pass for the carriers in `sources`. Targets are the
    /// individuals healthy at the start of the pass; newly infected ones do
    /// not spread in the same pass.
    pub fn infect(&mut self, sources: &BTreeSet<AgentId>) -> Vec<Infection> {
        let healthy: Vec<AgentId> = self.healthy.iter().cloned().collect();
        let mut out: Vec<Infection> = Vec::new();
        for s in sources {
            let (Some(disease), Some(sp)) = (self.carriers.get(s), self.positions.get(s)) else {
                continue;
            };
            for t in &healthy {
                let tp = self.positions[t];
                if chebyshev(*sp, tp) > self.radius {
                    continue;
                }
                let hit = self.infection_rng.next_f64() < self.probability;
                if hit && !out.iter().any(|i| &i.target == t) {
                    out.push(Infection {
                        source: s.clone(),
                        target: t.clone(),
                        disease: disease.clone(),
                    });
                }
            }
        }
        for i in &out {
            self.healthy.remove(&i.target);
            self.carriers.insert(i.target.clone(), i.disease.clone());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> AgentId {
        AgentId::new(s).unwrap()
    }

    #[test]
    fn proximity_with_certain_infection() {
        let mut g = Grid::new(5, 5, 1, 1.0, false, 1).unwrap();
        g.add_carrier(&id("c"), (2, 2), "flu", 1).unwrap();
        g.add_individual(&id("near"), (2, 3), 1).unwrap();
        g.add_individual(&id("far"), (4, 4), 1).unwrap();
        let hits = g.infect(&[id("c")].into());
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].target, id("near"));
        assert_eq!(g.infected(), [id("near")].into());
        assert!(g.infect(&[id("x")].into()).is_empty());
    }

    #[test]
    fn nobody_in_range() {
        let mut g = Grid::new(5, 5, 1, 1.0, false, 1).unwrap();
        g.add_carrier(&id("c"), (0, 0), "flu", 1).unwrap();
        g.add_individual(&id("i"), (3, 3), 1).unwrap();
        assert!(g.infect(&[id("c")].into()).is_empty());
    }

    #[test]
    fn zero_probability() {
        let mut g = Grid::new(3, 3, 2, 0.0, true, 9).unwrap();
        g.add_carrier(&id("c"), (1, 1), "flu", 9).unwrap();
        g.add_individual(&id("i"), (1, 2), 9).unwrap();
        for _ in 0..100 {
            g.move_carriers(&[id("c")].into());
            assert!(g.infect(&[id("c")].into()).is_empty());
        }
    }

    #[test]
    fn moves_stay_on_grid() {
        let mut g = Grid::new(2, 3, 0, 0.0, true, 5).unwrap();
        g.add_carrier(&id("c"), (0, 0), "flu", 5).unwrap();
        for _ in 0..200 {
            g.move_carriers(&[id("c")].into());
            let (x, y) = g.position(&id("c")).unwrap();
            assert!(x < 2 && y < 3);
        }
    }

    #[test]
    fn placement_errors() {
        let mut g = Grid::new(2, 2, 0, 0.5, true, 5).unwrap();
        assert!(matches!(
            g.add_individual(&id("i"), (2, 0), 5),
            Err(GridError::OutOfBounds { .. })
        ));
        g.add_individual(&id("i"), (1, 0), 5).unwrap();
        assert_eq!(
            g.add_carrier(&id("i"), (0, 0), "x", 5),
            Err(GridError::Duplicate(id("i")))
        );
        assert_eq!(Grid::new(0, 2, 0, 0.5, true, 0), Err(GridError::Empty));
        assert_eq!(
            Grid::new(2, 2, 0, 1.5, true, 0),
            Err(GridError::Probability(1.5))
        );
    }
}
