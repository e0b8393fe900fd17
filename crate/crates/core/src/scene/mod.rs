//! Floor/room/item scene graphs.
//!
//! Scenes are read from a nested JSON document (floors contain rooms,
//! rooms contain items). Room adjacency is closed under symmetry on load.

mod encode;
mod relevance;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use encode::{build_problem, encode_scene_facts, encode_scene_facts_with, EncodingConfig, FactRule, RuleTrigger};
pub use relevance::{relevance_prune, relevance_prune_with, RelevanceContext};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SceneError {
    #[error("malformed scene document: {0}")]
    Malformed(String),
    #[error("invalid identifier `{0}`")]
    InvalidId(String),
    #[error("duplicate {layer} id `{id}`")]
    Duplicate { layer: &'static str, id: String },
    #[error("room `{room}` lists unknown neighbor `{neighbor}`")]
    DanglingNeighbor { room: String, neighbor: String },
    #[error("room `{0}` lists itself as a neighbor")]
    SelfAdjacent(String),
    #[error("room `{room}` references unknown floor `{floor}`")]
    DanglingFloor { room: String, floor: String },
    #[error("item `{item}` references unknown room `{room}`")]
    DanglingRoom { item: String, room: String },
    #[error("item `{0}` has an empty affordance label")]
    EmptyAffordance(String),
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("domain does not declare required predicate `{0}`")]
    MissingPredicate(String),
    #[error(transparent)]
    Planning(#[from] crate::pddl::PddlError),
    #[error(transparent)]
    Ground(#[from] crate::ground::GroundError),
}

/// Item state value: a flag or an opaque label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateValue {
    Flag(bool),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Floor {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub id: String,
    pub name: String,
    pub floor: String,
    pub neighbors: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub name: String,
    pub room: String,
    pub accessible: bool,
    pub states: BTreeMap<String, StateValue>,
    pub affordances: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub name: String,
    pub floors: Vec<Floor>,
    pub rooms: Vec<Room>,
    pub items: Vec<Item>,
}

// Nested on-disk layout.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocScene {
    name: String,
    floors: Vec<DocFloor>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocFloor {
    id: String,
    #[serde(default)]
    rooms: Vec<DocRoom>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRoom {
    id: String,
    name: String,
    #[serde(default)]
    neighbors: Vec<String>,
    #[serde(default)]
    items: Vec<DocItem>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocItem {
    id: String,
    name: String,
    #[serde(default = "yes")]
    accessible: bool,
    #[serde(default)]
    states: BTreeMap<String, StateValue>,
    #[serde(default)]
    affordances: Vec<String>,
}

fn yes() -> bool {
    true
}

fn identifier(raw: &str) -> Result<String, SceneError> {
    let id = raw.to_ascii_lowercase();
    let mut chars = id.chars();
    let ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(id)
    } else {
        Err(SceneError::InvalidId(raw.to_string()))
    }
}

/// Parses a scene document. Identifiers are lowercased; an adjacency listed
/// in one direction only is added in the other.
pub fn load_scene_graph(text: &str) -> Result<SceneGraph, SceneError> {
    let doc: DocScene = serde_json::from_str(text).map_err(|e| SceneError::Malformed(e.to_string()))?;
    let mut sg = SceneGraph {
        name: doc.name,
        floors: Vec::new(),
        rooms: Vec::new(),
        items: Vec::new(),
    };
    let mut floor_ids = BTreeSet::new();
    let mut room_ids = BTreeSet::new();
    let mut item_ids = BTreeSet::new();
    for f in doc.floors {
        let fid = identifier(&f.id)?;
        if !floor_ids.insert(fid.clone()) {
            return Err(SceneError::Duplicate {
                layer: "floor",
                id: fid,
            });
        }
        sg.floors.push(Floor { id: fid.clone() });
        for r in f.rooms {
            let rid = identifier(&r.id)?;
            if !room_ids.insert(rid.clone()) {
                return Err(SceneError::Duplicate { layer: "room", id: rid });
            }
            let neighbors = r.neighbors.iter().map(|n| identifier(n)).collect::<Result<_, _>>()?;
            for it in r.items {
                let iid = identifier(&it.id)?;
                if !item_ids.insert(iid.clone()) {
                    return Err(SceneError::Duplicate { layer: "item", id: iid });
                }
                if it.affordances.iter().any(|a| a.trim().is_empty()) {
                    return Err(SceneError::EmptyAffordance(iid));
                }
                sg.items.push(Item {
                    id: iid,
                    name: it.name,
                    room: rid.clone(),
                    accessible: it.accessible,
                    states: it.states,
                    affordances: it.affordances.into_iter().collect(),
                });
            }
            sg.rooms.push(Room {
                id: rid,
                name: r.name,
                floor: fid.clone(),
                neighbors,
            });
        }
    }
    close_adjacency(&mut sg)?;
    check(&sg)?;
    if !sg.is_connected() {
        log::warn!("scene `{}`: room graph is disconnected", sg.name);
    }
    Ok(sg)
}

fn close_adjacency(sg: &mut SceneGraph) -> Result<(), SceneError> {
    let ids: BTreeSet<String> = sg.rooms.iter().map(|r| r.id.clone()).collect();
    let mut extra: Vec<(String, String)> = Vec::new();
    for r in &sg.rooms {
        for n in &r.neighbors {
            if n == &r.id {
                return Err(SceneError::SelfAdjacent(r.id.clone()));
            }
            if !ids.contains(n) {
                return Err(SceneError::DanglingNeighbor {
                    room: r.id.clone(),
                    neighbor: n.clone(),
                });
            }
            extra.push((n.clone(), r.id.clone()));
        }
    }
    for (room, n) in extra {
        if let Some(r) = sg.rooms.iter_mut().find(|r| r.id == room) {
            r.neighbors.insert(n);
        }
    }
    Ok(())
}

/// Checks the structural invariants of a graph built in memory.
pub fn check(sg: &SceneGraph) -> Result<(), SceneError> {
    let mut floors = BTreeSet::new();
    for f in &sg.floors {
        if !floors.insert(f.id.as_str()) {
            return Err(SceneError::Duplicate {
                layer: "floor",
                id: f.id.clone(),
            });
        }
    }
    let mut rooms = BTreeMap::new();
    for r in &sg.rooms {
        if !floors.contains(r.floor.as_str()) {
            return Err(SceneError::DanglingFloor {
                room: r.id.clone(),
                floor: r.floor.clone(),
            });
        }
        if rooms.insert(r.id.as_str(), r).is_some() {
            return Err(SceneError::Duplicate {
                layer: "room",
                id: r.id.clone(),
            });
        }
    }
    for r in &sg.rooms {
        for n in &r.neighbors {
            if n == &r.id {
                return Err(SceneError::SelfAdjacent(r.id.clone()));
            }
            let other = rooms.get(n.as_str()).ok_or_else(|| SceneError::DanglingNeighbor {
                room: r.id.clone(),
                neighbor: n.clone(),
            })?;
            if !other.neighbors.contains(&r.id) {
                return Err(SceneError::Malformed(format!(
                    "adjacency {} -> {} is not symmetric",
                    r.id, n
                )));
            }
        }
    }
    let mut items = BTreeSet::new();
    for i in &sg.items {
        if !rooms.contains_key(i.room.as_str()) {
            return Err(SceneError::DanglingRoom {
                item: i.id.clone(),
                room: i.room.clone(),
            });
        }
        if !items.insert(i.id.as_str()) {
            return Err(SceneError::Duplicate {
                layer: "item",
                id: i.id.clone(),
            });
        }
        if i.affordances.iter().any(|a| a.trim().is_empty()) {
            return Err(SceneError::EmptyAffordance(i.id.clone()));
        }
    }
    Ok(())
}

impl SceneGraph {
    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn item(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Unordered adjacent pairs `(a, b)` with `a < b`, sorted.
    pub fn adjacent_pairs(&self) -> Vec<(&str, &str)> {
        let mut pairs: Vec<(&str, &str)> = self
            .rooms
            .iter()
            .flat_map(|r| {
                r.neighbors
                    .iter()
                    .filter(move |n| r.id.as_str() < n.as_str())
                    .map(move |n| (r.id.as_str(), n.as_str()))
            })
            .collect();
        pairs.sort_unstable();
        pairs
    }

    pub fn is_connected(&self) -> bool {
        let Some(first) = self.rooms.first() else {
            return true;
        };
        let mut seen = BTreeSet::from([first.id.as_str()]);
        let mut stack = vec![first];
        while let Some(r) = stack.pop() {
            for n in &r.neighbors {
                if seen.insert(n.as_str()) {
                    stack.extend(self.room(n));
                }
            }
        }
        seen.len() == self.rooms.len()
    }

    /// The nested document form accepted by [`load_scene_graph`].
    pub fn to_json(&self) -> String {
        let doc = DocScene {
            name: self.name.clone(),
            floors: self
                .floors
                .iter()
                .map(|f| DocFloor {
                    id: f.id.clone(),
                    rooms: self
                        .rooms
                        .iter()
                        .filter(|r| r.floor == f.id)
                        .map(|r| DocRoom {
                            id: r.id.clone(),
                            name: r.name.clone(),
                            neighbors: r.neighbors.iter().cloned().collect(),
                            items: self
                                .items
                                .iter()
                                .filter(|i| i.room == r.id)
                                .map(|i| DocItem {
                                    id: i.id.clone(),
                                    name: i.name.clone(),
                                    accessible: i.accessible,
                                    states: i.states.clone(),
                                    affordances: i.affordances.iter().cloned().collect(),
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("scene serializes")
    }
}

/// Items sorted by id.
pub fn list_items(sg: &SceneGraph) -> Vec<&Item> {
    let mut items: Vec<&Item> = sg.items.iter().collect();
    items.sort_by(|a, b| a.id.cmp(&b.id));
    items
}

/// Copy of `sg` keeping only the items in `keep`. Floors, rooms and
/// adjacency are untouched.
pub fn prune<S: AsRef<str>>(sg: &SceneGraph, keep: &[S]) -> Result<SceneGraph, SceneError> {
    let keep: BTreeSet<&str> = keep.iter().map(AsRef::as_ref).collect();
    if let Some(unknown) = keep.iter().find(|k| sg.item(k).is_none()) {
        return Err(SceneError::UnknownItem(unknown.to_string()));
    }
    Ok(SceneGraph {
        name: sg.name.clone(),
        floors: sg.floors.clone(),
        rooms: sg.rooms.clone(),
        items: sg
            .items
            .iter()
            .filter(|i| keep.contains(i.id.as_str()))
            .cloned()
            .collect(),
    })
}
