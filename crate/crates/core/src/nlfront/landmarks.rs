//! Landmark files: the symbol alphabet with glosses and task bindings.
//!
//! ```toml
//! [[landmark]]
//! identifier = "robot_at_loc_l1"   # formula atom
//! class = "location"               # location | condition | action
//! description = "line 1"
//! aliases = ["row 1"]              # optional
//! fluent = "(robot-at l1)"         # or: action = "move"; both optional
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::NlError;
use crate::compiler::{AtomBinding, AtomMap};
use crate::ltlf::Atom;
use crate::pddl::{GroundAtom, GroundTask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolClass {
    Location,
    Condition,
    Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub identifier: Atom,
    pub class: SymbolClass,
    pub description: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
}

impl Landmark {
    pub fn new(identifier: &str, class: SymbolClass, description: &str) -> Result<Self, NlError> {
        Ok(Landmark {
            identifier: Atom::new(identifier).map_err(|e| NlError::Landmarks(e.to_string()))?,
            class,
            description: description.to_string(),
            aliases: Vec::new(),
            fluent: None,
            action: None,
        })
    }

    /// Description first, then aliases.
    pub fn mentions(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.description.as_str()).chain(self.aliases.iter().map(String::as_str))
    }

    pub fn binding(&self) -> Result<Option<AtomBinding>, NlError> {
        match (&self.fluent, &self.action) {
            (Some(_), Some(_)) => Err(NlError::Landmarks(format!(
                "{} binds both a fluent and an action",
                self.identifier
            ))),
            (Some(f), None) => GroundAtom::parse(f)
                .map(|a| Some(AtomBinding::Fluent(a)))
                .ok_or_else(|| NlError::Landmarks(format!("{}: bad fluent `{f}`", self.identifier))),
            (None, Some(a)) => Ok(Some(AtomBinding::Action(a.clone()))),
            (None, None) => Ok(None),
        }
    }
}

/// The symbols formulas may mention, partitioned into locations, conditions
/// and actions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymbolAlphabet {
    #[serde(rename = "landmark", default)]
    landmarks: Vec<Landmark>,
}

impl SymbolAlphabet {
    pub fn new(landmarks: Vec<Landmark>) -> Result<Self, NlError> {
        let mut seen = BTreeSet::new();
        for l in &landmarks {
            if l.description.trim().is_empty() {
                return Err(NlError::Landmarks(format!("{} has an empty description", l.identifier)));
            }
            if !seen.insert(l.identifier.clone()) {
                return Err(NlError::Landmarks(format!("duplicate identifier {}", l.identifier)));
            }
            l.binding()?;
        }
        Ok(SymbolAlphabet { landmarks })
    }

    pub fn parse(text: &str) -> Result<Self, NlError> {
        let raw: SymbolAlphabet = toml::from_str(text).map_err(|e| NlError::Landmarks(e.to_string()))?;
        SymbolAlphabet::new(raw.landmarks)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, NlError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NlError::Landmarks(format!("cannot read {}: {e}", path.display())))?;
        SymbolAlphabet::parse(&text)
    }

    pub fn vineyard() -> Self {
        SymbolAlphabet::parse(crate::fixtures::VINEYARD_LANDMARKS).expect("fixture landmarks are valid")
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn get(&self, identifier: &str) -> Option<&Landmark> {
        self.landmarks.iter().find(|l| l.identifier.as_str() == identifier)
    }

    pub fn of_class(&self, class: SymbolClass) -> impl Iterator<Item = &Landmark> {
        self.landmarks.iter().filter(move |l| l.class == class)
    }

    pub fn count(&self, class: SymbolClass) -> usize {
        self.of_class(class).count()
    }

    /// Bindings for every landmark that has one, checked against the task.
    pub fn atom_map(&self, task: &GroundTask) -> Result<AtomMap, NlError> {
        let mut map = AtomMap::new();
        for l in &self.landmarks {
            let Some(b) = l.binding()? else { continue };
            match &b {
                AtomBinding::Fluent(f) if task.fluent_id(f).is_none() => {
                    return Err(NlError::Landmarks(format!(
                        "{} is bound to {f}, which the task does not contain",
                        l.identifier
                    )))
                }
                AtomBinding::Action(a) if !task.actions().iter().any(|x| x.schema == *a || x.name() == *a) => {
                    return Err(NlError::Landmarks(format!(
                        "{} is bound to action `{a}`, which the task does not contain",
                        l.identifier
                    )))
                }
                _ => {}
            }
            map.insert(l.identifier.clone(), b);
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vineyard_alphabet_has_23_symbols() {
        let a = SymbolAlphabet::vineyard();
        assert_eq!(a.len(), 23);
        assert_eq!(a.count(SymbolClass::Location), 4);
        assert_eq!(a.count(SymbolClass::Condition), 13);
        assert_eq!(a.count(SymbolClass::Action), 6);
    }

    #[test]
    fn rejects_duplicates_and_empty_descriptions() {
        let l = Landmark::new("x", SymbolClass::Location, "somewhere").unwrap();
        assert!(SymbolAlphabet::new(vec![l.clone(), l.clone()]).is_err());
        let mut e = l.clone();
        e.description = " ".into();
        assert!(SymbolAlphabet::new(vec![e]).is_err());
        let mut both = l;
        both.fluent = Some("(p)".into());
        both.action = Some("go".into());
        assert!(SymbolAlphabet::new(vec![both]).is_err());
        assert!(SymbolAlphabet::parse("[[landmark]]\nidentifier = \"Bad Name\"\nclass = \"action\"\ndescription = \"d\"").is_err());
    }
}
