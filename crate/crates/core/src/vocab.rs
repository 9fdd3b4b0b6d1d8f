//! Label and triplet vocabulary.
//!
//! Class labels (objects and attributes share one namespace) and relationship
//! labels get dense ids from 0 in order of first appearance. The relation named
//! [`IS_RELATION`] is special: its triplets form the attribute ("is") subset.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use hashbrown::{HashMap, HashSet};

use crate::error::{Error, Result};

/// Name of the attribute relation.
pub const IS_RELATION: &str = "is";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

/// Ordered `(subject, relation, object-or-attribute)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub label1: ClassId,
    pub relation: RelationId,
    pub label2: ClassId,
}

impl Triplet {
    pub fn new(label1: ClassId, relation: RelationId, label2: ClassId) -> Self {
        Self { label1, relation, label2 }
    }
}

/// Name to id lookup in one namespace.
#[derive(Debug, Clone, Default)]
struct Names {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Names {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }
}

#[derive(Debug, Clone, Default)]
pub struct TripletVocabulary {
    classes: Names,
    relations: Names,
    triplets: Vec<Triplet>,
    members: HashSet<Triplet>,
    pair_relations: HashMap<(ClassId, ClassId), Vec<RelationId>>,
    num_is: usize,
}

impl TripletVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from `(label1, relation, label2)` name triples.
    pub fn from_names<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut vocab = Self::new();
        for (l1, r, l2) in rows {
            vocab.insert(l1, r, l2)?;
        }
        Ok(vocab)
    }

    /// Adds a triplet, interning any new labels. Duplicates are rejected.
    pub fn insert(&mut self, label1: &str, relation: &str, label2: &str) -> Result<Triplet> {
        let t = Triplet::new(
            ClassId(self.classes.intern(label1)),
            RelationId(self.relations.intern(relation)),
            ClassId(self.classes.intern(label2)),
        );
        if !self.members.insert(t) {
            return Err(Error::DuplicateTriplet {
                label1: label1.to_string(),
                relation: relation.to_string(),
                label2: label2.to_string(),
            });
        }
        self.triplets.push(t);
        if relation == IS_RELATION {
            self.num_is += 1;
        } else {
            let rels = self.pair_relations.entry((t.label1, t.label2)).or_default();
            let pos = rels.partition_point(|r| *r < t.relation);
            rels.insert(pos, t.relation);
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Number of attribute ("is") triplets.
    pub fn is_len(&self) -> usize {
        self.num_is
    }

    /// Number of triplets connecting two objects.
    pub fn pair_len(&self) -> usize {
        self.triplets.len() - self.num_is
    }

    /// Distinct labels appearing in either label slot of any triplet.
    pub fn num_classes(&self) -> usize {
        self.classes.names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.names.len()
    }

    /// Distinct labels used by the given subset of triplets.
    pub fn count_classes_where(&self, is_subset: bool) -> usize {
        let mut seen = HashSet::new();
        for t in self.triplets.iter().filter(|t| self.is_attribute(t) == is_subset) {
            seen.insert(t.label1);
            seen.insert(t.label2);
        }
        seen.len()
    }

    /// Distinct relations used by the given subset of triplets.
    pub fn count_relations_where(&self, is_subset: bool) -> usize {
        let mut seen = HashSet::new();
        for t in self.triplets.iter().filter(|t| self.is_attribute(t) == is_subset) {
            seen.insert(t.relation);
        }
        seen.len()
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn is_triplets(&self) -> impl Iterator<Item = &Triplet> + '_ {
        self.triplets.iter().filter(move |t| self.is_attribute(t))
    }

    pub fn pair_triplets(&self) -> impl Iterator<Item = &Triplet> + '_ {
        self.triplets.iter().filter(move |t| !self.is_attribute(t))
    }

    pub fn contains(&self, t: &Triplet) -> bool {
        self.members.contains(t)
    }

    pub fn is_relation(&self) -> Option<RelationId> {
        self.relations.get(IS_RELATION).map(RelationId)
    }

    pub fn is_attribute(&self, t: &Triplet) -> bool {
        self.is_relation() == Some(t.relation)
    }

    /// Non-"is" relations valid for the ordered label pair, ascending by id.
    pub fn relations_for(&self, label1: ClassId, label2: ClassId) -> &[RelationId] {
        self.pair_relations.get(&(label1, label2)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.classes.get(name).map(ClassId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.get(name).map(RelationId)
    }

    pub fn class_name(&self, id: ClassId) -> &str {
        &self.classes.names[id.0 as usize]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations.names[id.0 as usize]
    }

    /// Resolves names to a triplet that must be a vocabulary member.
    pub fn lookup(&self, label1: &str, relation: &str, label2: &str) -> Result<Triplet> {
        let unknown = || Error::UnknownTriplet {
            label1: label1.to_string(),
            relation: relation.to_string(),
            label2: label2.to_string(),
        };
        let t = Triplet::new(
            self.class_id(label1).ok_or_else(unknown)?,
            self.relation_id(relation).ok_or_else(unknown)?,
            self.class_id(label2).ok_or_else(unknown)?,
        );
        if self.contains(&t) {
            Ok(t)
        } else {
            Err(unknown())
        }
    }

    /// Returns an error naming the triplet if it is not a member.
    pub fn check(&self, t: &Triplet) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::UnknownTriplet {
                label1: self.class_name(t.label1).to_string(),
                relation: self.relation_name(t.relation).to_string(),
                label2: self.class_name(t.label2).to_string(),
            })
        }
    }

    pub fn describe(&self, t: &Triplet) -> String {
        alloc::format!("{} {} {}", self.class_name(t.label1), self.relation_name(t.relation), self.class_name(t.label2))
    }
}

/// Anything that maps a label name from a detections file to a class id.
pub trait LabelResolver {
    fn resolve(&self, name: &str) -> Option<ClassId>;
    fn name_of(&self, id: ClassId) -> Option<&str>;
}

impl LabelResolver for TripletVocabulary {
    fn resolve(&self, name: &str) -> Option<ClassId> {
        self.class_id(name)
    }

    fn name_of(&self, id: ClassId) -> Option<&str> {
        self.classes.names.get(id.0 as usize).map(String::as_str)
    }
}
