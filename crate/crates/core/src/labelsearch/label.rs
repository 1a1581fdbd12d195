use crate::dataset::{AttributeKind, Schema};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

/// A Gaussian quantile interval `lower < A_j <= upper` drawn from one
/// cluster's distribution of attribute `attribute`.
///
/// `level` indexes the quantile set the interval was built from; a larger
/// level means a larger mass `q` and therefore a wider interval. Identity
/// (equality, hashing, ordering) is `(attribute, cluster, level)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Interval {
    pub attribute: usize,
    pub cluster: usize,
    pub level: usize,
    pub q: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    fn key(&self) -> (usize, usize, usize) {
        (self.attribute, self.cluster, self.level)
    }
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Interval {}

impl Hash for Interval {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

/// One proposition of a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Conjunct {
    /// `A_j = value`, with `value` indexing the attribute's value set.
    Eq { attribute: usize, value: u32 },
    Interval(Interval),
}

impl Conjunct {
    pub fn attribute(&self) -> usize {
        match self {
            Conjunct::Eq { attribute, .. } => *attribute,
            Conjunct::Interval(iv) => iv.attribute,
        }
    }

    fn sort_key(&self) -> (usize, u8, usize, usize) {
        match self {
            Conjunct::Eq { attribute, value } => (*attribute, 0, *value as usize, 0),
            Conjunct::Interval(iv) => (iv.attribute, 1, iv.cluster, iv.level),
        }
    }

    /// True when `self` is the same proposition as `other` or a more general
    /// one (an interval of the same origin with a larger or equal level).
    pub fn generalizes(&self, other: &Conjunct) -> bool {
        match (self, other) {
            (Conjunct::Eq { .. }, Conjunct::Eq { .. }) => self == other,
            (Conjunct::Interval(a), Conjunct::Interval(b)) => {
                a.attribute == b.attribute && a.cluster == b.cluster && a.level >= b.level
            }
            _ => false,
        }
    }

    pub fn describe(&self, schema: &Schema) -> String {
        match self {
            Conjunct::Eq { attribute, value } => {
                let attr = &schema.attributes[*attribute];
                match &attr.kind {
                    AttributeKind::Discrete { values } => {
                        format!("{}={}", attr.name, values[*value as usize])
                    }
                    AttributeKind::Continuous { .. } => format!("{}=#{}", attr.name, value),
                }
            }
            Conjunct::Interval(iv) => {
                let name = &schema.attributes[iv.attribute].name;
                format!("{}<{}<={}", fmt_bound(iv.lower), name, fmt_bound(iv.upper))
            }
        }
    }
}

fn fmt_bound(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

impl PartialOrd for Conjunct {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Conjunct {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

/// A conjunction of propositions, kept sorted by attribute index with at
/// most one conjunct per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Label {
    conjuncts: Vec<Conjunct>,
}

impl Label {
    pub fn empty() -> Self {
        Label::default()
    }

    /// Builds a label, sorting conjuncts into attribute order.
    ///
    /// Returns `None` if two conjuncts share an attribute.
    pub fn new(mut conjuncts: Vec<Conjunct>) -> Option<Self> {
        conjuncts.sort();
        if conjuncts
            .windows(2)
            .any(|w| w[0].attribute() == w[1].attribute())
        {
            return None;
        }
        Some(Label { conjuncts })
    }

    pub fn conjuncts(&self) -> &[Conjunct] {
        &self.conjuncts
    }

    pub fn len(&self) -> usize {
        self.conjuncts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conjuncts.is_empty()
    }

    /// The label with the conjunct at `index` removed.
    pub fn without(&self, index: usize) -> Label {
        let mut conjuncts = self.conjuncts.clone();
        conjuncts.remove(index);
        Label { conjuncts }
    }

    pub fn describe(&self, schema: &Schema) -> String {
        if self.conjuncts.is_empty() {
            return "(empty)".to_string();
        }
        self.conjuncts
            .iter()
            .map(|c| c.describe(schema))
            .collect::<Vec<_>>()
            .join(" & ")
    }
}

/// The immediate subconjunctions of `label`: one per deleted conjunct, in
/// the order "delete first", "delete second", ...
pub fn subconj(label: &Label) -> Vec<Label> {
    (0..label.len()).map(|i| label.without(i)).collect()
}

/// Whether `general` is a subconjunction of `specific`.
///
/// Every conjunct of `general` must be matched by a conjunct of `specific`
/// on the same attribute that it generalizes: equal `Eq` propositions, or
/// an interval of the same origin whose level is no larger.
pub fn is_subconjunction(general: &Label, specific: &Label) -> bool {
    general.conjuncts.iter().all(|g| {
        specific
            .conjuncts
            .iter()
            .find(|s| s.attribute() == g.attribute())
            .is_some_and(|s| g.generalizes(s))
    })
}
