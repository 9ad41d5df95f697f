//! Identifier aliases and the small value types shared by every module.

pub type EntityId = u32;
pub type RelationId = u32;
/// Time step after granularity normalization (re-based so the earliest fact is 0).
pub type TimeStep = u32;

/// One timestamped fact `(subject, relation, object, time)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Quadruple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
    pub time: TimeStep,
}

impl Quadruple {
    pub fn new(subject: EntityId, relation: RelationId, object: EntityId, time: TimeStep) -> Self {
        Self { subject, relation, object, time }
    }
}

/// An outgoing edge the agent can take: relation, destination entity, edge time.
///
/// The static view of an action is `(relation, entity)`; the temporal view is
/// `(relation, time)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub relation: RelationId,
    pub entity: EntityId,
    pub time: TimeStep,
}

/// A link-prediction query `(subject, relation, ?, time)`.
///
/// `truth_object` is only populated for training and evaluation; the agent's
/// observation never exposes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Query {
    pub subject: EntityId,
    pub relation: RelationId,
    pub time: TimeStep,
    pub truth_object: Option<EntityId>,
}

impl Query {
    pub fn new(subject: EntityId, relation: RelationId, time: TimeStep) -> Self {
        Self { subject, relation, time, truth_object: None }
    }

    pub fn with_truth(subject: EntityId, relation: RelationId, time: TimeStep, truth: EntityId) -> Self {
        Self { subject, relation, time, truth_object: Some(truth) }
    }

    /// The forward query of a fact: predict the object.
    pub fn from_fact(fact: &Quadruple) -> Self {
        Self::with_truth(fact.subject, fact.relation, fact.time, fact.object)
    }
}
