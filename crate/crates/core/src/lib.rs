//! Subregular language classes as linear classifiers over Boolean predicate
//! features.

pub mod experiments;
pub mod languages;
pub mod learners;
pub mod minterm;
pub mod morphology;
pub mod predicates;
pub mod seeds;
pub mod strings;
