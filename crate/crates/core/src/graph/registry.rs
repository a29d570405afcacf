use std::fmt;

use super::GraphError;

/// Identifier of an edge type within an [`EdgeTypeRegistry`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeType(pub usize);

impl EdgeType {
    /// Sequential links `i -> i+1`.
    pub const SEQ: EdgeType = EdgeType(0);
    /// Inverse of [`EdgeType::SEQ`].
    pub const SEQ_INV: EdgeType = EdgeType(1);

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeTypeEntry {
    pub id: EdgeType,
    pub name: String,
    pub is_inverse: bool,
    pub partner: EdgeType,
}

/// Edge types in registration order. Each user type is registered together
/// with its inverse, which takes the next id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeTypeRegistry {
    entries: Vec<EdgeTypeEntry>,
}

impl Default for EdgeTypeRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl EdgeTypeRegistry {
    /// A registry holding only `seq` (id 0) and `seq_inv` (id 1).
    pub fn new() -> Self {
        let mut r = EdgeTypeRegistry { entries: Vec::new() };
        r.register("seq").expect("fresh registry");
        r
    }

    /// Registry with `seq` and `coref` pairs, the layout used for text.
    pub fn with_coref() -> Self {
        let mut r = Self::new();
        r.register("coref").expect("fresh registry");
        r
    }

    /// Registers `name` and its inverse `name_inv`.
    pub fn register(&mut self, name: &str) -> Result<(EdgeType, EdgeType), GraphError> {
        let inv_name = format!("{name}_inv");
        if self.lookup(name).is_some() || self.lookup(&inv_name).is_some() {
            return Err(GraphError::DuplicateEdgeType(name.to_string()));
        }
        let id = EdgeType(self.entries.len());
        let inv = EdgeType(id.0 + 1);
        self.entries.push(EdgeTypeEntry {
            id,
            name: name.to_string(),
            is_inverse: false,
            partner: inv,
        });
        self.entries.push(EdgeTypeEntry {
            id: inv,
            name: inv_name,
            is_inverse: true,
            partner: id,
        });
        Ok((id, inv))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, e: EdgeType) -> bool {
        e.0 < self.entries.len()
    }

    pub fn entry(&self, e: EdgeType) -> &EdgeTypeEntry {
        &self.entries[e.0]
    }

    pub fn partner(&self, e: EdgeType) -> EdgeType {
        self.entries[e.0].partner
    }

    pub fn name(&self, e: EdgeType) -> &str {
        &self.entries[e.0].name
    }

    pub fn is_inverse(&self, e: EdgeType) -> bool {
        self.entries[e.0].is_inverse
    }

    pub fn lookup(&self, name: &str) -> Option<EdgeType> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EdgeTypeEntry> {
        self.entries.iter()
    }

    /// Non-inverse types, in id order.
    pub fn base_types(&self) -> Vec<EdgeType> {
        self.entries.iter().filter(|e| !e.is_inverse).map(|e| e.id).collect()
    }

    pub fn inverse_types(&self) -> Vec<EdgeType> {
        self.entries.iter().filter(|e| e.is_inverse).map(|e| e.id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_pair_present() {
        let r = EdgeTypeRegistry::new();
        assert_eq!(r.lookup("seq"), Some(EdgeType::SEQ));
        assert_eq!(r.lookup("seq_inv"), Some(EdgeType::SEQ_INV));
        assert_eq!(r.partner(EdgeType::SEQ), EdgeType::SEQ_INV);
    }

    #[test]
    fn first_user_type_follows_seq() {
        let mut r = EdgeTypeRegistry::new();
        let (c, ci) = r.register("coref").unwrap();
        assert_eq!((c, ci), (EdgeType(2), EdgeType(3)));
        assert_eq!(r.partner(c), ci);
        assert!(r.is_inverse(ci));
        assert_eq!(r.name(ci), "coref_inv");
    }

    #[test]
    fn partner_is_an_involution() {
        let mut r = EdgeTypeRegistry::new();
        for name in ["coref", "hyper", "link"] {
            r.register(name).unwrap();
        }
        for e in r.iter() {
            assert_eq!(r.partner(r.partner(e.id)), e.id);
            assert_ne!(r.partner(e.id), e.id);
        }
    }

    #[test]
    fn duplicate_registration_fails() {
        let mut r = EdgeTypeRegistry::new();
        r.register("coref").unwrap();
        assert!(matches!(r.register("coref"), Err(GraphError::DuplicateEdgeType(_))));
        assert!(r.register("seq").is_err());
    }
}
