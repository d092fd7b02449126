/// Protected group of a pair: a mixed-radix code over the protected
/// attributes' value indices, in schema order. Decode with
/// [`AttributeSchema::group_values`](super::AttributeSchema::group_values).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey(pub u32);

/// Legitimate-attribute combination of a pair: per legitimate attribute the
/// unordered pair of the two images' values, packed into one code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComboKey(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PairGroup {
    Group(GroupKey),
    /// Negative pair whose identities differ in some protected attribute.
    Mixed,
}

impl PairGroup {
    pub fn key(self) -> Option<GroupKey> {
        match self {
            PairGroup::Group(g) => Some(g),
            PairGroup::Mixed => None,
        }
    }
}
