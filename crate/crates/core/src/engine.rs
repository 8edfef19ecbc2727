use crate::index::TableIndex;
use crate::kb::KbStore;

/// An immutable knowledge base plus table index pair. Everything the
/// rankers need; safe to share across threads.
#[derive(Debug, Clone)]
pub struct Engine {
    pub kb: KbStore,
    pub index: TableIndex,
}

impl Engine {
    pub fn new(kb: KbStore, index: TableIndex) -> Self {
        Engine { kb, index }
    }
}
