use std::num::NonZeroUsize;
use std::sync::Arc;

use lru::LruCache;

use super::{score_tokens, LanguageModel, LmState};
use crate::error::LmError;
use crate::prefix_tree::{NodeId, PrefixTree};

/// Per-node minimum LM cost over the exits reachable below the node.
#[derive(Clone, Debug, PartialEq)]
pub struct LookaheadTable {
    values: Vec<f64>,
}

impl LookaheadTable {
    pub fn value(&self, node: NodeId) -> f64 {
        self.values[node as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn build_lookahead_table(
    tree: &PrefixTree,
    lm: &dyn LanguageModel,
    context: &LmState,
) -> Result<LookaheadTable, LmError> {
    let mut values = vec![f64::INFINITY; tree.nodes().len()];
    for exit in tree.exits() {
        let (cost, _) = score_tokens(lm, context, &exit.lm_tokens)?;
        let v = &mut values[exit.node as usize];
        *v = v.min(cost);
    }
    // Children always carry larger ids than their parent.
    for node in tree.nodes().iter().rev() {
        let best = node
            .children
            .iter()
            .map(|&(_, c)| values[c as usize])
            .fold(values[node.id as usize], f64::min);
        values[node.id as usize] = best;
    }
    Ok(LookaheadTable { values })
}

/// Lookahead tables by LM context. The unigram table is kept separately and
/// never evicted.
pub struct LookaheadCache {
    unigram: Option<Arc<LookaheadTable>>,
    tables: LruCache<LmState, Arc<LookaheadTable>>,
    built: usize,
}

impl LookaheadCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            unigram: None,
            tables: LruCache::new(NonZeroUsize::new(capacity.max(1)).unwrap()),
            built: 0,
        }
    }

    pub fn unigram(&mut self, tree: &PrefixTree, lm: &dyn LanguageModel) -> Result<Arc<LookaheadTable>, LmError> {
        if let Some(t) = &self.unigram {
            return Ok(t.clone());
        }
        let table = Arc::new(build_lookahead_table(tree, lm, &lm.unigram_state())?);
        self.built += 1;
        self.unigram = Some(table.clone());
        Ok(table)
    }

    pub fn get(
        &mut self,
        tree: &PrefixTree,
        lm: &dyn LanguageModel,
        context: &LmState,
    ) -> Result<Arc<LookaheadTable>, LmError> {
        if let Some(t) = self.tables.get(context) {
            return Ok(t.clone());
        }
        let table = Arc::new(build_lookahead_table(tree, lm, context)?);
        self.built += 1;
        self.tables.put(context.clone(), table.clone());
        Ok(table)
    }

    /// Number of tables computed so far.
    pub fn built(&self) -> usize {
        self.built
    }
}
