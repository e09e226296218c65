//! Static lexical prefix tree. Each node holds one label; every lemma
//! variant is a root path ending in an exit that carries the lemma's
//! transcription output and LM tokens.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::lexicon::{LabelId, Lexicon};

pub type NodeId = u32;
pub type ExitId = u32;

pub const ROOT: NodeId = 0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub id: NodeId,
    /// `None` only for the root.
    pub label: Option<LabelId>,
    /// Sorted by label id.
    pub children: Vec<(LabelId, NodeId)>,
    pub exits: Vec<ExitId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exit {
    pub id: ExitId,
    pub lemma: usize,
    pub variant: usize,
    pub node: NodeId,
    pub orth: String,
    /// Empty for LM-transparent lemmata.
    pub lm_tokens: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct PrefixTree {
    nodes: Vec<TreeNode>,
    exits: Vec<Exit>,
    lexicon: Arc<Lexicon>,
}

#[derive(Default)]
struct Trie {
    children: BTreeMap<LabelId, Trie>,
    exits: Vec<(usize, usize)>,
}

impl PrefixTree {
    /// Builds the tree with node ids assigned depth-first in label-id order.
    pub fn build(lexicon: Arc<Lexicon>) -> Self {
        let mut trie = Trie::default();
        for (li, lemma) in lexicon.lemmata().iter().enumerate() {
            for (vi, variant) in lemma.variants.iter().enumerate() {
                let mut cur = &mut trie;
                for &label in variant {
                    cur = cur.children.entry(label).or_default();
                }
                cur.exits.push((li, vi));
            }
        }

        let mut tree = PrefixTree {
            nodes: Vec::new(),
            exits: Vec::new(),
            lexicon,
        };
        tree.number(&trie, None);
        tree
    }

    fn number(&mut self, trie: &Trie, label: Option<LabelId>) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(TreeNode {
            id,
            label,
            children: Vec::with_capacity(trie.children.len()),
            exits: Vec::new(),
        });
        for &(lemma, variant) in &trie.exits {
            let exit_id = self.exits.len() as ExitId;
            let l = &self.lexicon.lemmata()[lemma];
            self.exits.push(Exit {
                id: exit_id,
                lemma,
                variant,
                node: id,
                orth: l.orth.clone(),
                lm_tokens: l.lm_tokens.clone().unwrap_or_default(),
            });
            self.nodes[id as usize].exits.push(exit_id);
        }
        for (&child_label, child) in &trie.children {
            let child_id = self.number(child, Some(child_label));
            self.nodes[id as usize].children.push((child_label, child_id));
        }
        id
    }

    pub fn lexicon(&self) -> &Arc<Lexicon> {
        &self.lexicon
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn exits(&self) -> &[Exit] {
        &self.exits
    }

    pub fn node(&self, id: NodeId) -> Option<&TreeNode> {
        self.nodes.get(id as usize)
    }

    pub fn exit(&self, id: ExitId) -> &Exit {
        &self.exits[id as usize]
    }

    pub fn node_successors(&self, id: NodeId) -> Option<&[(LabelId, NodeId)]> {
        self.node(id).map(|n| n.children.as_slice())
    }

    pub fn node_exits(&self, id: NodeId) -> Option<Vec<&Exit>> {
        self.node(id)
            .map(|n| n.exits.iter().map(|&e| &self.exits[e as usize]).collect())
    }

    /// True when every non-root node is a leaf with exactly one exit, as for
    /// open-vocabulary lexica.
    pub fn is_flat(&self) -> bool {
        self.nodes[1..].iter().all(|n| n.children.is_empty() && n.exits.len() == 1)
    }

    /// One line per node: `NODE <id> <label-sym> children=[..] exits=[..]`.
    pub fn dump(&self) -> String {
        let alphabet = self.lexicon.alphabet();
        let mut out = String::new();
        for node in &self.nodes {
            let label = node.label.map_or("<root>", |l| alphabet.symbol(l));
            let children: Vec<String> = node.children.iter().map(|(_, c)| c.to_string()).collect();
            let exits: Vec<&str> = node
                .exits
                .iter()
                .map(|&e| self.exits[e as usize].orth.as_str())
                .collect();
            let _ = writeln!(
                out,
                "NODE {} {} children=[{}] exits=[{}]",
                node.id,
                label,
                children.join(","),
                exits.join(",")
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{build_open_vocab, parse_lexicon, LabelAlphabet};

    fn cat_car() -> PrefixTree {
        let lex = parse_lexicon("LABELS\tk a t r\nLEMMA\tcat\tcat\tk a t\nLEMMA\tcar\tcar\tk a r\n").unwrap();
        PrefixTree::build(Arc::new(lex))
    }

    #[test]
    fn shares_prefixes() {
        let tree = cat_car();
        assert_eq!(tree.nodes().len(), 5);
        assert_eq!(
            tree.dump(),
            "NODE 0 <root> children=[1] exits=[]\n\
             NODE 1 k children=[2] exits=[]\n\
             NODE 2 a children=[3,4] exits=[]\n\
             NODE 3 t children=[] exits=[cat]\n\
             NODE 4 r children=[] exits=[car]\n"
        );
    }

    #[test]
    fn successors_and_exits() {
        let tree = cat_car();
        assert_eq!(tree.node_successors(ROOT).unwrap(), &[(0, 1)]);
        assert_eq!(tree.node_successors(2).unwrap(), &[(2, 3), (3, 4)]);
        assert!(tree.node_successors(3).unwrap().is_empty());
        assert!(tree.node_successors(99).is_none());
        let exits = tree.node_exits(3).unwrap();
        assert_eq!(exits.len(), 1);
        assert_eq!(exits[0].orth, "cat");
        assert!(tree.node_exits(ROOT).unwrap().is_empty());
        assert!(tree.node_exits(42).is_none());
    }

    #[test]
    fn open_vocab_is_flat() {
        let a = LabelAlphabet::new(["a", "b", "c", "<b>"])
            .unwrap()
            .with_specials(Some("<b>"), None)
            .unwrap();
        let tree = PrefixTree::build(Arc::new(build_open_vocab(&a).unwrap()));
        assert_eq!(tree.nodes().len(), 4);
        assert!(tree.nodes()[1..].iter().all(|n| n.exits.len() == 1 && n.children.is_empty()));
        assert!(tree.is_flat());
        assert!(!cat_car().is_flat());
    }

    #[test]
    fn homophones_share_a_node() {
        let lex = parse_lexicon("LABELS\ta b\nLEMMA\tx\tx\ta b\nLEMMA\ty\ty\ta b\n").unwrap();
        let tree = PrefixTree::build(Arc::new(lex));
        let exits = tree.node_exits(2).unwrap();
        assert_eq!(exits.iter().map(|e| e.orth.as_str()).collect::<Vec<_>>(), ["x", "y"]);
        assert_eq!(tree.exits().len(), 2);
    }

    #[test]
    fn rebuild_is_identical() {
        let a = cat_car();
        let b = PrefixTree::build(a.lexicon().clone());
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.exits(), b.exits());
    }
}
