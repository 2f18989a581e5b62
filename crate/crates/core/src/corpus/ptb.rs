//! Bracketed (Penn Treebank style) constituency trees.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// A constituency tree node. Leaves carry the token text as their label and
/// have no children; a preterminal has exactly one leaf child.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseTree {
    pub label: String,
    pub children: Vec<ParseTree>,
}

impl ParseTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        ParseTree {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> Self {
        ParseTree {
            label: label.into(),
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_preterminal(&self) -> bool {
        self.children.len() == 1 && self.children[0].is_leaf()
    }

    pub fn num_leaves(&self) -> usize {
        if self.is_leaf() {
            1
        } else {
            self.children.iter().map(ParseTree::num_leaves).sum()
        }
    }

    /// Leaf labels in left-to-right order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.is_leaf() {
            out.push(&self.label);
        } else {
            for child in &self.children {
                child.collect_leaves(out);
            }
        }
    }

    /// (word, tag) for every preterminal, left to right.
    pub fn tagged_words(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        self.collect_tagged(&mut out);
        out
    }

    fn collect_tagged(&self, out: &mut Vec<(String, String)>) {
        if self.is_preterminal() {
            out.push((self.children[0].label.clone(), self.label.clone()));
        } else if self.is_leaf() {
            out.push((self.label.clone(), String::new()));
        } else {
            for child in &self.children {
                child.collect_tagged(out);
            }
        }
    }

    /// The deepest node whose leaf span contains every leaf index in
    /// `[first, last]`. Returns `None` when the range is outside the tree.
    pub fn covering_subtree(&self, first: usize, last: usize) -> Option<&ParseTree> {
        if first > last || last >= self.num_leaves() {
            return None;
        }
        let mut node = self;
        let (mut lo, mut hi) = (first, last);
        'descend: loop {
            let mut offset = 0;
            for child in &node.children {
                let width = child.num_leaves();
                if lo >= offset && hi < offset + width {
                    node = child;
                    lo -= offset;
                    hi -= offset;
                    continue 'descend;
                }
                offset += width;
            }
            return Some(node);
        }
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_leaf() {
            return f.write_str(&self.label);
        }
        f.write_str("(")?;
        f.write_str(&self.label)?;
        for child in &self.children {
            f.write_str(" ")?;
            write!(f, "{child}")?;
        }
        f.write_str(")")
    }
}

/// Parse a bracketed tree such as `(NP (DT the) (NN cat))`.
///
/// An outer bracket without a label (as in `( (S ...) )`) yields a root with
/// an empty label.
pub fn parse_ptb(s: &str) -> Result<ParseTree> {
    let mut parser = Parser { src: s, pos: 0 };
    parser.skip_ws();
    if parser.peek() != Some(b'(') {
        return Err(parser.error("expected '('"));
    }
    let tree = parser.node()?;
    parser.skip_ws();
    if parser.pos < s.len() {
        return Err(parser.error("trailing input after tree"));
    }
    Ok(tree)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn error(&self, message: &str) -> Error {
        Error::Tree {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn atom(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() || b == b'(' || b == b')' {
                break;
            }
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn node(&mut self) -> Result<ParseTree> {
        // at '('
        self.pos += 1;
        self.skip_ws();
        let label = match self.peek() {
            None => return Err(self.error("unexpected end of input")),
            Some(b'(') | Some(b')') => String::new(),
            Some(_) => self.atom().to_string(),
        };
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Err(self.error("unexpected end of input")),
                Some(b')') => {
                    self.pos += 1;
                    return Ok(ParseTree { label, children });
                }
                Some(b'(') => children.push(self.node()?),
                Some(_) => children.push(ParseTree::leaf(self.atom())),
            }
        }
    }
}

/// One `LHS→RHS1 RHS2 …` string per internal node that is not a
/// preterminal. Lexical productions and unlabeled nodes are skipped.
pub fn production_rules(tree: &ParseTree) -> BTreeSet<String> {
    let mut rules = BTreeSet::new();
    collect_rules(tree, &mut rules);
    rules
}

fn collect_rules(tree: &ParseTree, rules: &mut BTreeSet<String>) {
    if tree.is_leaf() || tree.children.iter().all(ParseTree::is_leaf) {
        return;
    }
    if !tree.label.is_empty() {
        let rhs: Vec<&str> = tree.children.iter().map(|c| c.label.as_str()).collect();
        rules.insert(format!("{}→{}", tree.label, rhs.join(" ")));
    }
    for child in &tree.children {
        collect_rules(child, rules);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_noun_phrase() {
        let t = parse_ptb("(NP (DT the) (NN cat))").unwrap();
        assert_eq!(t.label, "NP");
        assert_eq!(t.children.len(), 2);
        assert!(t.children.iter().all(ParseTree::is_preterminal));
        assert_eq!(t.leaves(), vec!["the", "cat"]);
    }

    #[test]
    fn single_preterminal() {
        let t = parse_ptb("(X a)").unwrap();
        assert!(t.is_preterminal());
        assert_eq!(t.children[0].label, "a");
    }

    #[test]
    fn unbalanced_reports_end_offset() {
        let s = "(NP (DT the";
        match parse_ptb(s) {
            Err(Error::Tree { offset, .. }) => assert_eq!(offset, s.len()),
            other => panic!("expected tree error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_close_is_error() {
        assert!(parse_ptb("(X a))").is_err());
        assert!(parse_ptb("X").is_err());
    }

    #[test]
    fn unlabeled_root_wrapper() {
        let t = parse_ptb("( (S (NP (DT the)(NN cat)) (VP (VBD sat))) )").unwrap();
        assert_eq!(t.label, "");
        assert_eq!(t.leaves(), vec!["the", "cat", "sat"]);
        assert_eq!(
            t.tagged_words(),
            vec![
                ("the".to_string(), "DT".to_string()),
                ("cat".to_string(), "NN".to_string()),
                ("sat".to_string(), "VBD".to_string())
            ]
        );
    }

    #[test]
    fn rules_of_small_sentence() {
        let t = parse_ptb("(S (NP (DT the)(NN cat)) (VP (VBD sat)))").unwrap();
        assert_eq!(production_rules(&t), set(&["S→NP VP", "NP→DT NN", "VP→VBD"]));
        let wrapped = parse_ptb("( (S (NP (DT the)(NN cat)) (VP (VBD sat))) )").unwrap();
        assert_eq!(production_rules(&wrapped), production_rules(&t));
    }

    #[test]
    fn preterminal_has_no_rules() {
        assert!(production_rules(&parse_ptb("(NN cat)").unwrap()).is_empty());
    }

    #[test]
    fn repeated_rule_counted_once() {
        let t = parse_ptb("(S (NP (DT a) (NN b)) (VP (VBD c) (NP (DT d) (NN e))))").unwrap();
        let rules = production_rules(&t);
        assert_eq!(rules, set(&["S→NP VP", "NP→DT NN", "VP→VBD NP"]));
    }

    #[test]
    fn covering_subtree_descends_to_minimal_node() {
        let t = parse_ptb("( (S (NP (DT the)(NN cat)) (VP (VBD sat))) )").unwrap();
        assert_eq!(t.covering_subtree(0, 1).unwrap().label, "NP");
        assert_eq!(t.covering_subtree(0, 2).unwrap().label, "S");
        assert_eq!(t.covering_subtree(2, 2).unwrap().label, "sat");
        assert!(t.covering_subtree(1, 3).is_none());
    }

    #[test]
    fn display_round_trip() {
        let s = "(S (NP (DT the) (NN cat)) (VP (VBD sat)))";
        let t = parse_ptb(s).unwrap();
        assert_eq!(t.to_string(), s);
    }
}
