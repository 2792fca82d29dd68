use std::fmt;

use crate::graph::Fields;

/// A nested phrase-structure tree, the shape read from and written to
/// bracketed formats.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Phrase { fields: Fields, children: Vec<TreeNode> },
    Word { fields: Fields },
    Trace { fields: Fields },
}

fn one(key: &str, value: &str) -> Fields {
    let mut f = Fields::new();
    f.insert(key.to_string(), value.to_string());
    f
}

impl TreeNode {
    pub fn phrase(label: &str, children: Vec<TreeNode>) -> TreeNode {
        TreeNode::Phrase {
            fields: one("label", label),
            children,
        }
    }

    /// A phrase without a label, as created by the structural edits.
    pub fn unlabeled(children: Vec<TreeNode>) -> TreeNode {
        TreeNode::Phrase {
            fields: Fields::new(),
            children,
        }
    }

    pub fn word(form: &str) -> TreeNode {
        TreeNode::Word {
            fields: one("form", form),
        }
    }

    pub fn trace(marker: &str, coindex: Option<&str>) -> TreeNode {
        let mut fields = one("form", marker);
        if let Some(c) = coindex {
            fields.insert("coindex".into(), c.into());
        }
        TreeNode::Trace { fields }
    }

    pub fn fields(&self) -> &Fields {
        match self {
            TreeNode::Phrase { fields, .. }
            | TreeNode::Word { fields }
            | TreeNode::Trace { fields } => fields,
        }
    }

    pub fn fields_mut(&mut self) -> &mut Fields {
        match self {
            TreeNode::Phrase { fields, .. }
            | TreeNode::Word { fields }
            | TreeNode::Trace { fields } => fields,
        }
    }

    pub fn children(&self) -> &[TreeNode] {
        match self {
            TreeNode::Phrase { children, .. } => children,
            _ => &[],
        }
    }

    pub fn label(&self) -> Option<&str> {
        self.fields()
            .get("label")
            .map(String::as_str)
            .filter(|l| !l.is_empty())
    }

    /// Word forms at the leaves, skipping traces.
    pub fn surface(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_surface(&mut out);
        out
    }

    fn collect_surface(&self, out: &mut Vec<String>) {
        match self {
            TreeNode::Phrase { children, .. } => {
                children.iter().for_each(|c| c.collect_surface(out))
            }
            TreeNode::Word { fields } => {
                out.push(fields.get("form").cloned().unwrap_or_default())
            }
            TreeNode::Trace { .. } => {}
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(TreeNode::node_count).sum::<usize>()
    }

    /// Drops every field except labels and forms.
    pub fn strip_to_shape(&self) -> TreeNode {
        let keep = |f: &Fields, key: &str| {
            let mut out = Fields::new();
            if let Some(v) = f.get(key) {
                out.insert(key.to_string(), v.clone());
            }
            out
        };
        match self {
            TreeNode::Phrase { fields, children } => TreeNode::Phrase {
                fields: keep(fields, "label"),
                children: children.iter().map(TreeNode::strip_to_shape).collect(),
            },
            TreeNode::Word { fields } => TreeNode::Word {
                fields: keep(fields, "form"),
            },
            TreeNode::Trace { fields } => TreeNode::Trace {
                fields: keep(fields, "form"),
            },
        }
    }
}

/// Compact bracketed rendering: unlabeled phrases show as `•`.
impl fmt::Display for TreeNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeNode::Phrase { children, .. } => {
                write!(f, "({}", self.label().unwrap_or("•"))?;
                for c in children {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
            TreeNode::Word { fields } => {
                write!(f, "{}", fields.get("form").map(String::as_str).unwrap_or(""))
            }
            TreeNode::Trace { fields } => {
                write!(f, "{}", fields.get("form").map(String::as_str).unwrap_or("*"))?;
                if let Some(c) = fields.get("coindex") {
                    write!(f, "-{c}")?;
                }
                Ok(())
            }
        }
    }
}
