use std::collections::HashMap;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// Reserved tokens in id order.
pub const RESERVED: [&str; 4] = [PAD, UNK, CLS, SEP];

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const SEP_ID: usize = 3;

/// Dense token to id map; ids `0..4` are the reserved tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn with_reserved() -> Self {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in RESERVED {
            v.push(t);
        }
        v
    }

    /// Appends a token, returning its id; an existing token keeps its id.
    pub fn push(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rebuilds from `(token, id)` pairs, checking that ids are dense and the
    /// reserved tokens sit at their fixed ids.
    pub fn from_pairs(pairs: Vec<(String, usize)>) -> Result<Self, String> {
        let n = pairs.len();
        let mut slots: Vec<Option<String>> = vec![None; n];
        for (tok, id) in pairs {
            if id >= n {
                return Err(format!("id {id} out of range for {n} tokens"));
            }
            if slots[id].is_some() {
                return Err(format!("id {id} assigned twice"));
            }
            slots[id] = Some(tok);
        }
        let mut v = Vocabulary {
            tokens: Vec::with_capacity(n),
            index: HashMap::with_capacity(n),
        };
        for (id, tok) in slots.into_iter().enumerate() {
            let tok = tok.ok_or_else(|| format!("id {id} unassigned"))?;
            if v.index.insert(tok.clone(), id).is_some() {
                return Err(format!("token {tok:?} listed twice"));
            }
            v.tokens.push(tok);
        }
        for (id, r) in RESERVED.iter().enumerate() {
            if v.id(r) != Some(id) {
                return Err(format!("reserved token {r} must have id {id}"));
            }
        }
        Ok(v)
    }
}
