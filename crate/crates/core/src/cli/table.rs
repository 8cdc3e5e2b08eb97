use crate::spectral::fmt17;

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub quantity: String,
    pub theory: Option<f64>,
    pub oracle: Option<f64>,
    pub empirical: Option<f64>,
    pub note: String,
}

impl Row {
    pub fn new(quantity: impl Into<String>) -> Self {
        Row {
            quantity: quantity.into(),
            theory: None,
            oracle: None,
            empirical: None,
            note: String::new(),
        }
    }

    pub fn theory(mut self, v: f64) -> Self {
        self.theory = Some(v);
        self
    }

    pub fn oracle(mut self, v: f64) -> Self {
        self.oracle = Some(v);
        self
    }

    pub fn empirical(mut self, v: f64) -> Self {
        self.empirical = Some(v);
        self
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.note = n.into();
        self
    }
}

fn four(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3e}"),
        None => "-".into(),
    }
}

fn full(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

/// Aligned text table, 4 significant digits.
pub fn render_text(rows: &[Row]) -> String {
    let head = ["quantity", "theory", "oracle", "empirical", "note"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| [r.quantity.clone(), four(r.theory), four(r.oracle), four(r.empirical), r.note.clone()])
        .collect();
    let mut width = head.map(str::len);
    for c in &cells {
        for (w, s) in width.iter_mut().zip(c) {
            *w = (*w).max(s.chars().count());
        }
    }
    let line = |c: [&str; 5]| {
        let mut s = String::new();
        for (i, cell) in c.iter().enumerate() {
            if i == 4 {
                s.push_str(cell);
            } else {
                s.push_str(&format!("{cell:<w$}  ", w = width[i]));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(head);
    for c in &cells {
        out.push_str(&line([&c[0], &c[1], &c[2], &c[3], &c[4]]));
    }
    out
}

/// CSV with 17 significant digits; empty cells where a column does not apply.
pub fn render_csv(rows: &[Row]) -> String {
    let mut out = String::from("quantity,theory,oracle,empirical,note\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.quantity,
            full(r.theory),
            full(r.oracle),
            full(r.empirical),
            r.note.replace(',', ";")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders() {
        let rows = vec![Row::new("C_P").theory(1.0).oracle(0.5).note("a, b"), Row::new("x")];
        let t = render_text(&rows);
        assert!(t.contains("1.000e0") && t.lines().count() == 3);
        let c = render_csv(&rows);
        assert!(c.contains("C_P,1.0000000000000000e0,5.0000000000000000e-1,,a; b"));
    }
}
