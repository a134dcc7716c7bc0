//! Size comparison between a migration script and the SQL it stands for.

use std::fmt;

use serde::Serialize;

/// A percentage held in tenths, so `18.3%` is `Percent(183)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Percent(pub i64);

impl Percent {
    /// `(sql - dsl) / sql * 100`, rounded half away from zero to one
    /// decimal. `None` when `sql` is zero.
    pub fn improvement(sql: usize, dsl: usize) -> Option<Percent> {
        if sql == 0 {
            return None;
        }
        let num = (sql as i128 - dsl as i128) * 1000;
        let den = sql as i128;
        let tenths = (2 * num.abs() + den) / (2 * den);
        Some(Percent((num.signum() * tenths) as i64))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        write!(f, "{sign}{}.{}%", self.0.abs() / 10, self.0.abs() % 10)
    }
}

impl Serialize for Percent {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

/// Non-blank lines.
pub fn count_lines(text: &str) -> usize {
    text.lines().filter(|l| !l.trim().is_empty()).count()
}

/// Characters other than line terminators.
pub fn count_chars(text: &str) -> usize {
    text.chars().filter(|c| !matches!(c, '\n' | '\r')).count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SizeReport {
    pub loc_dsl: usize,
    pub loc_sql: usize,
    pub chars_dsl: usize,
    pub chars_sql: usize,
    pub loc_improvement_pct: Option<Percent>,
    pub chars_improvement_pct: Option<Percent>,
}

impl SizeReport {
    pub fn from_counts(loc_sql: usize, loc_dsl: usize, chars_sql: usize, chars_dsl: usize) -> Self {
        Self {
            loc_dsl,
            loc_sql,
            chars_dsl,
            chars_sql,
            loc_improvement_pct: Percent::improvement(loc_sql, loc_dsl),
            chars_improvement_pct: Percent::improvement(chars_sql, chars_dsl),
        }
    }

    pub fn measure(dsl: &str, sql: &str) -> Self {
        Self::from_counts(count_lines(sql), count_lines(dsl), count_chars(sql), count_chars(dsl))
    }

    /// Two-row table in the layout of a LOC / character comparison.
    pub fn to_table(&self) -> String {
        let pct = |p: Option<Percent>| p.map_or_else(|| "n/a".to_string(), |p| p.to_string());
        let rows = [
            ["", "SQL", "DSL", "Improvement"].map(String::from),
            [
                "Lines of code".to_string(),
                self.loc_sql.to_string(),
                self.loc_dsl.to_string(),
                pct(self.loc_improvement_pct),
            ],
            [
                "Characters".to_string(),
                self.chars_sql.to_string(),
                self.chars_dsl.to_string(),
                pct(self.chars_improvement_pct),
            ],
        ];
        let widths: Vec<usize> = (0..4).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap()).collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, cell)| {
                    if i == 0 {
                        format!("{cell:<w$}", w = widths[i])
                    } else {
                        format!("{cell:>w$}", w = widths[i])
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// One JSON object on one line.
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("size report serializes")
    }
}
