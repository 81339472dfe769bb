//! Perturbed-prompt corpora and per-prompt distance tables for the eleven
//! subject categories, bundled at compile time.

use crate::error::{Error, Result};

pub const TABLES: [&str; 2] = ["sd3", "sdxl"];

macro_rules! bundle {
    ($kind:literal, $ext:literal, $table:literal; $($cat:literal),*) => {
        &[$(($cat, include_str!(concat!("../fixtures/", $kind, "/", $table, "/", $cat, ".", $ext)))),*]
    };
}

type Bundle = &'static [(&'static str, &'static str)];

const SD3_PROMPTS: Bundle = bundle!("prompts", "txt", "sd3"; "backpack", "backpack_dog", "candle", "cat", "clock",
    "colorful_sneaker", "dog2", "dog3", "dog_data", "teapot", "vase");
const SDXL_PROMPTS: Bundle = bundle!("prompts", "txt", "sdxl"; "backpack", "backpack_dog", "candle", "cat", "clock",
    "colorful_sneaker", "dog2", "dog3", "dog_data", "teapot", "vase");
const SD3_TABLES: Bundle = bundle!("tables", "csv", "sd3"; "backpack", "backpack_dog", "candle", "cat", "clock",
    "colorful_sneaker", "dog2", "dog3", "dog_data", "teapot", "vase");
const SDXL_TABLES: Bundle = bundle!("tables", "csv", "sdxl"; "backpack", "backpack_dog", "candle", "cat", "clock",
    "colorful_sneaker", "dog2", "dog3", "dog_data", "teapot", "vase");

fn lookup(bundle: Bundle, table: &str, category: &str) -> Result<&'static str> {
    bundle
        .iter()
        .find(|(c, _)| *c == category)
        .map(|(_, text)| *text)
        .ok_or_else(|| Error::Config(format!("no {table} fixture for category {category:?}")))
}

fn pick(table: &str, sd3: Bundle, sdxl: Bundle) -> Result<Bundle> {
    match table {
        "sd3" => Ok(sd3),
        "sdxl" => Ok(sdxl),
        other => Err(Error::Config(format!("unknown fixture table {other:?}"))),
    }
}

/// One prompt per line, in table order.
pub fn prompts(table: &str, category: &str) -> Result<Vec<String>> {
    let text = lookup(pick(table, SD3_PROMPTS, SDXL_PROMPTS)?, table, category)?;
    Ok(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect())
}

/// A row of a published per-prompt distance table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub prompt: String,
    pub orig: f64,
    pub mask: f64,
    pub noise: f64,
}

pub fn table(table: &str, category: &str) -> Result<Vec<TableRow>> {
    let text = lookup(pick(table, SD3_TABLES, SDXL_TABLES)?, table, category)?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        // prompts never contain commas, so split from the right
        let mut parts = line.rsplitn(4, ',');
        let bad = || Error::Config(format!("malformed {table}/{category} row {line:?}"));
        let mut num = || -> Result<f64> { parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad()) };
        let noise = num()?;
        let mask = num()?;
        let orig = num()?;
        let prompt = parts.next().ok_or_else(bad)?.to_string();
        rows.push(TableRow { prompt, orig, mask, noise });
    }
    Ok(rows)
}
