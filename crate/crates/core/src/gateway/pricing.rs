use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TokenUsage;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelPricing {
    pub model_id: String,
    #[serde(rename = "input_price_per_1k")]
    pub input_price_per_1k_tokens: Decimal,
    #[serde(rename = "output_price_per_1k")]
    pub output_price_per_1k_tokens: Decimal,
}

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("pricing row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ModelPricing {
    pub fn new(model_id: impl Into<String>, input: Decimal, output: Decimal) -> Result<Self, String> {
        let model_id = model_id.into();
        if model_id.is_empty() {
            return Err("model id is empty".into());
        }
        if input.is_sign_negative() || output.is_sign_negative() {
            return Err(format!("negative price for `{model_id}`"));
        }
        Ok(ModelPricing {
            model_id,
            input_price_per_1k_tokens: input,
            output_price_per_1k_tokens: output,
        })
    }
}

/// Unrounded cost; sums of these are exact.
pub fn raw_cost(usage: TokenUsage, pricing: &ModelPricing) -> Decimal {
    let thousand = Decimal::from(1000);
    Decimal::from(usage.prompt_tokens) * pricing.input_price_per_1k_tokens / thousand
        + Decimal::from(usage.completion_tokens) * pricing.output_price_per_1k_tokens / thousand
}

/// Cost in USD, rounded half-up to four decimal places.
pub fn compute_cost(usage: TokenUsage, pricing: &ModelPricing) -> Decimal {
    raw_cost(usage, pricing).round_dp_with_strategy(4, RoundingStrategy::MidpointAwayFromZero)
}

/// Prices keyed by model id, loaded from a CSV of
/// `model_id,input_price_per_1k,output_price_per_1k`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PricingTable {
    rows: BTreeMap<String, ModelPricing>,
}

impl PricingTable {
    pub fn insert(&mut self, pricing: ModelPricing) {
        self.rows.insert(pricing.model_id.clone(), pricing);
    }

    pub fn get(&self, model_id: &str) -> Option<&ModelPricing> {
        self.rows.get(model_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ModelPricing> {
        self.rows.values()
    }

    pub fn from_reader<R: Read>(source: R) -> Result<Self, PricingError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(source);
        let mut table = PricingTable::default();
        for (i, row) in reader.deserialize::<ModelPricing>().enumerate() {
            let row_no = i + 1;
            let p = row.map_err(|e| PricingError::BadRow {
                row: row_no,
                reason: e.to_string(),
            })?;
            let p = ModelPricing::new(p.model_id, p.input_price_per_1k_tokens, p.output_price_per_1k_tokens)
                .map_err(|reason| PricingError::BadRow { row: row_no, reason })?;
            table.insert(p);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, PricingError> {
        Self::from_reader(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::str::FromStr;

    fn d(s: &str) -> Decimal {
        Decimal::from_str(s).unwrap()
    }

    fn pricing(i: &str, o: &str) -> ModelPricing {
        ModelPricing::new("m", d(i), d(o)).unwrap()
    }

    #[test]
    fn cost_examples() {
        assert_eq!(compute_cost(TokenUsage::new(0, 0), &pricing("3", "9")), d("0.0000"));
        assert_eq!(compute_cost(TokenUsage::new(1000, 1000), &pricing("0.50", "1.50")), d("2.0000"));
        assert_eq!(compute_cost(TokenUsage::new(1500, 500), &pricing("1.00", "2.00")), d("2.5000"));
    }

    #[test]
    fn rounds_half_up() {
        // 0.00015 -> 0.0002
        assert_eq!(compute_cost(TokenUsage::new(1, 0), &pricing("0.15", "0")), d("0.0002"));
        assert_eq!(compute_cost(TokenUsage::new(1, 0), &pricing("0.14", "0")), d("0.0001"));
    }

    #[test]
    fn negative_price_rejected() {
        assert!(ModelPricing::new("m", d("-1"), d("0")).is_err());
        assert!(ModelPricing::new("", d("1"), d("0")).is_err());
    }

    #[test]
    fn table_parses() {
        let text = "model_id,input_price_per_1k,output_price_per_1k\n# comment\ngpt-4o, 0.0025, 0.01\ngpt-3.5-turbo,0.0005,0.0015\n";
        let t = PricingTable::from_reader(text.as_bytes()).unwrap();
        assert_eq!(t.get("gpt-4o").unwrap().output_price_per_1k_tokens, d("0.01"));
        assert_eq!(t.iter().count(), 2);
        let bad = "model_id,input_price_per_1k,output_price_per_1k\nm,abc,1\n";
        assert!(matches!(
            PricingTable::from_reader(bad.as_bytes()),
            Err(PricingError::BadRow { row: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn raw_cost_is_linear(a in 0u64..10_000_000, b in 0u64..10_000_000,
                              c in 0u64..10_000_000, e in 0u64..10_000_000,
                              ip in 0u32..100_000, op in 0u32..100_000) {
            let p = ModelPricing::new("m", Decimal::new(ip as i64, 4), Decimal::new(op as i64, 4)).unwrap();
            let x = TokenUsage::new(a, b);
            let y = TokenUsage::new(c, e);
            prop_assert_eq!(raw_cost(x + y, &p), raw_cost(x, &p) + raw_cost(y, &p));
        }
    }
}
