//! Property tests for the lossless round trip: randomized schema-valid
//! records must encode and decode back to themselves exactly, and the token
//! strings must reproduce the serialized text character for character.

use std::sync::OnceLock;

use proptest::prelude::*;

use flowtok::codec::{decode, encode_row, serialize_row};
use flowtok::ingest::FlowRecord;
use flowtok::schema::{BpeGroup, SchemaConfig, TokenClass};
use flowtok::vocab::Vocabulary;

fn setup() -> &'static (SchemaConfig, Vocabulary) {
    static SETUP: OnceLock<(SchemaConfig, Vocabulary)> = OnceLock::new();
    SETUP.get_or_init(|| {
        let schema = SchemaConfig::cidds001();
        let mut vocab = Vocabulary::init_fixed(&schema);
        let ips: Vec<String> = ["0.1.2.3", "45.67.89.123", "192.168.220.14", "255.255.255.255", "10.0.0.1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        vocab.train_group(BpeGroup::IpAddress, &ips, 40).unwrap();
        let ports: Vec<String> = ["80", "443", "49222", "65535", "12679", "30", "1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        vocab.train_group(BpeGroup::Port, &ports, 20).unwrap();
        let nums: Vec<String> = ["0.000", "nan", "123456789", "3.14", "0.5", "86400.25", "67"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        vocab.train_group(BpeGroup::Numeric, &nums, 30).unwrap();
        (schema, vocab)
    })
}

fn categorical_values(schema: &SchemaConfig, name: &str) -> Vec<String> {
    match &schema.column(name).unwrap().class {
        TokenClass::Categorical(set) => set.values().to_vec(),
        TokenClass::Subword(_) => panic!("{name} is not categorical"),
    }
}

fn pick(values: Vec<String>) -> impl Strategy<Value = String> {
    (0..values.len()).prop_map(move |i| values[i].clone())
}

/// A schema-valid CIDDS record: subword fields are arbitrary strings over the
/// trained alphabets (including empty), categorical fields draw from their
/// declared sets.
fn record_strategy() -> impl Strategy<Value = FlowRecord> {
    let schema = &setup().0;
    let ip = "[0-9.]{0,18}";
    let port = "[0-9]{0,6}";
    let num = "([0-9.]{0,12}|nan)";
    (
        (ip, port, ip, port, pick(categorical_values(schema, "Proto"))),
        (num, num, num, pick(categorical_values(schema, "Flags")), num),
        (
            pick(categorical_values(schema, "class")),
            pick(categorical_values(schema, "attackType")),
            num,
        ),
    )
        .prop_map(|((v0, v1, v2, v3, v4), (v5, v6, v7, v8, v9), (v10, v11, v12))| FlowRecord {
            values: vec![v0, v1, v2, v3, v4, v5, v6, v7, v8, v9, v10, v11, v12],
        })
}

proptest! {
    #[test]
    fn round_trip_is_exact(record in record_strategy()) {
        let (schema, vocab) = setup();
        let ids = encode_row(&record, schema, vocab).unwrap();
        let decoded = decode(&ids, vocab, schema).unwrap();
        prop_assert_eq!(decoded, vec![record]);
    }

    #[test]
    fn token_strings_reproduce_serialized_text(record in record_strategy()) {
        let (schema, vocab) = setup();
        let ids = encode_row(&record, schema, vocab).unwrap();
        let text: String = ids.iter().map(|&id| vocab.string_of(id).unwrap()).collect();
        prop_assert_eq!(text, serialize_row(&record, schema).unwrap());
    }

    #[test]
    fn concatenated_streams_split_back_into_rows(records in proptest::collection::vec(record_strategy(), 0..8)) {
        let (schema, vocab) = setup();
        let mut ids = Vec::new();
        for record in &records {
            ids.extend(encode_row(record, schema, vocab).unwrap());
        }
        let decoded = decode(&ids, vocab, schema).unwrap();
        prop_assert_eq!(decoded, records);
    }

    #[test]
    fn encoding_is_deterministic(record in record_strategy()) {
        let (schema, vocab) = setup();
        let a = encode_row(&record, schema, vocab).unwrap();
        let b = encode_row(&record, schema, vocab).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn delta_rendering_round_trips(ms in 0u64..=10_000_000_000) {
        let seconds = ms as f64 / 1000.0;
        let rendered = flowtok::ingest::render_delta(seconds);
        prop_assert!(rendered.contains('.'), "rendered {} lacks a fractional digit", rendered);
        prop_assert_eq!(rendered.parse::<f64>().unwrap(), seconds);
    }
}
