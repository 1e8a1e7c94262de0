//! Deterministic synthetic NetFlow CSV generation for tests and benchmarks.
//!
//! Rows mimic the CIDDS-001 capture format: the full 16-column header, valid
//! IPs drawn from a bounded pool, realistic port and size distributions,
//! monotone timestamps with occasional ties, and ICMP rows whose destination
//! port carries the `"3.0"`-style float-integral form that the integer cast
//! normalizes. The same seed always produces byte-identical output.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const SYNTH_HEADER: [&str; 16] = [
    "Date first seen",
    "Duration",
    "Proto",
    "Src IP Addr",
    "Src Pt",
    "Dst IP Addr",
    "Dst Pt",
    "Packets",
    "Bytes",
    "Flows",
    "Flags",
    "Tos",
    "class",
    "attackType",
    "attackID",
    "attackDescription",
];

const COMMON_PORTS: [u32; 18] = [
    80, 443, 22, 53, 25, 110, 143, 993, 995, 8080, 8443, 3306, 5432, 3389, 123, 161, 389, 636,
];

const TCP_FLAGS: [&str; 10] = [
    ".AP...", ".AP.SF", ".APRSF", ".A....", ".A..SF", ".APRS.", ".A.RS.", ".AP.S.", ".A...F",
    "UAPRSF",
];

const ATTACK_TYPES: [&str; 4] = ["bruteForce", "dos", "pingScan", "portScan"];

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub seed: u64,
    pub rows: u64,
}

/// Writes `cfg.rows` synthetic flows as CSV. Deterministic per seed.
pub fn write_synthetic_csv(path: impl AsRef<Path>, cfg: SynthConfig) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    writer
        .write_record(SYNTH_HEADER)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pool = ip_pool(&mut rng, cfg.rows);
    let base = NaiveDate::from_ymd_opt(2017, 3, 15)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let mut clock_ms: i64 = 0;

    for _ in 0..cfg.rows {
        // ~20% of rows share the previous timestamp so tie handling is exercised.
        if !rng.random_bool(0.2) {
            clock_ms += rng.random_range(1..=2_500);
        }
        let ts = base + chrono::Duration::milliseconds(clock_ms);
        let row = synth_row(&mut rng, &pool, ts);
        writer
            .write_record(&row)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn ip_pool(rng: &mut ChaCha8Rng, rows: u64) -> Vec<String> {
    let size = ((rows / 64).max(64)).min(1_500) as usize;
    let mut seen = std::collections::HashSet::new();
    let mut pool = Vec::with_capacity(size);
    while pool.len() < size {
        let ip = match rng.random_range(0..10u32) {
            0..=5 => format!(
                "192.168.{}.{}",
                rng.random_range(0..250u32),
                rng.random_range(1..255u32)
            ),
            6..=7 => format!(
                "10.{}.{}.{}",
                rng.random_range(0..4u32),
                rng.random_range(0..256u32),
                rng.random_range(1..255u32)
            ),
            _ => format!(
                "{}.{}.{}.{}",
                rng.random_range(1..224u32),
                rng.random_range(0..256u32),
                rng.random_range(0..256u32),
                rng.random_range(1..255u32)
            ),
        };
        if seen.insert(ip.clone()) {
            pool.push(ip);
        }
    }
    pool
}

fn port(rng: &mut ChaCha8Rng) -> String {
    if rng.random_bool(0.75) {
        COMMON_PORTS.choose(rng).unwrap().to_string()
    } else {
        rng.random_range(1_024..65_536u32).to_string()
    }
}

fn synth_row(rng: &mut ChaCha8Rng, pool: &[String], ts: chrono::NaiveDateTime) -> Vec<String> {
    let proto = match rng.random_range(0..100u32) {
        0..=69 => "TCP",
        70..=94 => "UDP",
        95..=98 => "ICMP",
        _ => "IGMP",
    };
    let (src_pt, dst_pt) = if proto == "ICMP" {
        (
            "0".to_string(),
            ["0.0", "3.0", "8.0", "11.0"].choose(rng).unwrap().to_string(),
        )
    } else {
        (port(rng), port(rng))
    };

    let packets: u64 = {
        let magnitude = rng.random_range(0..4u32);
        let lo = 10u64.pow(magnitude);
        rng.random_range(lo..lo * 10)
    };
    let bytes = packets * rng.random_range(40..=1_460u64);
    let duration = if packets == 1 || rng.random_bool(0.25) {
        "0.000".to_string()
    } else {
        format!("{}.{:03}", rng.random_range(0..30u32), rng.random_range(0..1000u32))
    };
    let flags = if proto == "TCP" {
        TCP_FLAGS.choose(rng).unwrap()
    } else {
        "......"
    };

    let class = match rng.random_range(0..100u32) {
        0..=89 => "normal",
        90..=93 => "attacker",
        94..=97 => "victim",
        98 => "suspicious",
        _ => "unknown",
    };
    let (attack_type, attack_id) = if class == "attacker" || class == "victim" {
        let kind = *ATTACK_TYPES.choose(rng).unwrap();
        (kind, format!("{kind}-{}", rng.random_range(1..50u32)))
    } else {
        ("---", "---".to_string())
    };
    let tos = *["0", "0", "0", "16", "32"].choose(rng).unwrap();

    vec![
        ts.format("%Y-%m-%d %H:%M:%S%.3f").to_string(),
        duration,
        proto.to_string(),
        pool.choose(rng).unwrap().clone(),
        src_pt,
        pool.choose(rng).unwrap().clone(),
        dst_pt,
        packets.to_string(),
        bytes.to_string(),
        "1".to_string(),
        flags.to_string(),
        tos.to_string(),
        class.to_string(),
        attack_type.to_string(),
        attack_id,
        "---".to_string(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::prepare;
    use crate::schema::SchemaConfig;

    #[test]
    fn same_seed_same_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_synthetic_csv(&a, SynthConfig { seed: 1, rows: 10 }).unwrap();
        write_synthetic_csv(&b, SynthConfig { seed: 1, rows: 10 }).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn different_seed_different_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_synthetic_csv(&a, SynthConfig { seed: 1, rows: 10 }).unwrap();
        write_synthetic_csv(&b, SynthConfig { seed: 2, rows: 10 }).unwrap();
        assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn zero_rows_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_synthetic_csv(&path, SynthConfig { seed: 1, rows: 0 }).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("Date first seen,"));
    }

    #[test]
    fn generated_file_prepares_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.csv");
        write_synthetic_csv(&path, SynthConfig { seed: 7, rows: 500 }).unwrap();
        let schema = SchemaConfig::cidds001();
        let prepared = prepare(&[path], &schema, None).unwrap();
        assert_eq!(prepared.records.len(), 500);
        assert_eq!(prepared.records[0].values.last().unwrap(), "nan");
        for record in &prepared.records[1..] {
            let delta: f64 = record.values.last().unwrap().parse().unwrap();
            assert!(delta >= 0.0);
        }
    }
}
