//! Benchmark records, state checksums, and atomic CSV emission.

use std::fs;
use std::io::Write;
use std::path::Path;

use pic_kernel::ParticleGroup;

/// One timed operator application.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub strategy: &'static str,
    pub workers: usize,
    pub particles: usize,
    pub grid: [usize; 3],
    pub degree: usize,
    pub iteration: usize,
    pub repeat: usize,
    pub compute_seconds: f64,
    pub contribute_seconds: f64,
    pub j_checksum: u64,
    pub particle_checksum: u64,
}

pub const CSV_HEADER: &str = "strategy,workers,particles,grid,degree,iteration,repeat,compute_seconds,contribute_seconds,j_checksum,particle_checksum";

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}x{}x{},{},{},{},{:.9},{:.9},{:016x},{:016x}",
            self.strategy,
            self.workers,
            self.particles,
            self.grid[0],
            self.grid[1],
            self.grid[2],
            self.degree,
            self.iteration,
            self.repeat,
            self.compute_seconds,
            self.contribute_seconds,
            self.j_checksum,
            self.particle_checksum,
        )
    }
}

/// FNV-1a over a byte stream; stable, order-sensitive.
fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Ordered 64-bit hash of the raw bytes of a value vector.
pub fn checksum_f64s(values: &[f64]) -> u64 {
    fnv1a64(values.iter().flat_map(|v| v.to_le_bytes()))
}

/// Hash of the full particle state, record by record.
pub fn checksum_particles(group: &ParticleGroup) -> u64 {
    fnv1a64(group.particles().iter().flat_map(|p| {
        p.x.iter()
            .chain(p.v.iter())
            .chain(std::iter::once(&p.w))
            .flat_map(|v| v.to_le_bytes())
            .collect::<Vec<u8>>()
    }))
}

/// Writes header plus rows to `path` atomically: a temp file in the same
/// directory is renamed into place, so re-runs never leave partial output.
pub fn write_csv(path: &Path, records: &[BenchRecord]) -> std::io::Result<()> {
    let mut body = String::with_capacity(64 * (records.len() + 1));
    body.push_str(CSV_HEADER);
    body.push('\n');
    for record in records {
        body.push_str(&record.csv_row());
        body.push('\n');
    }
    let tmp = path.with_extension("csv.tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(body.as_bytes())?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}
