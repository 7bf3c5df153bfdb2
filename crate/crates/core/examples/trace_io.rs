//! Writes a synthetic GoP trace to CSV and reads it back.

use vbr_powerctl::harness::trace::write_trace;
use vbr_powerctl::harness::{gen_synthetic_trace, load_trace};

fn main() -> vbr_powerctl::Result<()> {
    let trace = gen_synthetic_trace(64, 16, 8000.0, 5.0, 12)?;
    let dir = std::env::temp_dir().join("vbr-powerctl-trace-io");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("clip.csv");
    write_trace(&trace, &path)?;
    let back = load_trace(&path)?;
    println!("wrote {} frames to {}", trace.len(), path.display());
    println!("round trip equal: {}", back == trace);
    println!("fps {}, mean {:.0} bits, largest {:.0} bits", back.fps(), back.total_bits() / back.len() as f64, back.max_frame());
    for (k, f) in back.frames().iter().take(18).enumerate() {
        println!("{:>3} {:>8.0}{}", k + 1, f, if k % 16 == 0 { "  I" } else { "" });
    }
    Ok(())
}
