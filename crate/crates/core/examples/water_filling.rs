//! Water levels and power splits for one slot and for a span of slots.

use vbr_powerctl::waterfill::{level_for_power_budget, min_power_for_bits, powers_from_level, water_level_for_target, SpanTarget};
use vbr_powerctl::SystemParams;

fn main() -> vbr_powerctl::Result<()> {
    // Unit bandwidth, noise and slot: one bit per doubling of SNR.
    let params = SystemParams::normalized(3, 100.0)?;
    let gains = [2.0, 1.0, 0.1];

    let level = water_level_for_target(&SpanTarget::single(&gains, 4.0), &params)?;
    let powers = powers_from_level(level, &gains, &params);
    println!("4 bits over gains {gains:?}: level {level:.4}, powers {powers:.4?}");
    println!("least power for 4 bits: {:.4} W", min_power_for_bits(&gains, 4.0, &params)?);

    let budget = 5.0;
    let v = level_for_power_budget(&gains, budget, &params)?;
    println!("{budget} W budget: level {v:.4}, powers {:.4?}", powers_from_level(v, &gains, &params));

    // One level shared by three slots carrying 9 bits in total.
    let rows: [&[f64]; 3] = [&[2.0, 1.0, 0.1], &[0.3, 0.2, 0.4], &[1.5, 1.5, 1.5]];
    let level = water_level_for_target(&SpanTarget::new(rows.to_vec(), 9.0), &params)?;
    for (t, row) in rows.iter().enumerate() {
        println!("slot {}: {:.4?}", t + 1, powers_from_level(level, row, &params));
    }
    Ok(())
}
