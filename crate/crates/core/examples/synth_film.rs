//! Writes the 90 s synthetic demonstration film as YUV4MPEG2.
//!
//! Usage: cargo run --release --example synth_film -- film.y4m [WIDTHxHEIGHT]

use std::io::BufWriter;

use lumiscore::ingest::FrameRate;
use lumiscore::synth::{film_curve, SyntheticY4m};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "film.y4m".to_string());
    let (w, h) = args
        .next()
        .and_then(|s| {
            let (w, h) = s.split_once('x')?;
            Some((w.parse().ok()?, h.parse().ok()?))
        })
        .unwrap_or((640, 480));
    let mut film = SyntheticY4m::new(w, h, FrameRate::new(24, 1).unwrap(), film_curve(24.0));
    let mut file = BufWriter::new(std::fs::File::create(&out)?);
    std::io::copy(&mut film, &mut file)?;
    eprintln!("wrote {out} ({w}x{h}, 24 fps, 90 s)");
    Ok(())
}
