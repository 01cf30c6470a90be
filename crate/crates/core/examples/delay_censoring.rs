//! How delayed feedback arrives, and what is lost to censoring.
//!
//! cargo run --release --example delay_censoring

use duelay::delay::{ipw_weight, DelayKind, DelayModel, DuelRecord, PendingQueue};
use duelay::rng::{stream_rng, Stream};

fn main() -> duelay::Result<()> {
    let m = 3;
    let model = DelayModel::new(DelayKind::Geometric { p: 0.3 }, m)?;
    println!("P(D <= {m}) = rho = {:.4}", model.rho());

    let mut queue = PendingQueue::new();
    let horizon = 12;
    for t in 1..=horizon + m as usize {
        let arrived = queue.poll(t, m);
        for r in &arrived {
            println!("  t={t:2}: feedback of round {} arrives (delay {})", r.round, r.delay);
        }
        if t <= horizon {
            let delay = model.sample_delay(&mut stream_rng(5, Stream::Delay, t as u64));
            let fate = if delay > m { "censored" } else { "in flight" };
            println!("t={t:2}: play, delay {delay} ({fate})");
            queue.push(DuelRecord {
                round: t,
                first: vec![],
                second: vec![],
                preference: true,
                delay,
                delivered: false,
            });
        }
    }

    println!("\nIPW weight of a round-1 duel with delay 2, seen from round t:");
    for t in 1..=6 {
        println!("  t={t}: {:.4}", ipw_weight(1, t, 2, m, model.rho()));
    }
    Ok(())
}
