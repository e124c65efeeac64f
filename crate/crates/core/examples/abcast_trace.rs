//! Drive the broadcast service directly and check its trace, then break the
//! trace by hand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ledgerlab::abcast::{check_abcast_trace, AbPayload, AtomicBroadcast, TraceEvent};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ab = AtomicBroadcast::new(3, 5);
    let mut due = Vec::new();
    for i in 0..4u64 {
        let (_, deliveries) = ab.abroadcast((i % 3) as u32, AbPayload::Get { client: 0, c: i + 1 }, i, &mut rng);
        due.extend(deliveries);
    }
    ab.crash(2, 3);
    due.sort_by_key(|(s, t)| (*t, *s));
    for (server, t) in due {
        if let Some(m) = ab.deliver_next(server, t) {
            println!("t={t} server {server} delivers m{} from server {}", m.seq, m.sender);
        }
    }
    let trace = ab.into_trace();
    println!("{}", check_abcast_trace(&trace));

    let mut broken = trace.clone();
    let first = broken.events.iter().position(|e| matches!(e, TraceEvent::Deliver { .. })).unwrap();
    broken.events.push(broken.events[first].clone());
    println!("with a repeated delivery: {}", check_abcast_trace(&broken));
}
