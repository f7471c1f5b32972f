use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use veiltrain::data::synth_data;
use veiltrain::ml::{pi_lr, SecretDataset, TrainingConfig};
use veiltrain::mpc::sim::{reveal, run_pair, share_for, try_run_pair_with, SessionLinks};
use veiltrain::mpc::transport::{Link, TcpLink};
use veiltrain::mpc::wire::{Frame, KIND_OPEN};
use veiltrain::mpc::{PartyId, Transcript};
use veiltrain::runtime::files::{share_path, ShareBlock};
use veiltrain::runtime::session::{connect_party, run_dealer};
use veiltrain::runtime::{assemble, handshake, ingest_shares, run_local, BlockPlacement, RunReport, SessionConfig};
use veiltrain::{Error, RingConfig};

fn free_addr() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap().to_string()
}

#[test]
fn handshake_over_tcp_reports_differing_key() {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap().to_string();
    let a = SessionConfig::default();
    let b = SessionConfig {
        ring: RingConfig::new(64, 16).unwrap(),
        ..SessionConfig::default()
    };
    let h = std::thread::spawn(move || {
        let mut link = TcpLink::connect(&addr, Duration::from_secs(5)).unwrap();
        handshake(&mut link, &b, PartyId::P1)
    });
    let mut link = TcpLink::accept(&l, Duration::from_secs(5)).unwrap();
    let err = handshake(&mut link, &a, PartyId::P0).unwrap_err();
    let peer_err = h.join().unwrap().unwrap_err();
    for e in [err, peer_err] {
        match e {
            Error::ConfigMismatch { key, .. } => assert_eq!(key, "frac_bits"),
            e => panic!("{e:?}"),
        }
    }
}

#[test]
fn unreachable_peer_times_out() {
    let cfg = SessionConfig {
        dealer_addr: free_addr(),
        timeout: Duration::from_millis(300),
        ..SessionConfig::default()
    };
    let started = std::time::Instant::now();
    let err = connect_party(&cfg, PartyId::P1, None).err().unwrap();
    assert!(matches!(err, Error::ConnectTimeout { millis: 300, .. }), "{err:?}");
    assert!(started.elapsed() >= Duration::from_millis(300));

    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let err = run_dealer(&cfg, Some(l)).unwrap_err();
    assert!(matches!(err, Error::ConnectTimeout { .. }), "{err:?}");
}

#[test]
fn dealer_rejects_mismatched_parties() {
    let dealer_l = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = SessionConfig {
        dealer_addr: dealer_l.local_addr().unwrap().to_string(),
        party0_addr: free_addr(),
        timeout: Duration::from_secs(5),
        ..SessionConfig::default()
    };
    let other = SessionConfig {
        training: TrainingConfig {
            epochs: 3,
            ..TrainingConfig::default()
        },
        ..base.clone()
    };
    let d = std::thread::spawn({
        let base = base.clone();
        move || run_dealer(&base, Some(dealer_l))
    });
    let p = std::thread::spawn(move || connect_party(&other, PartyId::P1, None).map(|_| ()));
    match d.join().unwrap().unwrap_err() {
        Error::ConfigMismatch { key, .. } => assert_eq!(key, "epochs"),
        e => panic!("{e:?}"),
    }
    assert!(p.join().unwrap().is_err());
}

fn ingest_round_trip(rows: usize, cols: usize, values: &[f64]) {
    let c = RingConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(rows as u64);
    let place = BlockPlacement {
        total_rows: rows,
        total_cols: cols,
        row_offset: 0,
        col_offset: 0,
    };
    let labels: Vec<f64> = (0..rows).map(|i| (i % 2) as f64).collect();
    let [a, b] = ingest_shares(&c, 1, values, Some(&labels), rows, cols, place, &mut rng).unwrap();
    let x = reveal(&c, &a.x, &b.x);
    assert_eq!(x, c.encode_vec(values).unwrap());
    assert_eq!(reveal(&c, a.t.as_ref().unwrap(), b.t.as_ref().unwrap()), c.encode_vec(&labels).unwrap());
    for (got, want) in c.decode_vec(&x).iter().zip(values) {
        assert!((got - want).abs() <= 0.5 / c.scale());
    }
}

#[test]
fn ingest_examples_reconstruct() {
    ingest_round_trip(2, 2, &[0.0; 4]);
    ingest_round_trip(1, 2, &[3.0, 4.0]);
    let ds = synth_data(200, 20, 4, 1.0);
    let noisy: Vec<f64> = ds.x.iter().enumerate().map(|(i, v)| v * (1.0 + (i % 97) as f64 / 13.0)).collect();
    ingest_round_trip(200, 20, &noisy);
}

#[test]
fn ingest_reports_overflowing_cell() {
    let c = RingConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let mut x = vec![1.0; 6];
    x[4] = -3e13;
    let place = BlockPlacement {
        total_rows: 5,
        total_cols: 3,
        row_offset: 3,
        col_offset: 0,
    };
    match ingest_shares(&c, 1, &x, None, 2, 3, place, &mut rng).unwrap_err() {
        Error::CellOverflow { row, col, value } => {
            assert_eq!((row, col), (4, 1));
            assert_eq!(value, -3e13);
        }
        e => panic!("{e:?}"),
    }
}

#[test]
fn vertical_blocks_assemble_with_labels_from_one_owner() {
    let c = RingConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_data(6, 5, 1, 1.0);
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let mut blocks = Vec::new();
    for (k, cols) in [0..3, 3..5].into_iter().enumerate() {
        let x: Vec<f64> = (0..6).flat_map(|i| ds.row(i)[cols.clone()].to_vec()).collect();
        let place = BlockPlacement {
            col_offset: cols.start,
            ..BlockPlacement::whole(&ds)
        };
        let labels = (k == 0).then_some(ds.t.as_slice());
        let [a, _] = ingest_shares(&c, 1, &x, labels, 6, cols.len(), place, &mut rng).unwrap();
        let p = share_path(&dir.path().join(format!("o{k}")), PartyId::P0);
        a.write(&p).unwrap();
        blocks.push(ShareBlock::read(&p).unwrap());
    }
    let sd = assemble(PartyId::P0, &c, 1, &blocks).unwrap();
    assert_eq!((sd.n, sd.m), (6, 5));
    assert!(assemble(PartyId::P1, &c, 1, &blocks).is_err());
    assert!(assemble(PartyId::P0, &c, 2, &blocks).is_err());
    assert!(assemble(PartyId::P0, &c, 1, &blocks[1..]).is_err());
}

fn shared_dataset(n: usize, m: usize, seed: u64) -> (RingConfig, [SecretDataset; 2]) {
    let c = RingConfig::default();
    let ds = synth_data(n, m, seed, 1.0);
    let x: Vec<f64> = veiltrain::data::normalize_rows(&ds.x, m);
    let (x0, x1) = share_for(&c, &c.encode_vec(&x).unwrap(), seed);
    let (t0, t1) = share_for(&c, &c.encode_vec(&ds.t).unwrap(), seed + 1);
    (
        c,
        [
            SecretDataset::new(x0, t0, n, m).unwrap(),
            SecretDataset::new(x1, t1, n, m).unwrap(),
        ],
    )
}

fn lr_transcript(epochs: usize) -> [(Vec<u64>, Transcript); 2] {
    let (c, sds) = shared_dataset(40, 6, 3);
    let cfg = TrainingConfig {
        epochs,
        ..TrainingConfig::default()
    };
    run_pair(c, 5, |p| {
        let st = pi_lr(p, &sds[p.id().index()], &cfg, 9)?;
        Ok((st.w, p.take_transcript()))
    })
    .unwrap()
}

#[test]
fn report_totals_equal_round_sums() {
    let [(_, t0), (_, t1)] = lr_transcript(2);
    for (i, t) in [&t0, &t1].into_iter().enumerate() {
        let rep = RunReport::from_transcript(PartyId::new(i as u8).unwrap(), t);
        let sent: u64 = t.rounds().iter().map(|r| r.bytes_sent).sum();
        let recv: u64 = t.rounds().iter().map(|r| r.bytes_received).sum();
        assert_eq!(rep.total.bytes_sent, sent);
        assert_eq!(rep.total.bytes_received, recv);
        assert_eq!(rep.total.rounds, t.rounds().len() as u64);
        let rounds: Vec<u32> = t.rounds().iter().map(|r| r.round).collect();
        assert!(rounds.windows(2).all(|w| w[0] < w[1]));
        assert!(rep.to_kv(false).contains(&format!("total.bytes_sent = {sent}\n")));
        assert_eq!(rep.stage("lr").bytes(), rep.total.bytes());
    }
    assert_eq!(t0.rounds().len(), t1.rounds().len());
    assert_eq!(t0.total().counts(), t1.total().counts());
}

#[test]
fn bytes_grow_with_epochs() {
    let bytes: Vec<u64> = [1, 2, 4]
        .iter()
        .map(|&e| lr_transcript(e)[0].1.total().bytes())
        .collect();
    assert!(bytes[0] < bytes[1] && bytes[1] < bytes[2], "{bytes:?}");
    assert_eq!(bytes[2] - bytes[1], 2 * (bytes[1] - bytes[0]));
}

#[test]
fn identical_runs_are_bit_identical() {
    let [(a0, ta), (a1, _)] = lr_transcript(3);
    let [(b0, tb), (b1, _)] = lr_transcript(3);
    let c = RingConfig::default();
    assert_eq!(reveal(&c, &a0, &a1), reveal(&c, &b0, &b1));
    let ra = RunReport::from_transcript(PartyId::P0, &ta);
    let rb = RunReport::from_transcript(PartyId::P0, &tb);
    assert_eq!(ra.to_kv(false), rb.to_kv(false));
}

/// Wraps a link and keeps every opening payload it receives.
struct Recording<L> {
    inner: L,
    seen: Arc<Mutex<Vec<u64>>>,
}

impl<L: Link> Link for Recording<L> {
    fn send(&mut self, frame: &Frame) -> veiltrain::Result<()> {
        self.inner.send(frame)
    }

    fn recv(&mut self) -> veiltrain::Result<Frame> {
        let f = self.inner.recv()?;
        if f.kind == KIND_OPEN {
            self.seen.lock().unwrap().extend_from_slice(&f.payload);
        }
        Ok(f)
    }
}

#[test]
fn received_openings_look_uniform() {
    let (c, sds) = shared_dataset(30, 5, 8);
    let cfg = TrainingConfig {
        epochs: 2,
        ..TrainingConfig::default()
    };
    let seen = Arc::new(Mutex::new(Vec::new()));
    let mut links = SessionLinks::memory();
    let [p0, p1] = links.peer;
    links.peer = [
        Box::new(Recording {
            inner: p0,
            seen: seen.clone(),
        }),
        p1,
    ];
    let [a, b] = try_run_pair_with(c, 4, links, |p| pi_lr(p, &sds[p.id().index()], &cfg, 1).map(|_| ()));
    a.unwrap();
    b.unwrap();
    let words = seen.lock().unwrap().clone();
    assert!(words.len() > 50_000, "{}", words.len());
    let n = words.len() as f64;
    // every bit position balanced within 5 sigma
    let sigma = (n * 0.25).sqrt();
    for bit in 0..64 {
        let ones = words.iter().filter(|w| (*w >> bit) & 1 == 1).count() as f64;
        assert!((ones - n / 2.0).abs() < 5.0 * sigma, "bit {bit}: {ones} of {n}");
    }
    // byte histogram chi-square, 255 degrees of freedom
    let mut hist = [0f64; 256];
    for w in &words {
        for b in w.to_le_bytes() {
            hist[b as usize] += 1.0;
        }
    }
    let expect = n * 8.0 / 256.0;
    let chi2: f64 = hist.iter().map(|h| (h - expect).powi(2) / expect).sum();
    assert!(chi2 < 360.0, "chi-square {chi2}");
}

#[test]
fn local_session_matches_in_memory_run() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_data(24, 4, 6, 1.0);
    let cfg = SessionConfig {
        training: TrainingConfig {
            epochs: 4,
            ..TrainingConfig::default()
        },
        seed: 3,
        shares: vec![dir.path().join("all")],
        party0_addr: "127.0.0.1:0".into(),
        dealer_addr: "127.0.0.1:0".into(),
        ..SessionConfig::default()
    };
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    for b in ingest_shares(&cfg.ring, 1, &ds.x, Some(&ds.t), 24, 4, BlockPlacement::whole(&ds), &mut rng).unwrap() {
        b.write(share_path(&cfg.shares[0], b.party)).unwrap();
    }
    let [(o0, t0), (o1, t1)] = run_local(&cfg).unwrap();
    let c = cfg.ring;
    let mirror = veiltrain::clear::mirror_pipeline(&c, &ds.x, &ds.t, 24, 4, &cfg.training, 3, false).unwrap();
    assert_eq!(reveal(&c, &o0.weights, &o1.weights), mirror);
    assert_eq!(t0.total().counts(), t1.total().counts());
}
