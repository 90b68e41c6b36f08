//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rentchain_core::chain::validate_encoded_chain;
use rentchain_core::codec::Encode;
use rentchain_core::store::{encode_record, ChainStore, CHAIN_FILE};
use rentchain_core::{
    sha256, Address, Chain, ChainConfig, ChainVerdict, ConsensusMode, GenesisConfig, Hash32, Payload, Transaction,
};
use rentchain_node::{NodeConfig, NodeCore};
use rentchain_testkit::workload::{exhaust_guards, run_checked, Checks, WorkloadParams};
use rentchain_testkit::{key, plate, pow, Actors, Signer, LICENSE};
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: &[Criterion] = &[
        ("tamper-evidence", tamper_evidence),
        ("hash-contract", hash_contract),
        ("pow-statistics", pow_statistics),
        ("pos-proportionality", pos_proportionality),
        ("conservation", conservation),
        ("oracle-equivalence", oracle_equivalence),
        ("guard-exhaustion", guard_exhaustion),
        ("crash-consistency", crash_consistency),
        ("cli-end-to-end", cli_end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Genesis plus `n` blocks of license, fleet and rental traffic.
fn busy_chain(n: usize, difficulty: u8) -> Chain {
    let a = Actors::new(2);
    let mut chain = Chain::new(pow(difficulty, 1), a.genesis(100, 1));
    let mut s = Signer::default();
    let mut script = vec![
        (
            a.admin.clone(),
            Payload::AddLicense {
                license_id: LICENSE.into(),
            },
        ),
        (
            a.owner.clone(),
            Payload::AddVehicle {
                vehicle_id: plate(0),
                daily_price: 2,
            },
        ),
        (
            a.clients[0].clone(),
            Payload::RentCar {
                vehicle_id: plate(0),
                license_id: LICENSE.into(),
                deposit: 10,
            },
        ),
    ]
    .into_iter();
    for i in 0..n {
        let (k, p) = script.next().unwrap_or_else(|| match i % 3 {
            0 => (a.admin.clone(), Payload::AdvanceDay {}),
            1 => (
                a.clients[0].clone(),
                Payload::AddFunds {
                    vehicle_id: plate(0),
                    amount: 2,
                },
            ),
            _ => (
                a.clients[1].clone(),
                Payload::Transfer {
                    to: a.clients[0].address(),
                    amount: 1,
                },
            ),
        });
        let tx = s.tx(&k, p);
        chain.mine(vec![tx], a.miner, i as u64 + 1).expect("scripted block");
    }
    chain
}

fn tamper_evidence() -> Outcome {
    const MUTATIONS: usize = 200;
    let chain = busy_chain(20, 16);
    let records: Vec<Vec<u8>> = chain.blocks().iter().map(|b| b.to_canonical_bytes()).collect();
    ensure(
        matches!(
            validate_encoded_chain(chain.config(), chain.genesis(), &records),
            ChainVerdict::Ok
        ),
        || "pristine chain rejected".into(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a3e);
    let mut flagged = 0;
    for _ in 0..MUTATIONS {
        let height = rng.gen_range(0..records.len());
        let header_len = chain.blocks()[height].header.to_canonical_bytes().len();
        // the nonce is the only field a miner may legitimately re-roll
        let nonce = header_len - 8..header_len;
        let pos = loop {
            let p = rng.gen_range(0..records[height].len());
            if !nonce.contains(&p) {
                break p;
            }
        };
        let mut mutated = records.clone();
        mutated[height][pos] ^= rng.gen_range(1..=255u8);
        match validate_encoded_chain(chain.config(), chain.genesis(), &mutated) {
            ChainVerdict::Invalid { first_bad_height, .. } if first_bad_height <= height as u64 => flagged += 1,
            verdict => return Err(format!("byte {pos} of block {height}: {verdict:?}")),
        }
    }
    Ok(format!(
        "{flagged}/{MUTATIONS} mutations of a {}-block chain flagged",
        records.len()
    ))
}

fn hash_contract() -> Outcome {
    ensure(
        sha256(b"").to_hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
        || "empty-string digest".into(),
    )?;
    ensure(
        sha256(b"abc").to_hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
        || "\"abc\" digest".into(),
    )?;
    let chain = busy_chain(20, 4);
    for b in chain.blocks() {
        let h = b.hash().to_hex();
        ensure(h.len() == 64 && h.bytes().all(|c| c.is_ascii_hexdigit()), || {
            format!("hash {h}")
        })?;
        ensure(h.parse::<Hash32>() == Ok(b.hash()), || {
            format!("hash {h} does not round-trip")
        })?;
    }
    Ok(format!(
        "reference vectors match; {} block hashes are 64 hex chars",
        chain.blocks().len()
    ))
}

fn pow_statistics() -> Outcome {
    const BLOCKS: usize = 1000;
    const DIFFICULTY: u8 = 12;
    let a = Actors::new(0);
    let mut chain = Chain::new(pow(DIFFICULTY, 0), a.genesis(0, 0));
    let mut attempts = Vec::with_capacity(BLOCKS);
    for i in 0..BLOCKS {
        chain
            .mine(Vec::new(), a.miner, i as u64 + 1)
            .map_err(|e| e.to_string())?;
        attempts.push(chain.tip().header.nonce as f64 + 1.0);
    }
    let p = 2f64.powi(-i32::from(DIFFICULTY));
    let expected = 1.0 / p;
    let se = ((1.0 - p) / (p * p)).sqrt() / (BLOCKS as f64).sqrt();
    let mean = attempts.iter().sum::<f64>() / BLOCKS as f64;
    let z = (mean - expected) / se;
    ensure(z.abs() <= 3.0, || {
        format!("mean {mean:.1} is {z:.2} SE from {expected}")
    })?;
    Ok(format!(
        "mean attempts {mean:.1} vs {expected} (z = {z:.2}, SE {se:.1})"
    ))
}

fn pos_proportionality() -> Outcome {
    const BLOCKS: usize = 10_000;
    let stakers = [key(41), key(42), key(43)];
    let stakes = [1u64, 3, 6];
    let genesis = GenesisConfig {
        timestamp: 0,
        allocations: stakers.iter().zip(stakes).map(|(k, s)| (k.address(), s)).collect(),
        admin: stakers[0].address(),
        fleet_owner: stakers[1].address(),
        surcharge_fee: 0,
    };
    let config = ChainConfig {
        consensus_mode: ConsensusMode::PoS,
        difficulty: 0,
        block_reward: 0,
        instant_mine: true,
    };
    let mut chain = Chain::new(config, genesis);
    let mut counts: BTreeMap<Address, u64> = BTreeMap::new();
    for i in 0..BLOCKS {
        chain
            .mine(Vec::new(), stakers[0].address(), i as u64 + 1)
            .map_err(|e| e.to_string())?;
        let v = chain.tip().header.validator.ok_or("PoS block without validator")?;
        *counts.entry(v).or_default() += 1;
    }
    let total: u64 = stakes.iter().sum();
    let mut chi2 = 0.0;
    let mut observed = Vec::new();
    for (k, s) in stakers.iter().zip(stakes) {
        let o = counts.get(&k.address()).copied().unwrap_or(0) as f64;
        let e = BLOCKS as f64 * s as f64 / total as f64;
        chi2 += (o - e).powi(2) / e;
        observed.push(o as u64);
    }
    // survival function of chi-squared with two degrees of freedom
    let p = (-chi2 / 2.0).exp();
    ensure(p > 0.01, || format!("observed {observed:?}, chi2 {chi2:.2}, p {p:.4}"))?;
    Ok(format!(
        "observed {observed:?} for stakes {stakes:?}, chi2 {chi2:.2}, p {p:.3}"
    ))
}

fn random_params(rng: &mut ChaCha8Rng, max_vehicles: usize, max_days: u64) -> (WorkloadParams, Vec<u64>, u64) {
    let vehicles = rng.gen_range(1..=max_vehicles);
    let params = WorkloadParams {
        vehicles,
        clients: rng.gen_range(1..=4),
        days: rng.gen_range(1..=max_days),
        actions_per_day: rng.gen_range(1..=4),
        max_amount: rng.gen_range(1..=15),
    };
    let prices = (0..vehicles).map(|_| rng.gen_range(1..=5)).collect();
    (params, prices, rng.gen_range(0..=3))
}

fn conservation() -> Outcome {
    const WORKLOADS: u64 = 1000;
    let mut steps = 0;
    for seed in 0..WORKLOADS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (params, prices, fee) = random_params(&mut rng, 3, 12);
        steps += run_checked(&mut rng, params, &prices, fee, 40, Checks { oracle: false })
            .map_err(|e| format!("workload {seed}: {e}"))?;
    }
    Ok(format!(
        "{WORKLOADS} workloads, {steps} accepted txs, supply constant and escrow backed throughout"
    ))
}

fn oracle_equivalence() -> Outcome {
    const SCHEDULES: u64 = 300;
    let mut steps = 0;
    for seed in 0..SCHEDULES {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0a1c_0000 + seed);
        let (params, prices, fee) = random_params(&mut rng, 5, 50);
        steps += run_checked(&mut rng, params, &prices, fee, 60, Checks { oracle: true })
            .map_err(|e| format!("schedule {seed}: {e}"))?;
    }
    Ok(format!(
        "{SCHEDULES} schedules (<=5 vehicles, <=50 days), {steps} accepted txs, exact match"
    ))
}

fn guard_exhaustion() -> Outcome {
    let report = exhaust_guards(2, 4, 6);
    ensure(report.violations.is_empty(), || format!("{:?}", report.violations))?;
    ensure(report.returns_blocked > 0 && report.returns_ok > 0, || {
        "guards never exercised".into()
    })?;
    Ok(format!(
        "{} states, {} transitions, {} returns settled, {} blocked by charges, no violations",
        report.states, report.transitions, report.returns_ok, report.returns_blocked
    ))
}

/// A node process started through the CLI binary.
struct NodeProc {
    child: Child,
    url: String,
}

impl NodeProc {
    fn start(config: &Path, envs: &[(&str, &str)]) -> Result<Self, String> {
        let mut child = Command::new(env!("CARGO_BIN_EXE_rentchain"))
            .args(["node", "start", "--config"])
            .arg(config)
            .envs(envs.iter().copied())
            .env("RUST_LOG", "info")
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut lines = BufReader::new(child.stderr.take().expect("piped")).lines();
        let url = loop {
            let Some(Ok(line)) = lines.next() else {
                let _ = child.kill();
                return Err("node exited before listening".into());
            };
            if let Some(addr) = line.split("addr=").nth(1) {
                break format!("http://{}", addr.split_whitespace().next().unwrap_or_default());
            }
        };
        std::thread::spawn(move || lines.for_each(drop));
        Ok(NodeProc { child, url })
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for NodeProc {
    fn drop(&mut self) {
        self.kill();
    }
}

fn write_config(dir: &Path, cfg: &NodeConfig) -> std::path::PathBuf {
    let path = dir.join("node.json");
    std::fs::write(&path, serde_json::to_vec_pretty(cfg).expect("config serializes")).expect("write config");
    path
}

fn crash_config(dir: &Path, actors: &Actors) -> NodeConfig {
    NodeConfig {
        listen: "127.0.0.1:0".parse().expect("addr"),
        data_dir: dir.join("data"),
        chain: pow(4, 1),
        genesis: actors.genesis(100, 1),
        auto_mine_interval: 0,
        admin_wallet: None,
        miner: Some(actors.miner),
    }
}

/// Transactions of a rental day-in-the-life, each mined alone.
fn crash_script(actors: &Actors) -> Vec<Transaction> {
    let (admin, owner, c) = (&actors.admin, &actors.owner, &actors.clients);
    let mut s = Signer::default();
    let mut txs = vec![
        s.tx(
            admin,
            Payload::AddLicense {
                license_id: LICENSE.into(),
            },
        ),
        s.tx(
            owner,
            Payload::AddVehicle {
                vehicle_id: plate(0),
                daily_price: 2,
            },
        ),
        s.tx(
            owner,
            Payload::AddVehicle {
                vehicle_id: plate(1),
                daily_price: 3,
            },
        ),
        s.tx(
            &c[0],
            Payload::RentCar {
                vehicle_id: plate(0),
                license_id: LICENSE.into(),
                deposit: 10,
            },
        ),
        s.tx(
            &c[1],
            Payload::RentCar {
                vehicle_id: plate(1),
                license_id: LICENSE.into(),
                deposit: 3,
            },
        ),
    ];
    for day in 0..8 {
        txs.push(s.tx(admin, Payload::AdvanceDay {}));
        txs.push(s.tx(
            &c[1],
            Payload::AddFunds {
                vehicle_id: plate(1),
                amount: 4,
            },
        ));
        if day % 2 == 0 {
            txs.push(s.tx(
                &c[0],
                Payload::AddFunds {
                    vehicle_id: plate(0),
                    amount: 4,
                },
            ));
        }
    }
    txs.push(s.tx(&c[0], Payload::ReturnCar { vehicle_id: plate(0) }));
    txs.push(s.tx(&c[1], Payload::ReturnCar { vehicle_id: plate(1) }));
    txs
}

fn post_tx(http: &reqwest::blocking::Client, url: &str, tx: &Transaction) -> Result<Value, String> {
    let resp = http
        .post(format!("{url}/tx"))
        .json(tx)
        .send()
        .map_err(|e| e.to_string())?;
    let ok = resp.status().is_success();
    let body: Value = resp.json().map_err(|e| e.to_string())?;
    if ok {
        Ok(body)
    } else {
        Err(body.to_string())
    }
}

fn crash_consistency() -> Outcome {
    const TRIALS: usize = 50;
    let actors = Actors::new(2);
    let script = crash_script(&actors);

    // reference digests by height from an in-process node
    let scratch = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = crash_config(scratch.path(), &actors);
    let mut reference = NodeCore::in_memory(cfg.chain.clone(), cfg.genesis.clone(), None, 0, actors.miner)
        .map_err(|e| e.to_string())?;
    let mut digests = vec![reference.chain().state().digest()];
    let mut records = vec![encode_record(reference.chain().tip())];
    for tx in &script {
        reference
            .submit(tx.clone())
            .map_err(|e| format!("reference run rejected a tx: {e:?}"))?;
        digests.push(reference.chain().state().digest());
        records.push(encode_record(reference.chain().tip()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xc4a5);
    let http = reqwest::blocking::Client::new();
    let (mut mid_flight, mut torn) = (0, 0);
    for trial in 0..TRIALS {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = crash_config(dir.path(), &actors);
        let config_path = write_config(dir.path(), &cfg);
        let mut node = NodeProc::start(&config_path, &[])?;

        let acked = rng.gen_range(0..script.len());
        for tx in &script[..acked] {
            post_tx(&http, &node.url, tx).map_err(|e| format!("trial {trial}: {e}"))?;
        }
        // fire the next transaction and kill the node while it may be mid-write
        let url = node.url.clone();
        let next = script[acked].clone();
        let in_flight = std::thread::spawn(move || post_tx(&reqwest::blocking::Client::new(), &url, &next).is_ok());
        std::thread::sleep(Duration::from_micros(rng.gen_range(0..3000)));
        node.kill();
        let _ = in_flight.join();

        let check = |what: &str| -> Result<u64, String> {
            let (_, chain) = ChainStore::open(&cfg.data_dir, cfg.chain.clone(), cfg.genesis.clone())
                .map_err(|e| format!("trial {trial} {what}: {e}"))?;
            let h = chain.height();
            ensure(chain.state().digest() == digests[h as usize], || {
                format!("trial {trial} {what}: digest differs at height {h}")
            })?;
            Ok(h)
        };
        let height = check("restart")?;
        ensure(height as usize >= acked, || {
            format!("trial {trial}: acknowledged block lost ({height} < {acked})")
        })?;
        mid_flight += usize::from(height as usize > acked);

        // a crash inside the final append leaves a partial record behind
        let file = cfg.data_dir.join(CHAIN_FILE);
        let full: usize = records[..=height as usize].iter().map(Vec::len).sum();
        let cut = full - rng.gen_range(1..records[height as usize].len());
        let f = std::fs::OpenOptions::new()
            .write(true)
            .open(&file)
            .map_err(|e| e.to_string())?;
        f.set_len(cut as u64).map_err(|e| e.to_string())?;
        drop(f);
        if height > 0 {
            let h = check("torn tail")?;
            ensure(h == height - 1, || format!("trial {trial}: torn tail reopened at {h}"))?;
            torn += 1;
            // and a second restart is stable
            ensure(check("second restart")? == h, || {
                format!("trial {trial}: second restart moved")
            })?;
        }
    }
    Ok(format!(
        "{TRIALS} kill points over a {}-tx scenario; {mid_flight} kills landed after an unacknowledged append; {torn} torn-tail restarts; all digests match",
        script.len()
    ))
}

/// Runs the CLI and parses its single JSON document.
fn cli(node: &str, wallet: &Path, args: &[&str]) -> Result<(bool, Value), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rentchain"))
        .args(["--node", node, "--wallet"])
        .arg(wallet)
        .args(args)
        .env("RENTCHAIN_PASSPHRASE", "correct horse")
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    let doc: Value =
        serde_json::from_slice(&out.stdout).map_err(|e| format!("{args:?}: stdout is not one JSON document: {e}"))?;
    Ok((out.status.success(), doc))
}

fn cli_ok(node: &str, wallet: &Path, args: &[&str]) -> Result<Value, String> {
    match cli(node, wallet, args)? {
        (true, doc) => Ok(doc),
        (false, doc) => Err(format!("{args:?} failed: {doc}")),
    }
}

fn balance(node: &str, addr: &str) -> Result<u64, String> {
    let v: Value = reqwest::blocking::get(format!("{node}/state/accounts/{addr}"))
        .and_then(|r| r.json())
        .map_err(|e| e.to_string())?;
    v["balance"]
        .as_u64()
        .ok_or_else(|| format!("no balance for {addr}: {v}"))
}

fn cli_end_to_end() -> Outcome {
    const PRICE: u64 = 2;
    const DEPOSIT: u64 = 10;
    const TOP_UP: u64 = 5;
    const DAYS: u64 = 3;
    const START: u64 = 100;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let w = |name: &str| dir.path().join(format!("{name}.json"));
    let offline = "http://127.0.0.1:9";

    let mut addr = BTreeMap::new();
    for name in ["admin", "owner", "client", "late"] {
        let doc = cli_ok(offline, &w(name), &["wallet", "new", "--iterations", "2000"])?;
        addr.insert(name, doc["address"].as_str().unwrap_or_default().to_owned());
    }
    let shown = cli_ok(offline, &w("client"), &["wallet", "show"])?;
    ensure(shown["address"] == addr["client"], || {
        "wallet show disagrees with wallet new".into()
    })?;
    let raw = std::fs::read_to_string(w("client")).map_err(|e| e.to_string())?;
    ensure(!raw.contains("secret") && raw.contains("kdf_params"), || {
        "unexpected wallet layout".into()
    })?;

    let parse = |s: &str| s.parse::<Address>().map_err(|e| e.to_string());
    let cfg = NodeConfig {
        listen: "127.0.0.1:0".parse().expect("addr"),
        data_dir: dir.path().join("data"),
        chain: pow(0, 0),
        genesis: GenesisConfig {
            timestamp: 0,
            allocations: [(parse(&addr["client"])?, START), (parse(&addr["late"])?, START)]
                .into_iter()
                .collect(),
            admin: parse(&addr["admin"])?,
            fleet_owner: parse(&addr["owner"])?,
            surcharge_fee: 1,
        },
        auto_mine_interval: 0,
        admin_wallet: None,
        miner: None,
    };
    let config_path = write_config(dir.path(), &cfg);
    let mut node = NodeProc::start(&config_path, &[])?;
    let url = node.url.clone();
    let run = |who: &str, args: &[&str]| cli_ok(&url, &w(who), args);

    run("admin", &["license", "add", "--license", LICENSE])?;
    let (ok, bad) = cli(&url, &w("admin"), &["license", "add", "--license", "12345678A"])?;
    ensure(!ok && bad["error"] == "MalformedLicense", || {
        format!("malformed license: {bad}")
    })?;
    run(
        "owner",
        &["fleet", "add", "--vehicle", "1234-ABC", "--price", &PRICE.to_string()],
    )?;
    run(
        "owner",
        &["fleet", "add", "--vehicle", "5678-XYZ", "--price", &PRICE.to_string()],
    )?;
    let rented = run(
        "client",
        &[
            "rent",
            "--vehicle",
            "1234-ABC",
            "--license",
            LICENSE,
            "--deposit",
            &DEPOSIT.to_string(),
        ],
    )?;
    ensure(rented["txid"].as_str().is_some_and(|t| t.len() == 64), || {
        format!("rent: {rented}")
    })?;
    run(
        "late",
        &[
            "rent",
            "--vehicle",
            "5678-XYZ",
            "--license",
            LICENSE,
            "--deposit",
            &PRICE.to_string(),
        ],
    )?;
    let (ok, taken) = cli(
        &url,
        &w("late"),
        &["rent", "--vehicle", "1234-ABC", "--license", LICENSE, "--deposit", "10"],
    )?;
    ensure(!ok && taken["error"] == "VehicleUnavailable", || {
        format!("double rent: {taken}")
    })?;

    for _ in 0..DAYS {
        run("admin", &["day", "advance"])?;
    }
    run(
        "client",
        &["fund", "--vehicle", "1234-ABC", "--amount", &TOP_UP.to_string()],
    )?;
    let owner_before = balance(&url, &addr["owner"]).unwrap_or(0);
    run("client", &["return", "--vehicle", "1234-ABC"])?;

    let owner_gain = balance(&url, &addr["owner"])? - owner_before;
    let client_end = balance(&url, &addr["client"])?;
    ensure(owner_gain == DAYS * PRICE, || {
        format!("owner gained {owner_gain}, expected {}", DAYS * PRICE)
    })?;
    ensure(client_end == START - DAYS * PRICE, || {
        format!(
            "client ended with {client_end}, expected {} (refund {})",
            START - DAYS * PRICE,
            DEPOSIT + TOP_UP - DAYS * PRICE
        )
    })?;

    // the second lease ran dry after one day and owes price plus surcharge since
    let owed = 2 * (PRICE + 1);
    let (ok, blocked) = cli(&url, &w("late"), &["return", "--vehicle", "5678-XYZ"])?;
    ensure(
        !ok && blocked["error"] == "PendingCharges" && blocked["amount"] == owed,
        || format!("return with charges: {blocked}"),
    )?;
    run(
        "late",
        &["fund", "--vehicle", "5678-XYZ", "--amount", &owed.to_string()],
    )?;
    run("late", &["return", "--vehicle", "5678-XYZ"])?;
    ensure(balance(&url, &addr["late"])? == START - PRICE - owed, || {
        "late client balance".into()
    })?;

    let fleet = run("client", &["fleet", "list"])?;
    ensure(
        fleet["vehicles"]
            .as_array()
            .is_some_and(|v| v.len() == 2 && v.iter().all(|x| x["status"] == "Available")),
        || format!("fleet after returns: {fleet}"),
    )?;
    let licenses = run("client", &["license", "list"])?;
    ensure(licenses["licenses"].as_array().is_some_and(|l| l.len() == 1), || {
        format!("licenses: {licenses}")
    })?;
    node.kill();

    let cfg_arg = config_path.to_str().expect("utf-8 path");
    let verified = cli_ok(offline, &w("client"), &["chain", "verify", "--config", cfg_arg])?;
    let export = cli_ok(offline, &w("client"), &["chain", "export", "--config", cfg_arg])?;
    ensure(verified["ok"] == true && export["height"] == verified["height"], || {
        format!("verify: {verified}")
    })?;

    let bad_pass = Command::new(env!("CARGO_BIN_EXE_rentchain"))
        .args(["--node", offline, "--wallet"])
        .arg(w("client"))
        .args(["return", "--vehicle", "1234-ABC"])
        .env("RENTCHAIN_PASSPHRASE", "wrong")
        .output()
        .map_err(|e| e.to_string())?;
    let doc: Value = serde_json::from_slice(&bad_pass.stdout).map_err(|e| e.to_string())?;
    ensure(!bad_pass.status.success() && doc["error"] == "BadPassphrase", || {
        format!("bad passphrase: {doc}")
    })?;

    // corrupt one stored byte and verify again
    let file = cfg.data_dir.join(CHAIN_FILE);
    let mut bytes = std::fs::read(&file).map_err(|e| e.to_string())?;
    let last = bytes.len() - 70;
    bytes[last] ^= 0x01;
    std::fs::write(&file, bytes).map_err(|e| e.to_string())?;
    let (ok, doc) = cli(offline, &w("client"), &["chain", "verify", "--config", cfg_arg])?;
    ensure(!ok && doc["height"].is_u64(), || {
        format!("verify after corruption: {doc}")
    })?;

    Ok(format!(
        "owner +{owner_gain} over {DAYS} days at {PRICE}/day, client refunded {} of {}, PendingCharges({owed}) enforced, chain verify ok",
        DEPOSIT + TOP_UP - DAYS * PRICE,
        DEPOSIT + TOP_UP
    ))
}
