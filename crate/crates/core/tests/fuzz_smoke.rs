//! Parsers and decoders must reject bad input with an error, never a panic.

use hornforge::encode::*;
use hornforge::eval::grade_cot;
use hornforge::generators::{generate, GenParams, GeneratorKind};
use hornforge::logic::{forward_chain, Problem};
use hornforge::masks::{isolated_corrective_mask, read_mask, write_mask};
use hornforge::probe::HiddenStates;
use hornforge::rng::stream;
use proptest::prelude::*;

fn valid_file() -> Vec<u8> {
    let p = generate(&GenParams::new(GeneratorKind::Rp, 2), &mut stream(2, 0)).unwrap();
    let res = forward_chain(&p);
    let seq = encode_corrective(&p, &res.trace, res.provable).unwrap();
    let mut buf = Vec::new();
    write_file(&mut buf, Format::Corrective, &[seq]).unwrap();
    buf
}

fn valid_mask() -> Vec<u8> {
    use Segment::*;
    let m = isolated_corrective_mask(&[Prefix, Prefix, DirectBranch, CotBranch, CotBranch]).unwrap();
    let mut buf = Vec::new();
    write_mask(&mut buf, &m).unwrap();
    buf
}

fn mutate(base: &[u8], edits: &[(usize, u8)], cut: usize) -> Vec<u8> {
    let mut b = base.to_vec();
    for &(i, v) in edits {
        if !b.is_empty() {
            let n = b.len();
            b[i % n] = v;
        }
    }
    b.truncate(cut.min(b.len()));
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn problem_json(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = serde_json::from_slice::<Problem>(&bytes);
    }

    #[test]
    fn problem_json_shaped(facts in prop::collection::vec(any::<u32>(), 0..4), q in any::<u32>(), prem in prop::collection::vec(0u32..200, 0..4), c in 0u32..200) {
        let s = format!(
            r#"{{"facts":{facts:?},"rules":[{{"premises":{prem:?},"conclusion":{c}}}],"query":{q}}}"#
        );
        let _ = serde_json::from_str::<Problem>(&s);
    }

    #[test]
    fn token_decode(
        tokens in prop::collection::vec(any::<u16>(), 0..64),
        types in prop::collection::vec(any::<u8>(), 0..64),
        segs in prop::collection::vec(0u8..3, 0..64),
    ) {
        let n = tokens.len();
        let seq = TokenSequence {
            type_sets: types.iter().cycle().take(if types.is_empty() { 0 } else { n }).map(|&b| TypeSet::from_bits(b)).collect(),
            segments: segs.iter().cycle().take(if segs.is_empty() { 0 } else { n }).map(|&c| Segment::from_code(c).unwrap()).collect(),
            loss_mask: vec![false; n],
            positions: (0..n as u32).collect(),
            tokens,
        };
        let _ = seq.validate();
        let _ = decode(&seq);
    }

    #[test]
    fn encoded_file(edits in prop::collection::vec((any::<usize>(), any::<u8>()), 0..6), cut in any::<usize>()) {
        let _ = read_file(&mutate(&valid_file(), &edits, cut));
    }

    #[test]
    fn mask_file(edits in prop::collection::vec((any::<usize>(), any::<u8>()), 0..6), cut in any::<usize>()) {
        let _ = read_mask(&mutate(&valid_mask(), &edits, cut));
    }

    #[test]
    fn raw_bytes(bytes in prop::collection::vec(any::<u8>(), 0..128)) {
        let _ = read_file(&bytes);
        let _ = read_mask(&bytes);
        let _ = HiddenStates::decode(&bytes, &bytes);
    }

    #[test]
    fn hidden_states(l in 0usize..4, t in 0usize..4, d in 0usize..4, data_len in 0usize..200, layout in "[a-z-]{0,16}") {
        let side = format!(r#"{{"shape":[{l},{t},{d}],"layout":"{layout}"}}"#);
        let _ = HiddenStates::decode(side.as_bytes(), &vec![0u8; data_len]);
        let side = format!(r#"{{"shape":[{l},{t},{d}],"layout":"layer-token-dim"}}"#);
        let _ = HiddenStates::decode(side.as_bytes(), &vec![0u8; data_len]);
    }

    #[test]
    fn cot_trace(trace in prop::collection::vec(any::<u16>(), 0..64), seed in any::<u64>()) {
        let p = generate(&GenParams::new(GeneratorKind::Lp, seed), &mut stream(seed, 0)).unwrap();
        let g = grade_cot(&trace, &p);
        prop_assert!(g.hallucinated_steps <= g.steps_checked);
    }
}

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn checked_in_seeds_are_valid_inputs() {
    for (name, bytes) in seeds("problem_json") {
        let ok = if name.starts_with("labeled") {
            serde_json::from_slice::<hornforge::generators::LabeledProblem>(&bytes).is_ok()
        } else {
            serde_json::from_slice::<Problem>(&bytes).is_ok()
        };
        assert!(ok, "{name}");
    }
    for (name, bytes) in seeds("encoded_file") {
        assert!(read_file(&bytes).is_ok(), "{name}");
    }
    for (name, bytes) in seeds("mask_file") {
        assert!(read_mask(&bytes).is_ok(), "{name}");
    }
    for (name, bytes) in seeds("hidden_states") {
        let n = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
        let (side, payload) = bytes[2..].split_at(n);
        assert!(HiddenStates::decode(side, payload).is_ok(), "{name}");
    }
    let chain_example = Problem::from_ids(&[0, 2], &[(&[0, 2], 4), (&[4], 3), (&[3], 1)], 3).unwrap();
    for (name, bytes) in seeds("cot_trace") {
        let trace: Vec<u16> = bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        let g = grade_cot(&trace, &chain_example);
        match name.as_str() {
            "valid.bin" => assert!(g.final_correct && g.hallucinated_steps == 0 && !g.malformed),
            "hallucinated.bin" => assert_eq!(g.hallucinated_steps, 1),
            _ => {}
        }
    }
    for (name, bytes) in seeds("token_decode") {
        let mut seq = TokenSequence::default();
        for (i, c) in bytes.chunks_exact(4).enumerate() {
            seq.tokens.push(u16::from_le_bytes([c[0], c[1]]));
            seq.type_sets.push(TypeSet::from_bits(c[2]));
            seq.segments.push(Segment::from_code((c[3] & 0x7f) % 3).unwrap());
            seq.loss_mask.push(c[3] & 0x80 != 0);
            seq.positions.push(i as u32);
        }
        if name == "small_direct.bin" {
            let d = decode(&seq).unwrap();
            assert_eq!(d.problem, Problem::from_ids(&[0, 1], &[(&[1], 2)], 3).unwrap());
            assert_eq!(d.label, Some(false));
        }
    }
}
