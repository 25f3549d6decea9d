use std::io::Cursor;

use proptest::prelude::*;
use vecstore::{detect_format, parse_embeddings, Error, ParsedRecord, SourceFormat};

fn parse_all(bytes: &[u8], fmt: SourceFormat) -> vecstore::Result<Vec<ParsedRecord>> {
    parse_embeddings(Cursor::new(bytes), fmt)?.collect()
}

fn w2v_binary(rows: &[(&str, &[f32])], trailing_newline: bool) -> Vec<u8> {
    let dim = rows[0].1.len();
    let mut out = format!("{} {}\n", rows.len(), dim).into_bytes();
    for (k, v) in rows {
        out.extend_from_slice(k.as_bytes());
        out.push(b' ');
        for x in *v {
            out.extend_from_slice(&x.to_le_bytes());
        }
        if trailing_newline {
            out.push(b'\n');
        }
    }
    out
}

#[test]
fn glove_three_lines() {
    let text = "the 0.1 0.2 0.3\ncat -1 0 2.5e-1\nsat 1 1 1\n";
    let recs = parse_all(text.as_bytes(), SourceFormat::GloveText).unwrap();
    assert_eq!(recs.len(), 3);
    assert_eq!(recs[1].key, "cat");
    assert_eq!(recs[1].vector.as_slice(), &[-1.0, 0.0, 0.25]);
    assert_eq!(detect_format("txt", text.as_bytes()).unwrap(), SourceFormat::GloveText);
}

#[test]
fn word2vec_text_with_header() {
    let text = "2 3\nking 0.5 0.5 0.5\nqueen 0.1 0.2 0.3";
    let mut reader = parse_embeddings(Cursor::new(text.as_bytes()), SourceFormat::Word2VecText).unwrap();
    assert_eq!(reader.declared(), Some((2, 3)));
    let recs: Vec<_> = reader.by_ref().collect::<Result<_, _>>().unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[1].vector.as_slice(), &[0.1, 0.2, 0.3]);
    assert_eq!(detect_format("txt", text.as_bytes()).unwrap(), SourceFormat::Word2VecText);
    assert_eq!(detect_format(".vec", text.as_bytes()).unwrap(), SourceFormat::FastTextText);
}

#[test]
fn word2vec_binary_with_and_without_newlines() {
    let rows: &[(&str, &[f32])] = &[("alpha", &[1.0, -2.0]), ("béta", &[0.5, 0.25])];
    for nl in [true, false] {
        let bytes = w2v_binary(rows, nl);
        assert_eq!(detect_format("bin", &bytes).unwrap(), SourceFormat::Word2VecBinary);
        // Content wins over a misleading extension.
        assert_eq!(detect_format("txt", &bytes).unwrap(), SourceFormat::Word2VecBinary);
        let recs = parse_all(&bytes, SourceFormat::Word2VecBinary).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].key, "béta");
        assert_eq!(recs[0].vector.as_slice(), &[1.0, -2.0]);
    }
}

#[test]
fn truncated_binary_reports_position() {
    let bytes = w2v_binary(&[("a", &[1.0, 2.0]), ("b", &[3.0, 4.0])], true);
    let cut = &bytes[..bytes.len() - 3];
    let err = parse_all(cut, SourceFormat::Word2VecBinary).unwrap_err();
    match err {
        Error::MalformedRecord { record, location, .. } => {
            assert_eq!(record, 2);
            assert!(location.starts_with("byte "), "{location}");
        }
        other => panic!("unexpected {other:?}"),
    }
    let missing = w2v_binary(&[("a", &[1.0, 2.0])], true);
    let mut lying = b"2 2\n".to_vec();
    lying.extend_from_slice(&missing[4..]);
    assert!(matches!(
        parse_all(&lying, SourceFormat::Word2VecBinary),
        Err(Error::MalformedRecord { record: 2, .. })
    ));
}

#[test]
fn malformed_text_names_the_line() {
    let text = "a 1 2\nb 1 x\n";
    match parse_all(text.as_bytes(), SourceFormat::GloveText).unwrap_err() {
        Error::MalformedRecord { record, location, reason } => {
            assert_eq!(record, 2);
            assert_eq!(location, "line 2");
            assert!(reason.contains("\"x\""), "{reason}");
        }
        other => panic!("unexpected {other:?}"),
    }
    for special in ["nan", "inf", "-inf", "NaN", "infinity"] {
        let t = format!("a 1 {special}\n");
        assert!(matches!(
            parse_all(t.as_bytes(), SourceFormat::GloveText),
            Err(Error::MalformedRecord { .. })
        ));
    }
}

#[test]
fn dimension_drift() {
    let text = "a 1 2\n\nb 1 2 3\n";
    assert!(matches!(
        parse_all(text.as_bytes(), SourceFormat::GloveText),
        Err(Error::DimensionDrift { record: 2, expected: 2, actual: 3 })
    ));
    let text = "1 2\na 1 2 3\n";
    assert!(matches!(
        parse_all(text.as_bytes(), SourceFormat::Word2VecText),
        Err(Error::DimensionDrift { record: 1, expected: 2, actual: 3 })
    ));
}

#[test]
fn bad_header() {
    assert!(matches!(
        parse_embeddings(Cursor::new(b"x y\n".as_slice()), SourceFormat::Word2VecText),
        Err(Error::MalformedRecord { record: 0, .. })
    ));
}

#[test]
fn unknown_format_explains_itself() {
    match detect_format("txt", b"hello world\nfoo\n") {
        Err(Error::UnknownFormat(msg)) => assert!(msg.contains("hello world"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(detect_format("txt", b"\xff\xfe\n"), Err(Error::UnknownFormat(_))));
}

#[test]
fn detection_tolerates_a_cut_first_line() {
    // The head buffer can end mid-token.
    let mut line = String::from("word");
    for i in 0..300 {
        line.push_str(&format!(" 0.{i:04}"));
    }
    let head = &line.as_bytes()[..1000];
    assert_eq!(detect_format("txt", head).unwrap(), SourceFormat::GloveText);
}

#[test]
fn blank_lines_and_crlf_are_fine() {
    let text = "a 1 2\r\n\r\n   \nb 3 4\r\n";
    let recs = parse_all(text.as_bytes(), SourceFormat::GloveText).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[1].vector.as_slice(), &[3.0, 4.0]);
}

proptest! {
    #[test]
    fn text_round_trip(
        rows in proptest::collection::vec(
            ("[a-zA-Z0-9_'.-]{1,10}", proptest::collection::vec(-1e6f32..1e6, 4)),
            1..30,
        )
    ) {
        let mut text = format!("{} 4\n", rows.len());
        for (k, v) in &rows {
            text.push_str(k);
            for x in v {
                // `{:?}` prints the shortest string that parses back exactly.
                text.push_str(&format!(" {x:?}"));
            }
            text.push('\n');
        }
        let recs = parse_all(text.as_bytes(), SourceFormat::Word2VecText).unwrap();
        prop_assert_eq!(recs.len(), rows.len());
        for (r, (k, v)) in recs.iter().zip(&rows) {
            prop_assert_eq!(&r.key, k);
            prop_assert_eq!(r.vector.as_slice(), &v[..]);
        }
    }

    #[test]
    fn binary_round_trip(
        rows in proptest::collection::vec(
            ("[a-z]{1,8}", proptest::collection::vec(-10f32..10.0, 3)),
            1..20,
        ),
        newline in any::<bool>(),
    ) {
        let borrowed: Vec<(&str, &[f32])> = rows.iter().map(|(k, v)| (k.as_str(), v.as_slice())).collect();
        let bytes = w2v_binary(&borrowed, newline);
        let recs = parse_all(&bytes, SourceFormat::Word2VecBinary).unwrap();
        prop_assert_eq!(recs.len(), rows.len());
        for (r, (k, v)) in recs.iter().zip(&rows) {
            prop_assert_eq!(&r.key, k);
            prop_assert_eq!(r.vector.as_slice(), &v[..]);
        }
    }
}
