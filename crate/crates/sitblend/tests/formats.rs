use proptest::prelude::*;
use sitblend::png_io::{decode_control, decode_png, encode_control, encode_png};
use sitblend::spec_format::{parse_spec, serialize_spec, SpecError};
use sitblend_core::chart::{Canvas, ChartSpec, Dataset, Idiom, Series, TreeNode};
use sitblend_core::control::ControlKind;
use sitblend_core::{ControlMap, RasterImage};

fn image_strategy(max: u32) -> impl Strategy<Value = RasterImage> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), (w * h * 4) as usize)
            .prop_map(move |data| RasterImage::new(w, h, data).unwrap())
    })
}

fn series(n_series: usize, n_values: usize, values: &[f64]) -> Dataset {
    Dataset::Series(
        (0..n_series)
            .map(|s| Series {
                label: format!("s{s}"),
                values: (0..n_values)
                    .map(|i| values[(s * n_values + i) % values.len()])
                    .collect(),
            })
            .collect(),
    )
}

fn spec_strategy() -> impl Strategy<Value = ChartSpec> {
    let values = proptest::collection::vec(0.001f64..1e6, 1..40);
    (
        0usize..8,
        120u32..600,
        100u32..500,
        values,
        1usize..4,
        1usize..9,
        0.5f64..6.0,
    )
        .prop_map(|(kind, w, h, values, n_series, n_values, stroke)| {
            let (idiom, data) = match kind {
                0 => (Idiom::Bar, series(1, n_values, &values)),
                1 => (Idiom::Line, series(n_series, n_values.max(2), &values)),
                2 => (Idiom::Area, series(n_series, n_values.max(2), &values)),
                3 => (
                    Idiom::Streamgraph,
                    series(n_series, n_values.max(2), &values),
                ),
                4 => (Idiom::Pie, series(1, n_values, &values)),
                5 => (
                    Idiom::Scatter,
                    Dataset::Points(values.chunks(2).map(|c| [c[0], c[c.len() - 1]]).collect()),
                ),
                6 => {
                    let row: Vec<[f64; 2]> =
                        values.iter().take(4).map(|&v| [v.sin(), v.cos()]).collect();
                    (Idiom::VectorField, Dataset::Field(vec![row; n_series + 1]))
                }
                _ => {
                    let nodes = (0..n_values)
                        .map(|i| TreeNode {
                            label: format!("n{i}"),
                            parent: (i > 0).then(|| (i - 1) / 2),
                        })
                        .collect();
                    (Idiom::Tree, Dataset::Tree(nodes))
                }
            };
            let mut spec = ChartSpec::new(idiom, Canvas::new(w, h), data);
            spec.style.stroke_width = stroke;
            spec.fill_defaults();
            spec
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn png_round_trip(img in image_strategy(48)) {
        let bytes = encode_png(&img);
        prop_assert_eq!(decode_png(&bytes).unwrap(), img.clone());
        prop_assert_eq!(encode_png(&img), bytes);
    }

    #[test]
    fn control_png_round_trip(w in 1u32..40, h in 1u32..40, seed in any::<u64>()) {
        let data: Vec<u8> = (0..w * h).map(|i| if (seed >> (i % 64)) & 1 == 1 { 255 } else { 0 }).collect();
        let map = ControlMap::new(w, h, data, ControlKind::Canny).unwrap();
        prop_assert_eq!(decode_control(&encode_control(&map), ControlKind::Canny).unwrap(), map);
    }

    #[test]
    fn spec_round_trip(spec in spec_strategy()) {
        let text = serialize_spec(&spec);
        let parsed = parse_spec(&text).unwrap();
        prop_assert_eq!(&parsed, &spec);
        prop_assert_eq!(serialize_spec(&parsed), text);
    }
}

#[test]
fn large_png_round_trip() {
    let (w, h) = (4096u32, 4096u32);
    let mut data = vec![0u8; (w * h * 4) as usize];
    for (i, px) in data.chunks_exact_mut(4).enumerate() {
        let (x, y) = (i as u32 % w, i as u32 / w);
        px.copy_from_slice(&[
            (x % 251) as u8,
            (y % 241) as u8,
            ((x ^ y) & 0xff) as u8,
            255,
        ]);
    }
    let img = RasterImage::new(w, h, data).unwrap();
    let back = decode_png(&encode_png(&img)).unwrap();
    assert_eq!(back.dims(), (w, h));
    assert!(back == img);
}

#[test]
fn corrupt_png_is_an_error() {
    let bytes = encode_png(&RasterImage::new(4, 4, vec![9; 64]).unwrap());
    assert!(decode_png(&bytes[..bytes.len() / 2]).is_err());
    assert!(decode_png(b"not a png").is_err());
}

#[test]
fn spec_errors_carry_position_or_reason() {
    assert!(matches!(
        parse_spec("{"),
        Err(SpecError::Syntax { line: 1, .. })
    ));
    let empty = r#"{"idiom":"bar","canvas":{"width":200,"height":160},"data":{"series":[]}}"#;
    assert!(matches!(parse_spec(empty), Err(SpecError::Invalid(_))));
}
