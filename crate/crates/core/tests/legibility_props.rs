mod common;

use common::Rng;
use proptest::prelude::*;
use sitblend_core::chart::{layout_chart, Canvas, ChartSpec, Dataset, Idiom, Series, Shape};
use sitblend_core::compose::PlacementTransform;
use sitblend_core::control::{canny, CannyParams, ControlKind};
use sitblend_core::legibility::{edge_alignment_score, recover_bar_heights};
use sitblend_core::raster::{render_layout, RenderOptions};
use sitblend_core::ControlMap;

fn random_map(rng: &mut Rng, w: u32, h: u32, margin: u32, density: u32) -> ControlMap {
    let mut data = vec![0u8; (w * h) as usize];
    for y in margin..h - margin {
        for x in margin..w - margin {
            if rng.below(density) == 0 {
                data[(y * w + x) as usize] = 255;
            }
        }
    }
    ControlMap::new(w, h, data, ControlKind::Canny).unwrap()
}

fn shifted(map: &ControlMap, dx: i32, dy: i32) -> ControlMap {
    let (w, h) = map.dims();
    let mut out = ControlMap::blank(w, h, map.kind()).unwrap();
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            let (sx, sy) = (x - dx, y - dy);
            if sx >= 0 && sy >= 0 && sx < w as i32 && sy < h as i32 {
                out.data_mut()[(y as u32 * w + x as u32) as usize] = map.get(sx as u32, sy as u32);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bar_heights_round_trip(w in 200u32..=420, h in 160u32..=320, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let plot_w = w as f64 - 20.0;
        let plot_h = h as f64 - 20.0;
        let gap = 0.2;
        let max_bars = ((plot_w * (1.0 - gap)) / 8.0).floor() as u32;
        let n = rng.range(1, max_bars.min(24));
        let min_frac = 4.0 / plot_h;
        let values: Vec<f64> = (0..n).map(|_| 100.0 * (min_frac + (1.0 - min_frac) * rng.unit())).collect();
        let mut spec = ChartSpec::new(Idiom::Bar, Canvas::new(w, h), Dataset::Series(vec![Series { label: "v".into(), values }]));
        spec.options.insert("domain_max".into(), 100.0);
        let layout = layout_chart(&spec).unwrap();
        let img = render_layout(&layout, &spec.style, RenderOptions::default()).image;
        let edges = canny(&img, CannyParams::default()).unwrap();
        let got = recover_bar_heights(&edges, &PlacementTransform::identity((w, h)), &layout).unwrap();
        for (m, g) in layout.marks.iter().zip(got) {
            let Shape::Rect(r) = m.shape else { unreachable!() };
            prop_assert!(r.width >= 8.0 && r.height >= 4.0 - 1e-9);
            let g = g.expect("bar recovered");
            prop_assert!((g - r.height).abs() <= 2.0, "expected {} got {}", r.height, g);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn self_alignment_is_one(seed in any::<u64>(), r in 0u32..5) {
        let mut rng = Rng::new(seed);
        let m = random_map(&mut rng, 40, 30, 0, 7);
        prop_assume!(m.edge_count() > 0);
        prop_assert_eq!(edge_alignment_score(&m, &m, r).unwrap(), 1.0);
    }

    #[test]
    fn monotone_in_radius(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let a = random_map(&mut rng, 40, 30, 0, 9);
        let b = random_map(&mut rng, 40, 30, 0, 9);
        let mut prev = 0.0;
        for r in 0..8 {
            let s = edge_alignment_score(&a, &b, r).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn symmetric_under_translation(seed in any::<u64>(), dx in -6i32..=6, dy in -6i32..=6, r in 0u32..4) {
        let mut rng = Rng::new(seed);
        // Margins wide enough that shifting plus dilation never hits a border.
        let a = random_map(&mut rng, 50, 40, 12, 8);
        let b = random_map(&mut rng, 50, 40, 12, 8);
        let before = edge_alignment_score(&a, &b, r).unwrap();
        let after = edge_alignment_score(&shifted(&a, dx, dy), &shifted(&b, dx, dy), r).unwrap();
        prop_assert_eq!(before, after);
    }
}

#[test]
fn spec_bar_example() {
    let spec = ChartSpec::new(
        Idiom::Bar,
        Canvas::new(200, 160),
        Dataset::Series(vec![Series {
            label: "v".into(),
            values: vec![3.0, 7.0, 5.0],
        }]),
    );
    let layout = layout_chart(&spec).unwrap();
    let img = render_layout(&layout, &spec.style, RenderOptions::default()).image;
    let edges = canny(&img, CannyParams::default()).unwrap();
    let got =
        recover_bar_heights(&edges, &PlacementTransform::identity((200, 160)), &layout).unwrap();
    for (g, want) in got.iter().zip([60.0, 140.0, 100.0]) {
        assert!((g.unwrap() - want).abs() <= 2.0);
    }
}

#[test]
fn one_pixel_shift_radius_two() {
    let mut rng = Rng::new(5);
    let a = random_map(&mut rng, 30, 30, 2, 4);
    let b = shifted(&a, 1, 0);
    assert_eq!(edge_alignment_score(&a, &b, 2).unwrap(), 1.0);
    let disjoint = shifted(&a, 0, 0);
    let empty = ControlMap::blank(30, 30, ControlKind::Canny).unwrap();
    assert_eq!(edge_alignment_score(&a, &disjoint, 0).unwrap(), 1.0);
    assert_eq!(edge_alignment_score(&a, &empty, 0).unwrap(), 0.0);
}
