use std::ffi::CStr;
use std::ptr;

use nnperc::nngraph::build_knn_graph;
use nnperc::pointproc::{sample_binomial, Window};
use nnperc_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(nnp_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn sample_build_and_read_back() {
    unsafe {
        let mut ps = ptr::null_mut();
        assert_eq!(nnp_sample_binomial(0.0, 0.0, 20.0, 20.0, 300, 7, &mut ps), NnpStatus::Ok);
        let mut n = 0;
        assert_eq!(nnp_pointset_len(ps, &mut n), NnpStatus::Ok);
        assert_eq!(n, 300);

        let mut xs = vec![0.0; n];
        let mut ys = vec![0.0; n];
        assert_eq!(nnp_pointset_coords(ps, xs.as_mut_ptr(), ys.as_mut_ptr(), n), NnpStatus::Ok);
        let native = sample_binomial(Window::square(20.0).unwrap(), 300, 7).unwrap();
        for (i, p) in native.points().iter().enumerate() {
            assert_eq!((xs[i], ys[i]), (p.x, p.y));
        }

        let mut g = ptr::null_mut();
        assert_eq!(nnp_graph_build(ps, 4, &mut g), NnpStatus::Ok);
        let mut m = 0;
        assert_eq!(nnp_graph_num_edges(g, &mut m), NnpStatus::Ok);
        let (mut us, mut vs, mut ls) = (vec![0u32; m], vec![0u32; m], vec![0.0; m]);
        assert_eq!(nnp_graph_edges(g, us.as_mut_ptr(), vs.as_mut_ptr(), ls.as_mut_ptr(), m), NnpStatus::Ok);
        let want: Vec<_> = build_knn_graph(&native, 4).unwrap().edges().collect();
        let got: Vec<_> = (0..m).map(|i| (us[i] as usize, vs[i] as usize, ls[i])).collect();
        assert_eq!(got, want);

        let mut d = NnpDistortion::default();
        assert_eq!(nnp_distortion(g, ps, 0.5, false, 0, 0, &mut d), NnpStatus::Ok);
        assert!(d.avg >= 1.0 && d.max >= d.avg && d.observed <= d.inside);

        nnp_graph_free(g);
        nnp_pointset_free(ps);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut ps = ptr::null_mut();
        assert_eq!(nnp_sample_poisson(0.0, 0.0, -1.0, 1.0, 1.0, 1, &mut ps), NnpStatus::InvalidParameter);
        assert!(ps.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(nnp_sample_binomial(0.0, 0.0, 10.0, 10.0, 5, 1, &mut ps), NnpStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(nnp_graph_build(ps, 5, &mut g), NnpStatus::InvalidParameter);
        assert_eq!(nnp_graph_build(ptr::null(), 1, &mut g), NnpStatus::NullPointer);
        let mut cap_short = [0.0; 2];
        assert_eq!(
            nnp_pointset_coords(ps, cap_short.as_mut_ptr(), cap_short.as_mut_ptr(), 2),
            NnpStatus::InvalidParameter
        );
        nnp_pointset_free(ps);
        nnp_pointset_free(ptr::null_mut());
        nnp_graph_free(ptr::null_mut());
    }
}

#[test]
fn numerics_match_core() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(nnp_poisson_cdf(5, 5.0, &mut v), NnpStatus::Ok);
        assert_eq!(v, nnperc::criticalbound::poisson_cdf(5, 5.0).unwrap());
        assert_eq!(nnp_prob_at(0.893, 188, 1.0, &mut v), NnpStatus::Ok);
        assert_eq!(v, nnperc::criticalbound::prob_at(0.893, 188, 1.0).unwrap().value);

        let mut b = NnpBound::default();
        assert_eq!(nnp_min_k(0.59, 1.0, 150, 200, &mut b), NnpStatus::Ok);
        assert_eq!(b.k, 188);
        assert!(b.p > 0.59);

        assert_eq!(nnp_min_k(0.59, 1.0, 100, 120, &mut b), NnpStatus::NotFound);
        assert_eq!(b.k, 120);
        assert!(b.p < 0.59);
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/nnperc.h")).unwrap();
    for name in [
        "NNP_STATUS_OK",
        "NNP_STATUS_NULL_POINTER",
        "typedef struct NnpPointSet NnpPointSet",
        "typedef struct NnpGraph NnpGraph",
        "nnp_sample_poisson",
        "nnp_graph_build",
        "nnp_distortion",
        "nnp_min_k",
        "nnp_last_error",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}
