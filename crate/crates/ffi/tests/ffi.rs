use std::ffi::{CStr, CString};
use std::ptr;

use cdn_ffi::*;

const MODEL: &str = "\
[variables]
x = continuous lo=-4 hi=4 points=9
y = continuous lo=-4 hi=4 points=9

[functions]
gaussian(x, y) mean=0,0 cov=1,0,0,1
";

const PARAMS: &str = "\
cutpoints = [0.0]
beta = 1.0
sigma = 2.0
mu = -2.0
rho = 0.5
team_means = [1.0, 2.0, 3.0]

[grid]
lo = -10.0
hi = 10.0
points = 41

[prior]
mean = 0.0
sd = 2.0
";

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(cdn_last_error_message()) }.to_string_lossy().into_owned()
}

fn model() -> *mut CdnModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cdn_model_parse(c(MODEL).as_ptr(), &mut m) }, CdnStatus::Ok);
    m
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(cdn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_round_trip() {
    let m = model();
    let mut n = 0;
    assert_eq!(unsafe { cdn_model_variable_count(m, &mut n) }, CdnStatus::Ok);
    assert_eq!(n, 2);
    let mut passed = -1;
    assert_eq!(unsafe { cdn_model_check(m, 1e-9, 0, &mut passed) }, CdnStatus::Ok);
    assert_eq!(passed, 1);
    unsafe { cdn_model_free(m) };
}

#[test]
fn parse_errors_set_the_message() {
    let mut m = ptr::null_mut();
    let status = unsafe { cdn_model_parse(c("[variables]\nx = weird\n").as_ptr(), &mut m) };
    assert_eq!(status, CdnStatus::Parse);
    assert!(m.is_null());
    assert!(last_error().contains(":2:5:"), "{}", last_error());
    assert_eq!(unsafe { cdn_model_parse(ptr::null(), &mut m) }, CdnStatus::NullPointer);
}

#[test]
fn joint_pdf_and_conditional() {
    let m = model();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { cdn_infer(m, c("x = 0\ny = 0\n").as_ptr(), ptr::null(), &mut r) }, CdnStatus::Ok);
    let mut pdf = 0.0;
    assert_eq!(unsafe { cdn_inference_root_pdf(r, &mut pdf) }, CdnStatus::Ok);
    assert!((pdf - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    unsafe { cdn_inference_free(r) };

    let mut r = ptr::null_mut();
    assert_eq!(unsafe { cdn_infer(m, c("y = 0").as_ptr(), c("x").as_ptr(), &mut r) }, CdnStatus::Ok);
    let mut len = 0;
    assert_eq!(unsafe { cdn_inference_len(r, &mut len) }, CdnStatus::Ok);
    assert_eq!(len, 9);
    let (mut s, mut p) = (0.0, 0.0);
    assert_eq!(unsafe { cdn_inference_row(r, 8, &mut s, ptr::null_mut(), ptr::null_mut(), &mut p) }, CdnStatus::Ok);
    assert_eq!((s, p), (4.0, 1.0));
    assert_eq!(unsafe { cdn_inference_row(r, 9, &mut s, ptr::null_mut(), ptr::null_mut(), &mut p) }, CdnStatus::InvalidQuery);
    assert_eq!(unsafe { cdn_inference_root_pdf(r, &mut pdf) }, CdnStatus::InvalidQuery);
    unsafe { cdn_inference_free(r) };

    let mut r = ptr::null_mut();
    assert_eq!(unsafe { cdn_infer(m, c("").as_ptr(), c("nope").as_ptr(), &mut r) }, CdnStatus::InvalidQuery);
    unsafe { cdn_model_free(m) };
}

#[test]
fn rating_session() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { cdn_rating_session_new(c(PARAMS).as_ptr(), &mut s) }, CdnStatus::Ok);
    let game = r#"{"game_id":"g","game_type":"HeadToHead","teams":[["a"],["b"]],"ranks":[1,2],"scores":[[3.0],[-3.0]]}"#;
    for _ in 0..5 {
        assert_eq!(unsafe { cdn_rating_session_observe(s, c(game).as_ptr()) }, CdnStatus::Ok, "{}", last_error());
    }
    let mut count = 0;
    assert_eq!(unsafe { cdn_rating_session_player_count(s, &mut count) }, CdnStatus::Ok);
    assert_eq!(count, 2);
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        cdn_rating_session_skill_mode(s, c("a").as_ptr(), &mut a);
        cdn_rating_session_skill_mode(s, c("b").as_ptr(), &mut b);
    }
    assert!(a > b, "{a} {b}");
    let next = r#"{"game_id":"n","game_type":"HeadToHead","teams":[["b"],["a"]],"ranks":[1,1]}"#;
    let mut order = [9usize; 2];
    let mut teams = 0;
    assert_eq!(unsafe { cdn_rating_session_predict(s, c(next).as_ptr(), order.as_mut_ptr(), 2, &mut teams) }, CdnStatus::Ok);
    assert_eq!((teams, order), (2, [1, 0]));
    assert_eq!(
        unsafe { cdn_rating_session_predict(s, c(next).as_ptr(), order.as_mut_ptr(), 1, &mut teams) },
        CdnStatus::BufferTooSmall
    );
    let bad = r#"{"game_id":"x","game_type":"HeadToHead","teams":[["a"]],"ranks":[1]}"#;
    assert_eq!(unsafe { cdn_rating_session_observe(s, c(bad).as_ptr()) }, CdnStatus::Parse);
    unsafe { cdn_rating_session_free(s) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cdn.h")).unwrap();
    for name in [
        "typedef struct CdnModel CdnModel",
        "CDN_STATUS_OK = 0",
        "cdn_last_error_message(void)",
        "cdn_infer(",
        "cdn_rating_session_predict(",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
