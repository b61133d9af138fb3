#![no_main]
use affectlab::image::RgbImage;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = RgbImage::from_png_bytes(data) {
        let again = RgbImage::from_png_bytes(&img.to_png_bytes()).expect("re-decode");
        assert_eq!(again, img);
    }
});
