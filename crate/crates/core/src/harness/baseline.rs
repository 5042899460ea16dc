use crate::dataset::LabeledItem;
use crate::imaging::Image;
use crate::Label;

/// Area-average downsample to `size`×`size`. Each output cell averages
/// the source pixels whose centers fall inside it.
pub fn downsample(img: &Image, size: usize) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut sum = vec![0.0; size * size];
    let mut count = vec![0usize; size * size];
    for y in 0..h {
        let cy = y * size / h;
        for x in 0..w {
            let c = cy * size + x * size / w;
            sum[c] += img.get(x, y);
            count[c] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 }).collect()
}

/// Accuracy of a nearest-class-mean classifier on `size`×`size`
/// downsampled pixels, fitted on `train` and scored on `test`.
pub fn nearest_centroid_accuracy(train: &[LabeledItem], test: &[LabeledItem], size: usize) -> f64 {
    let dim = size * size;
    let mut centroids = [vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 2];
    for item in train {
        let c = item.label.index();
        for (acc, v) in centroids[c].iter_mut().zip(downsample(&item.image, size)) {
            *acc += v;
        }
        counts[c] += 1;
    }
    for (c, n) in centroids.iter_mut().zip(counts) {
        c.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let correct = test
        .iter()
        .filter(|item| {
            let f = downsample(&item.image, size);
            let guess = if dist(&f, &centroids[1]) < dist(&f, &centroids[0]) {
                Label::Patient
            } else {
                Label::Control
            };
            guess == item.label
        })
        .count();
    correct as f64 / test.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_averages_blocks() {
        let img = Image::from_fn(4, 4, |x, y| if x < 2 && y < 2 { 0.0 } else { 1.0 }).unwrap();
        assert_eq!(downsample(&img, 2), vec![0.0, 1.0, 1.0, 1.0]);
        assert_eq!(downsample(&img, 4), img.pixels());
    }
}
