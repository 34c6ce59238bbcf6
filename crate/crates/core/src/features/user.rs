use crate::corpus::{Gender, Post, User};

use super::{tokenize, FeatureExtractor};

/// User block names in vector order.
pub const USER_FEATURES: [&str; 11] = [
    "replies_per_question",
    "gender_female",
    "num_posts",
    "num_thanks",
    "thanks_per_post",
    "word_len_mean",
    "word_len_var",
    "word_len_skew",
    "sent_len_mean",
    "sent_len_var",
    "sent_len_skew",
];

pub type UserFeatureVector = [f64; 11];

/// Population mean, variance and skewness `m3 / m2^1.5` (zero when the
/// variance is zero or the sample is empty).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
}

pub fn moments(xs: &[f64]) -> Moments {
    if xs.is_empty() {
        return Moments::default();
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    Moments {
        mean,
        variance: m2,
        skewness,
    }
}

/// Engagement ratios, gender indicator, and word/sentence length moments
/// over the user's posts. Counts come from the user record; lengths from the
/// posts. Sentence length is the post's token count over its sentence count.
pub fn user_features(_extractor: &FeatureExtractor, user: &User, posts: &[&Post]) -> UserFeatureVector {
    let mut word_lens = Vec::new();
    let mut sent_lens = Vec::new();
    for p in posts {
        let (tokens, sentences) = tokenize(&p.text);
        word_lens.extend(tokens.iter().map(|t| t.chars().count() as f64));
        if sentences > 0 {
            let mut per = vec![0usize; sentences];
            sentence_lengths(&p.text, &mut per);
            sent_lens.extend(per.into_iter().map(|n| n as f64));
        }
    }
    let w = moments(&word_lens);
    let s = moments(&sent_lens);
    let gender = match user.gender {
        Gender::Female => 1.0,
        Gender::Male => 0.0,
        Gender::Unknown => 0.5,
    };
    [
        user.num_replies as f64 / (user.num_questions as f64 + 1.0),
        gender,
        user.num_posts as f64,
        user.num_thanks as f64,
        user.num_thanks as f64 / (user.num_posts as f64 + 1.0),
        w.mean,
        w.variance,
        w.skewness,
        s.mean,
        s.variance,
        s.skewness,
    ]
}

/// Token counts of each non-empty sentence, in order.
fn sentence_lengths(text: &str, out: &mut [usize]) {
    let mut k = 0;
    for seg in text.split(['.', '!', '?']) {
        let n = tokenize(seg).0.len();
        if n > 0 {
            out[k] = n;
            k += 1;
        }
    }
}
